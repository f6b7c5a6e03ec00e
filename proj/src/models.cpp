#include "epfq/models.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

namespace epfq {

std::string to_string(BaseModel base) {
	return base == BaseModel::Expert ? "Expert" : "HLM";
}

const std::vector<VariableSet> &variable_sets() {
	using F = Fundamental;
	static const std::vector<VariableSet> sets{
	    {"Load", {F::Load}},
	    {"Solar", {F::Solar}},
	    {"Wind", {F::Wind}},
	    {"RES", {F::RES}},
	    {"ResLoad", {F::ResLoad}},
	    {"Load+RES", {F::Load, F::RES}},
	    {"Load+Solar+Wind", {F::Load, F::Solar, F::Wind}},
	};
	return sets;
}

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
	std::vector<std::string> parts;
	std::size_t start = 0;
	while (true) {
		const auto pos = text.find(sep, start);
		parts.emplace_back(text.substr(start, pos - start));
		if (pos == std::string_view::npos) {
			break;
		}
		start = pos + 1;
	}
	return parts;
}

const char *kSpecGrammar = "expected Base or Base-Post^Set_T{n}: Base in {Expert, HLM}, Post in {HS, QR, ReLU}, "
                           "Set one of Load, Solar, Wind, RES, ResLoad, {Load,RES}, {Load,Solar,Wind}, "
                           "n in {5, 7, 11, 21, 51, 101, 201}";

} // namespace

VariableSet parse_variable_set(std::string_view text) {
	std::string_view body = text;
	if (body.size() >= 2 && body.front() == '{' && body.back() == '}') {
		body = body.substr(1, body.size() - 2);
	}
	const char sep = body.find(',') != std::string_view::npos ? ',' : '+';
	std::multiset<Fundamental> wanted;
	try {
		for (const auto &part : split(body, sep)) {
			wanted.insert(parse_fundamental(part));
		}
	} catch (const std::invalid_argument &) {
		throw std::invalid_argument("unknown variable set '" + std::string(text) + "'");
	}
	for (const auto &set : variable_sets()) {
		if (std::multiset<Fundamental>(set.members.begin(), set.members.end()) == wanted) {
			return set;
		}
	}
	throw std::invalid_argument("'" + std::string(text) +
	                            "' is not one of the seven variable sets (Load, Solar, Wind, RES, ResLoad, "
	                            "Load+RES, Load+Solar+Wind)");
}

std::string ModelSpec::name() const {
	std::string out = to_string(base);
	if (is_benchmark()) {
		return out;
	}
	out += "-" + to_string(*postproc) + "^";
	if (varset->members.size() == 1) {
		out += varset->label;
	} else {
		out += "{";
		for (std::size_t i = 0; i < varset->members.size(); ++i) {
			out += (i ? "," : "") + to_string(varset->members[i]);
		}
		out += "}";
	}
	return out + "_" + to_string(*grid);
}

std::string ModelSpec::slug() const {
	if (is_benchmark()) {
		return to_string(base);
	}
	return to_string(base) + "-" + to_string(*postproc) + "_" + varset->label + "_" + to_string(*grid);
}

ModelSpec parse_model_spec(std::string_view text, GridLabel default_grid) {
	const auto fail = [&](const std::string &why) {
		return std::invalid_argument("invalid model spec '" + std::string(text) + "' (" + why + "); " + kSpecGrammar);
	};
	ModelSpec spec;
	const auto dash = text.find('-');
	const auto base = text.substr(0, dash);
	if (base == "Expert") {
		spec.base = BaseModel::Expert;
	} else if (base == "HLM") {
		spec.base = BaseModel::HLM;
	} else {
		throw fail("unknown base '" + std::string(base) + "'");
	}
	if (dash == std::string_view::npos) {
		return spec;
	}
	const auto rest = text.substr(dash + 1);
	const auto caret = rest.find('^');
	if (caret == std::string_view::npos) {
		throw fail("missing '^'");
	}
	try {
		spec.postproc = parse_method(rest.substr(0, caret));
	} catch (const std::invalid_argument &) {
		throw fail("unknown postprocessing method '" + std::string(rest.substr(0, caret)) + "'");
	}
	auto set_and_grid = rest.substr(caret + 1);
	const auto under = set_and_grid.rfind("_T");
	std::string_view set_text = set_and_grid;
	spec.grid = default_grid;
	if (under != std::string_view::npos) {
		set_text = set_and_grid.substr(0, under);
		try {
			spec.grid = parse_grid_label(set_and_grid.substr(under + 1));
		} catch (const std::invalid_argument &) {
			throw fail("unknown grid '" + std::string(set_and_grid.substr(under + 1)) + "'");
		}
	}
	try {
		spec.varset = parse_variable_set(set_text);
	} catch (const std::invalid_argument &e) {
		throw fail(e.what());
	}
	return spec;
}

std::vector<ModelSpec> all_model_specs() {
	std::vector<ModelSpec> specs{{BaseModel::Expert, {}, {}, {}}, {BaseModel::HLM, {}, {}, {}}};
	for (auto base : {BaseModel::Expert, BaseModel::HLM}) {
		for (auto method : {Method::HS, Method::QR, Method::ReLU}) {
			for (const auto &set : variable_sets()) {
				for (auto label : {GridLabel::T5, GridLabel::T7, GridLabel::T11, GridLabel::T21, GridLabel::T51,
				                   GridLabel::T101, GridLabel::T201}) {
					specs.push_back({base, method, set, label});
				}
			}
		}
	}
	return specs;
}

std::string to_string(ColumnGroup group) {
	switch (group) {
	case ColumnGroup::Autoregressive:
		return "Autoregressive";
	case ColumnGroup::Load:
		return "Load";
	case ColumnGroup::RES:
		return "RES";
	case ColumnGroup::ResLoad:
		return "ResLoad";
	case ColumnGroup::Commodities:
		return "Commodities";
	case ColumnGroup::Calendar:
		return "Intercept+Dummies";
	}
	return "?";
}

int base_column_count(BaseModel base) {
	return base == BaseModel::Expert ? 20 : 205;
}

int column_count(const ModelSpec &spec) {
	int n = base_column_count(spec.base);
	if (!spec.is_benchmark()) {
		n += static_cast<int>(spec.varset->members.size()) * grid_size(*spec.grid);
	}
	return n;
}

namespace {

std::string two_digit(int h) {
	return (h < 10 ? "0" : "") + std::to_string(h);
}

ColumnGroup group_of(Fundamental var) {
	switch (var) {
	case Fundamental::Load:
		return ColumnGroup::Load;
	case Fundamental::Solar:
	case Fundamental::Wind:
	case Fundamental::RES:
		return ColumnGroup::RES;
	case Fundamental::ResLoad:
		return ColumnGroup::ResLoad;
	}
	return ColumnGroup::RES;
}

ColumnInfo plain(std::string name, ColumnGroup group) {
	ColumnInfo c;
	c.name = std::move(name);
	c.group = group;
	return c;
}

void add_calendar_and_commodities(std::vector<ColumnInfo> &cols) {
	for (const char *c : kCommodityNames) {
		cols.push_back(plain(c, ColumnGroup::Commodities));
	}
	for (int k = 1; k <= 7; ++k) {
		cols.push_back(plain("dow" + std::to_string(k), ColumnGroup::Calendar));
	}
}

} // namespace

std::vector<ColumnInfo> make_layout(const ModelSpec &spec, const ProbGrid *grid, int hour) {
	std::vector<ColumnInfo> cols;
	using F = Fundamental;
	const std::array<std::pair<F, const char *>, 3> point{{{F::Load, "load_fc"}, {F::Solar, "solar_fc"},
	                                                       {F::Wind, "wind_fc"}}};
	if (spec.base == BaseModel::Expert) {
		for (const char *name : {"p_lag1", "p_lag2", "p_lag7", "p_last", "p_min", "p_max"}) {
			cols.push_back(plain(name, ColumnGroup::Autoregressive));
		}
		for (const auto &[var, name] : point) {
			cols.push_back({name, group_of(var), var, std::nullopt, hour, 0});
		}
	} else {
		for (int lag : {1, 7}) {
			for (int h = 1; h <= kHoursPerDay; ++h) {
				cols.push_back(plain("p_lag" + std::to_string(lag) + "_h" + two_digit(h), ColumnGroup::Autoregressive));
			}
		}
		cols.push_back(plain("p_min", ColumnGroup::Autoregressive));
		cols.push_back(plain("p_max", ColumnGroup::Autoregressive));
		for (const auto &[var, name] : point) {
			for (int lag : {0, 1}) {
				for (int h = 1; h <= kHoursPerDay; ++h) {
					const std::string suffix = (lag == 0 ? "_h" : "_lag1_h") + two_digit(h);
					cols.push_back({name + suffix, group_of(var), var, std::nullopt, h, lag});
				}
			}
		}
	}
	add_calendar_and_commodities(cols);
	if (!spec.is_benchmark()) {
		if (grid == nullptr) {
			throw std::invalid_argument("extended spec " + spec.name() + " needs a probability grid");
		}
		if (grid->label != *spec.grid) {
			throw std::invalid_argument("grid mismatch: spec " + spec.name() + " has " + to_string(*spec.grid) +
			                            ", surfaces use " + to_string(grid->label));
		}
		for (auto var : spec.varset->members) {
			for (double tau : grid->levels) {
				cols.push_back({to_string(var) + "_q" + format_level(tau), group_of(var), var, tau, hour, 0});
			}
		}
	}
	return cols;
}

namespace {

const char *kPriceName = "price";

void require_price(const MarketData &data, DayDate need, DayDate day) {
	if (!data.price.contains(need)) {
		throw std::out_of_range(std::string(kPriceName) + " lag " + need.iso() + " unavailable for forecast day " +
		                        day.iso());
	}
}

void require_forecast(const HourlyPanel &fc, DayDate need, DayDate day) {
	if (!fc.contains(need)) {
		throw std::out_of_range("point forecast '" + fc.name() + "' for " + need.iso() +
		                        " unavailable for forecast day " + day.iso());
	}
}

double *fill_commodities_and_dummies(const MarketData &data, DayDate day, double *out) {
	const CommoditySeries::Closes *closes = nullptr;
	try {
		closes = &data.commodities.lagged(day, 2);
	} catch (const std::out_of_range &) {
		throw std::out_of_range("no commodity close at or before " + (day - 2).iso() + " for forecast day " +
		                        day.iso());
	}
	for (double c : *closes) {
		*out++ = c;
	}
	for (double v : weekday_dummies(day)) {
		*out++ = v;
	}
	return out;
}

double *fill_expert(const MarketData &data, DayDate day, int hour, double *out) {
	for (int lag : {1, 2, 7}) {
		require_price(data, day - lag, day);
	}
	const auto &p = data.price;
	const auto yesterday = p.row(day - 1);
	*out++ = p.at(day - 1, hour);
	*out++ = p.at(day - 2, hour);
	*out++ = p.at(day - 7, hour);
	*out++ = yesterday(kHoursPerDay - 1);
	*out++ = yesterday.minCoeff();
	*out++ = yesterday.maxCoeff();
	for (const HourlyPanel *fc : {&data.load_fc, &data.solar_fc, &data.wind_fc}) {
		require_forecast(*fc, day, day);
		*out++ = fc->at(day, hour);
	}
	return fill_commodities_and_dummies(data, day, out);
}

double *fill_hlm(const MarketData &data, DayDate day, double *out) {
	for (int lag : {1, 7}) {
		require_price(data, day - lag, day);
	}
	const auto &p = data.price;
	for (int lag : {1, 7}) {
		const auto row = p.row(day - lag);
		out = std::copy(row.data(), row.data() + kHoursPerDay, out);
	}
	*out++ = p.row(day - 1).minCoeff();
	*out++ = p.row(day - 1).maxCoeff();
	for (const HourlyPanel *fc : {&data.load_fc, &data.solar_fc, &data.wind_fc}) {
		for (int lag : {0, 1}) {
			require_forecast(*fc, day - lag, day);
			const auto row = fc->row(day - lag);
			out = std::copy(row.data(), row.data() + kHoursPerDay, out);
		}
	}
	return fill_commodities_and_dummies(data, day, out);
}

void check_surfaces(const SurfaceRefs &surfaces, const ModelSpec &spec) {
	if (spec.is_benchmark()) {
		if (!surfaces.empty()) {
			throw std::invalid_argument("benchmark spec " + spec.name() + " takes no surfaces");
		}
		return;
	}
	const auto &members = spec.varset->members;
	if (surfaces.size() != members.size()) {
		throw std::invalid_argument("spec " + spec.name() + " needs " + std::to_string(members.size()) +
		                            " surfaces, got " + std::to_string(surfaces.size()));
	}
	for (std::size_t i = 0; i < members.size(); ++i) {
		const auto *s = surfaces[i];
		if (s == nullptr || s->variable() != members[i]) {
			throw std::invalid_argument("spec " + spec.name() + ": surface " + std::to_string(i) + " must be " +
			                            to_string(members[i]));
		}
		if (s->method() != *spec.postproc) {
			throw std::invalid_argument("spec " + spec.name() + ": surface for " + to_string(members[i]) +
			                            " was built with " + to_string(s->method()));
		}
		if (s->grid().label != *spec.grid) {
			throw std::invalid_argument("grid mismatch: spec " + spec.name() + " has " + to_string(*spec.grid) +
			                            ", surface for " + to_string(members[i]) + " uses " +
			                            to_string(s->grid().label));
		}
	}
}

double *fill_quantiles(const SurfaceRefs &surfaces, DayDate day, int hour, double *out) {
	for (const auto *s : surfaces) {
		if (!s->contains(day)) {
			throw std::out_of_range("no " + to_string(s->variable()) + " quantile forecast for " + day.iso() +
			                        " (surface covers " + s->first_day().iso() + " .. " + s->last_day().iso() + ")");
		}
		const auto q = s->quantiles(day, hour);
		out = std::copy(q.data(), q.data() + q.size(), out);
	}
	return out;
}

const ProbGrid *grid_of(const SurfaceRefs &surfaces) {
	return surfaces.empty() ? nullptr : &surfaces.front()->grid();
}

std::vector<std::string> names_of(const std::vector<ColumnInfo> &cols) {
	std::vector<std::string> names;
	names.reserve(cols.size());
	for (const auto &c : cols) {
		names.push_back(c.name);
	}
	return names;
}

} // namespace

FeatureRow expert_row(const MarketData &data, DayDate day, int hour) {
	const ModelSpec spec{BaseModel::Expert, {}, {}, {}};
	FeatureRow row{names_of(make_layout(spec, nullptr, hour)), Eigen::VectorXd(20)};
	fill_expert(data, day, hour, row.values.data());
	return row;
}

FeatureRow hlm_row(const MarketData &data, DayDate day, int hour) {
	const ModelSpec spec{BaseModel::HLM, {}, {}, {}};
	FeatureRow row{names_of(make_layout(spec, nullptr, hour)), Eigen::VectorXd(205)};
	fill_hlm(data, day, row.values.data());
	return row;
}

FeatureRow extend_row(const FeatureRow &base, const SurfaceRefs &surfaces, const ModelSpec &spec, DayDate day,
                      int hour) {
	check_surfaces(surfaces, spec);
	if (spec.is_benchmark()) {
		return base;
	}
	const auto cols = make_layout(spec, grid_of(surfaces), hour);
	const auto n_base = static_cast<std::size_t>(base.values.size());
	FeatureRow out{base.names, Eigen::VectorXd(static_cast<Eigen::Index>(cols.size()))};
	out.values.head(base.values.size()) = base.values;
	for (std::size_t i = n_base; i < cols.size(); ++i) {
		out.names.push_back(cols[i].name);
	}
	fill_quantiles(surfaces, day, hour, out.values.data() + n_base);
	return out;
}

std::vector<std::string> DesignMatrix::names() const {
	return names_of(columns);
}

DesignMatrix DesignMatrix::slice(DayDate from, DayDate to) const {
	if (from < first_day || to > last_day() || to < from) {
		throw std::out_of_range("design rows " + from.iso() + " .. " + to.iso() + " outside " + first_day.iso() +
		                        " .. " + last_day().iso());
	}
	DesignMatrix out;
	out.columns = columns;
	out.first_day = from;
	out.hour = hour;
	out.dropped = dropped;
	const auto start = static_cast<Eigen::Index>(from - first_day);
	const auto n = static_cast<Eigen::Index>(to - from + 1);
	out.X = X.middleRows(start, n);
	out.y = y.segment(start, n);
	return out;
}

DesignMatrix build_design(const MarketData &data, const SurfaceRefs &surfaces, const ModelSpec &spec, int hour,
                          DayDate first, DayDate last) {
	if (hour < 1 || hour > kHoursPerDay) {
		throw std::out_of_range("hour " + std::to_string(hour) + " outside 1..24");
	}
	if (last < first) {
		throw std::invalid_argument("empty design range " + first.iso() + " .. " + last.iso());
	}
	check_surfaces(surfaces, spec);
	DesignMatrix m;
	m.columns = make_layout(spec, grid_of(surfaces), hour);
	m.first_day = first;
	m.hour = hour;
	const auto n = static_cast<Eigen::Index>(last - first + 1);
	const auto p = static_cast<Eigen::Index>(m.columns.size());
	m.X.resize(n, p);
	m.y.resize(n);
	Eigen::RowVectorXd row(p);
	for (Eigen::Index i = 0; i < n; ++i) {
		const DayDate day = first + static_cast<int>(i);
		double *out = row.data();
		out = spec.base == BaseModel::Expert ? fill_expert(data, day, hour, out) : fill_hlm(data, day, out);
		fill_quantiles(surfaces, day, hour, out);
		m.X.row(i) = row;
		m.y(i) = data.price.contains(day) ? data.price.at(day, hour) : std::nan("");
	}
	return m;
}

std::vector<bool> solar_exclusion_mask(const DesignMatrix &window) {
	const auto p = window.columns.size();
	std::vector<bool> drop(p, false);
	const double n = static_cast<double>(window.X.rows());
	bool same_hour_dropped = false;
	for (std::size_t j = 0; j < p; ++j) {
		const auto &c = window.columns[j];
		if (c.variable != Fundamental::Solar || c.is_quantile()) {
			continue;
		}
		const auto col = window.X.col(static_cast<Eigen::Index>(j));
		const double zeros = static_cast<double>((col.array() == 0.0).count());
		if (zeros / n > kSolarZeroShare) {
			drop[j] = true;
			if (c.day_lag == 0 && c.hour == window.hour) {
				same_hour_dropped = true;
			}
		}
	}
	if (same_hour_dropped) {
		for (std::size_t j = 0; j < p; ++j) {
			const auto &c = window.columns[j];
			if (c.variable == Fundamental::Solar && c.is_quantile()) {
				drop[j] = true;
			}
		}
	}
	return drop;
}

DesignMatrix apply_solar_exclusion(const DesignMatrix &window) {
	const auto drop = solar_exclusion_mask(window);
	DesignMatrix out;
	out.first_day = window.first_day;
	out.hour = window.hour;
	out.y = window.y;
	out.dropped = window.dropped;
	std::vector<Eigen::Index> keep;
	for (std::size_t j = 0; j < drop.size(); ++j) {
		if (drop[j]) {
			out.dropped.push_back(window.columns[j].name);
		} else {
			keep.push_back(static_cast<Eigen::Index>(j));
			out.columns.push_back(window.columns[j]);
		}
	}
	out.X = window.X(Eigen::all, keep);
	return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
	x += 0x9e3779b97f4a7c15ULL;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t run_seed, DayDate day, int hour) {
	const auto serial = static_cast<std::uint64_t>(static_cast<std::int64_t>(day.serial()));
	return splitmix64(splitmix64(splitmix64(run_seed) ^ serial) ^ static_cast<std::uint64_t>(hour));
}

void parallel_for(int n, int threads, const std::function<void(int)> &f) {
	if (threads <= 1 || n <= 1) {
		for (int i = 0; i < n; ++i) {
			f(i);
		}
		return;
	}
	std::atomic<int> next{0};
	std::exception_ptr error;
	std::mutex error_mutex;
	const auto worker = [&] {
		for (int i = next++; i < n; i = next++) {
			try {
				f(i);
			} catch (...) {
				const std::lock_guard lock(error_mutex);
				if (!error) {
					error = std::current_exception();
				}
			}
		}
	};
	std::vector<std::thread> pool;
	const int count = std::min(threads, n);
	for (int t = 0; t < count; ++t) {
		pool.emplace_back(worker);
	}
	for (auto &t : pool) {
		t.join();
	}
	if (error) {
		std::rethrow_exception(error);
	}
}

namespace {

// Fits hour h of forecast day `day` from a design covering at least [day - W, day].
HourFit fit_one(const DesignMatrix &full, DayDate day, const FitOptions &options) {
	const DayDate from = day - options.window;
	if (from < full.first_day || day > full.last_day()) {
		throw std::out_of_range("calibration window " + from.iso() + " .. " + (day - 1).iso() +
		                        " not covered by the design (" + full.first_day.iso() + " .. " +
		                        full.last_day().iso() + ")");
	}
	const auto start = static_cast<Eigen::Index>(from - full.first_day);
	const auto n = static_cast<Eigen::Index>(options.window);
	DesignMatrix window;
	window.columns = full.columns;
	window.hour = full.hour;
	window.first_day = from;
	window.X = full.X.middleRows(start, n);
	window.y = full.y.segment(start, n);
	if (!window.y.allFinite()) {
		throw std::out_of_range("price missing inside calibration window " + from.iso() + " .. " +
		                        (day - 1).iso() + " for hour " + std::to_string(full.hour));
	}
	const auto drop = solar_exclusion_mask(window);
	HourFit out;
	out.hour = full.hour;
	std::vector<Eigen::Index> keep;
	std::vector<std::string> names;
	for (std::size_t j = 0; j < drop.size(); ++j) {
		if (!drop[j]) {
			keep.push_back(static_cast<Eigen::Index>(j));
			out.column_index.push_back(static_cast<int>(j));
			names.push_back(full.columns[j].name);
		}
	}
	const Eigen::MatrixXd X = window.X(Eigen::all, keep);
	auto lasso_options = options.lasso;
	lasso_options.seed = derive_seed(options.run_seed, day, full.hour);
	out.fit = lasso::fit_lasso(X, window.y, std::move(names), lasso_options);

	const Eigen::VectorXd x = full.X.row(static_cast<Eigen::Index>(day - full.first_day))(keep).transpose();
	out.forecast = lasso::predict(out.fit, x);
	const auto &st = out.fit.standardizer;
	out.x_std = Eigen::VectorXd::Zero(x.size());
	for (auto j : st.retained) {
		out.x_std(j) = (x(j) - st.mean(j)) / st.scale(j);
	}
	return out;
}

} // namespace

std::vector<HourFit> fit_hour_models(const MarketData &data, const SurfaceRefs &surfaces, const ModelSpec &spec,
                                     DayDate day, const FitOptions &options) {
	std::vector<HourFit> fits(kHoursPerDay);
	parallel_for(kHoursPerDay, options.threads, [&](int i) {
		const auto design = build_design(data, surfaces, spec, i + 1, day - options.window, day);
		fits[static_cast<std::size_t>(i)] = fit_one(design, day, options);
	});
	return fits;
}

DayDate first_forecast_day(const MarketData &data, BaseModel base, int window) {
	// window rows reach back to d - W, whose regressors need p_{d-W-7} and (HLM) forecasts of d-W-1
	DayDate d = data.price.first_day() + window + 7;
	const int fc_lag = base == BaseModel::HLM ? 1 : 0;
	for (const HourlyPanel *fc : {&data.load_fc, &data.solar_fc, &data.wind_fc}) {
		d = std::max(d, fc->first_day() + window + fc_lag);
	}
	if (!data.commodities.empty()) {
		d = std::max(d, data.commodities.closes().begin()->first + window + 2);
	}
	return d;
}

BacktestReport rolling_backtest(const MarketData &data, const SurfaceRefs &surfaces, const ModelSpec &spec,
                                DayDate first, DayDate last, const BacktestOptions &options) {
	if (last < first) {
		throw std::invalid_argument("empty out-of-sample range " + first.iso() + " .. " + last.iso());
	}
	if (options.fit.window < 2) {
		throw std::invalid_argument("calibration window must hold at least two days");
	}
	BacktestReport report;
	report.spec = spec;
	check_surfaces(surfaces, spec);
	report.columns = make_layout(spec, grid_of(surfaces), 1);

	std::vector<DayDate> todo;
	for (DayDate d = first; d <= last; ++d) {
		if (!options.skip || !options.skip(d)) {
			todo.push_back(d);
		}
	}
	if (todo.empty()) {
		return report;
	}
	// one design per hour over [first todo - W, last todo]; windows are row slices of it
	std::vector<DesignMatrix> designs(kHoursPerDay);
	parallel_for(kHoursPerDay, options.fit.threads, [&](int i) {
		designs[static_cast<std::size_t>(i)] =
		    build_design(data, surfaces, spec, i + 1, todo.front() - options.fit.window, todo.back());
	});
	for (const DayDate day : todo) {
		DayResult result;
		result.day = day;
		result.fits.resize(kHoursPerDay);
		parallel_for(kHoursPerDay, options.fit.threads, [&](int i) {
			result.fits[static_cast<std::size_t>(i)] = fit_one(designs[static_cast<std::size_t>(i)], day, options.fit);
		});
		for (int h = 0; h < kHoursPerDay; ++h) {
			result.forecast[static_cast<std::size_t>(h)] = result.fits[static_cast<std::size_t>(h)].forecast;
			result.actual[static_cast<std::size_t>(h)] =
			    data.price.contains(day) ? data.price.at(day, h + 1) : std::nan("");
		}
		if (options.on_day) {
			options.on_day(result);
		}
		if (options.keep_days) {
			report.days.push_back(std::move(result));
		}
	}
	return report;
}

} // namespace epfq
