#include "epfq/pipeline.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "epfq/csv.hpp"
#include "epfq/evalstat.hpp"
#include "epfq/synth.hpp"

namespace fs = std::filesystem;

namespace epfq {

Dataset load_dataset(const RunConfig &config) {
	const auto &src = config.data;
	Dataset ds;
	if (src.synthetic) {
		auto m = generate_synthetic_market(src.synthetic_seed, src.synthetic_days, src.synthetic_start);
		ds.data = std::move(m.data);
		ds.load = std::move(m.load);
		ds.solar = std::move(m.solar);
		ds.wind = std::move(m.wind);
		return ds;
	}
	ds.data.price = read_panel_csv(src.price, "price");
	ds.data.load_fc = read_panel_csv(src.load_fc, "Load_fc");
	ds.data.solar_fc = read_panel_csv(src.solar_fc, "Solar_fc");
	ds.data.wind_fc = read_panel_csv(src.wind_fc, "Wind_fc");
	ds.load = read_panel_csv(src.load, "Load");
	ds.solar = read_panel_csv(src.solar, "Solar");
	ds.wind = read_panel_csv(src.wind, "Wind");
	ds.data.commodities = read_commodities_csv(src.commodities);
	if (ds.data.commodities.empty()) {
		throw std::runtime_error("commodity file '" + src.commodities + "' holds no closes");
	}
	return ds;
}

void write_dataset(const Dataset &ds, const std::string &dir) {
	fs::create_directories(dir);
	const auto at = [&](const char *name) { return (fs::path(dir) / name).string(); };
	write_panel_csv(ds.data.price, at("price.csv"));
	write_panel_csv(ds.data.load_fc, at("load_fc.csv"));
	write_panel_csv(ds.data.solar_fc, at("solar_fc.csv"));
	write_panel_csv(ds.data.wind_fc, at("wind_fc.csv"));
	write_panel_csv(ds.load, at("load.csv"));
	write_panel_csv(ds.solar, at("solar.csv"));
	write_panel_csv(ds.wind, at("wind.csv"));
	write_commodities_csv(ds.data.commodities, at("commodities.csv"));
}

FundamentalPair fundamental_series(const Dataset &ds, Fundamental variable) {
	switch (variable) {
	case Fundamental::Load:
		return {ds.data.load_fc, ds.load};
	case Fundamental::Solar:
		return {ds.data.solar_fc, ds.solar};
	case Fundamental::Wind:
		return {ds.data.wind_fc, ds.wind};
	case Fundamental::RES:
	case Fundamental::ResLoad: {
		const auto fc = derive_fundamentals(ds.data.load_fc, ds.data.solar_fc, ds.data.wind_fc);
		const auto act = derive_fundamentals(ds.load, ds.solar, ds.wind);
		if (variable == Fundamental::RES) {
			return {fc.res.renamed("RES_fc"), act.res};
		}
		return {fc.res_load.renamed("ResLoad_fc"), act.res_load};
	}
	}
	throw std::invalid_argument("unknown fundamental");
}

std::string to_string(const SurfaceKey &key) {
	return to_string(key.variable) + "_" + to_string(key.method) + "_" + to_string(key.grid);
}

Plan make_plan(const RunConfig &config, const Dataset &ds) {
	Plan plan;
	std::set<std::string> seen;
	std::set<SurfaceKey> keys;
	for (const auto &text : config.specs) {
		auto spec = parse_model_spec(text, config.default_grid);
		if (!seen.insert(spec.name()).second) {
			continue;
		}
		if (!spec.is_benchmark()) {
			for (auto var : spec.varset->members) {
				keys.insert({var, *spec.postproc, *spec.grid});
			}
		}
		plan.specs.push_back(std::move(spec));
	}
	plan.surfaces.assign(keys.begin(), keys.end());

	const int W = config.price_window;
	const int N = config.postproc_window;
	DayDate feasible = ds.data.price.first_day();
	for (const auto &spec : plan.specs) {
		feasible = std::max(feasible, first_forecast_day(ds.data, spec.base, W));
	}
	if (!plan.surfaces.empty()) {
		// the first surface day needs N days of forecasts and actuals before it
		for (const HourlyPanel *p : {&ds.data.load_fc, &ds.data.solar_fc, &ds.data.wind_fc, &ds.load, &ds.solar,
		                             &ds.wind}) {
			feasible = std::max(feasible, p->first_day() + N + W);
		}
	}
	plan.oos_end = config.oos_end.value_or(ds.data.price.last_day());
	plan.oos_start = config.oos_start.value_or(feasible);
	if (plan.oos_start < feasible) {
		throw std::runtime_error("oos_start " + plan.oos_start.iso() + " precedes the first feasible forecast day " +
		                         feasible.iso() + " for N=" + std::to_string(N) + ", W=" + std::to_string(W));
	}
	if (plan.oos_end < plan.oos_start) {
		throw std::runtime_error("out-of-sample range " + plan.oos_start.iso() + " .. " + plan.oos_end.iso() +
		                         " is empty (first feasible day for N=" + std::to_string(N) + ", W=" + std::to_string(W) + ")");
	}
	if (!ds.data.price.contains(plan.oos_end)) {
		throw std::runtime_error("oos_end " + plan.oos_end.iso() + " lies beyond the last price day " +
		                         ds.data.price.last_day().iso());
	}
	for (const HourlyPanel *p : {&ds.data.load_fc, &ds.data.solar_fc, &ds.data.wind_fc}) {
		if (p->last_day() < plan.oos_end) {
			throw std::runtime_error("point forecast '" + p->name() + "' ends " + p->last_day().iso() +
			                         ", before oos_end " + plan.oos_end.iso());
		}
	}
	plan.surface_start = plan.oos_start - W;
	return plan;
}

std::uint64_t fnv1a(const void *data, std::size_t size, std::uint64_t hash) {
	const auto *bytes = static_cast<const unsigned char *>(data);
	for (std::size_t i = 0; i < size; ++i) {
		hash ^= bytes[i];
		hash *= 0x100000001b3ULL;
	}
	return hash;
}

namespace {

constexpr char kSurfaceMagic[8] = {'E', 'P', 'F', 'Q', 'S', 'R', 'F', '1'};

template <typename T>
void put(std::ostream &out, const T &v) {
	out.write(reinterpret_cast<const char *>(&v), sizeof v);
}

template <typename T>
T take(std::istream &in) {
	T v{};
	in.read(reinterpret_cast<char *>(&v), sizeof v);
	if (!in) {
		throw std::runtime_error("truncated surface file");
	}
	return v;
}

} // namespace

void write_surface_binary(const QuantileSurface &s, const std::string &path) {
	const auto tmp = path + ".tmp";
	{
		std::ofstream out(tmp, std::ios::binary);
		if (!out) {
			throw std::runtime_error("cannot write '" + tmp + "'");
		}
		out.write(kSurfaceMagic, sizeof kSurfaceMagic);
		put<std::int32_t>(out, static_cast<std::int32_t>(s.variable()));
		put<std::int32_t>(out, static_cast<std::int32_t>(s.method()));
		put<std::int32_t>(out, static_cast<std::int32_t>(s.grid().label));
		put<std::int32_t>(out, s.grid().window);
		put<std::int32_t>(out, s.first_day().serial());
		put<std::int32_t>(out, s.n_days());
		put<std::int32_t>(out, static_cast<std::int32_t>(s.grid().size()));
		out.write(reinterpret_cast<const char *>(s.grid().levels.data()),
		          static_cast<std::streamsize>(s.grid().levels.size() * sizeof(double)));
		out.write(reinterpret_cast<const char *>(s.values().data()),
		          static_cast<std::streamsize>(s.values().size() * sizeof(double)));
		out.write(reinterpret_cast<const char *>(s.untrained_flags().data()),
		          static_cast<std::streamsize>(s.untrained_flags().size()));
		if (!out) {
			throw std::runtime_error("failed writing '" + tmp + "'");
		}
	}
	fs::rename(tmp, path);
}

QuantileSurface read_surface_binary(const std::string &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw std::runtime_error("cannot open surface file '" + path + "'");
	}
	char magic[8];
	in.read(magic, sizeof magic);
	if (!in || std::memcmp(magic, kSurfaceMagic, sizeof magic) != 0) {
		throw std::runtime_error("'" + path + "' is not a surface file");
	}
	const auto variable = static_cast<Fundamental>(take<std::int32_t>(in));
	const auto method = static_cast<Method>(take<std::int32_t>(in));
	const auto label = static_cast<GridLabel>(take<std::int32_t>(in));
	const int window = take<std::int32_t>(in);
	const auto first = DayDate::from_serial(take<std::int32_t>(in));
	const int n_days = take<std::int32_t>(in);
	const int n_levels = take<std::int32_t>(in);
	auto grid = make_grid(label, window);
	if (static_cast<int>(grid.size()) != n_levels) {
		throw std::runtime_error("'" + path + "': grid size mismatch");
	}
	in.read(reinterpret_cast<char *>(grid.levels.data()), static_cast<std::streamsize>(n_levels * sizeof(double)));
	QuantileSurface s(variable, method, grid, first, n_days);
	in.read(reinterpret_cast<char *>(s.values().data()), static_cast<std::streamsize>(s.values().size() * sizeof(double)));
	in.read(reinterpret_cast<char *>(s.untrained_flags().data()),
	        static_cast<std::streamsize>(s.untrained_flags().size()));
	if (!in) {
		throw std::runtime_error("'" + path + "': truncated surface file");
	}
	return s;
}

std::string to_string(Stage stage) {
	switch (stage) {
	case Stage::Ingest:
		return "ingest";
	case Stage::Postprocess:
		return "postprocess";
	case Stage::Backtest:
		return "backtest";
	case Stage::Evaluate:
		return "evaluate";
	case Stage::Report:
		return "report";
	case Stage::Run:
		return "run";
	}
	return "?";
}

StageError::StageError(Stage stage, const std::string &message)
    : std::runtime_error("[" + to_string(stage) + "] " + message), stage_(stage) {}

std::string forecast_path(const RunConfig &config, const ModelSpec &spec) {
	return (fs::path(config.output_dir) / "forecasts" / (spec.slug() + ".csv")).string();
}

std::string history_path(const RunConfig &config, const ModelSpec &spec) {
	return (fs::path(config.output_dir) / "history" / (spec.slug() + ".csv")).string();
}

namespace {

std::ostream &logger(const PipelineOptions &options) {
	static std::ostream null(nullptr);
	return options.log != nullptr ? *options.log : null;
}

std::string fmt(double v) {
	return csv::format(v);
}

void write_text(const fs::path &path, const std::string &text) {
	fs::create_directories(path.parent_path());
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw std::runtime_error("cannot write '" + path.string() + "'");
	}
	out << text;
}

// ---------------------------------------------------------------- surfaces

std::uint64_t panel_hash(const HourlyPanel &p, std::uint64_t h) {
	const std::int32_t first = p.first_day().serial();
	h = fnv1a(&first, sizeof first, h);
	return fnv1a(p.values().data(), static_cast<std::size_t>(p.values().size()) * sizeof(double), h);
}

std::string surface_cache_path(const RunConfig &config, const SurfaceKey &key, const FundamentalPair &series,
                               const Plan &plan) {
	std::uint64_t h = panel_hash(series.forecast, 0xcbf29ce484222325ULL);
	h = panel_hash(series.actual, h);
	const std::int32_t fields[] = {static_cast<std::int32_t>(key.variable), static_cast<std::int32_t>(key.method),
	                               static_cast<std::int32_t>(key.grid), config.postproc_window,
	                               plan.surface_start.serial(), plan.oos_end.serial()};
	h = fnv1a(fields, sizeof fields, h);
	std::ostringstream name;
	name << "surface_" << to_string(key) << "_" << std::hex << std::setw(16) << std::setfill('0') << h << ".bin";
	return (fs::path(config.output_dir) / "cache" / name.str()).string();
}

std::map<SurfaceKey, QuantileSurface> obtain_surfaces(const RunConfig &config, const Dataset &ds, const Plan &plan,
                                                      const PipelineOptions &options, bool write_csv) {
	std::map<SurfaceKey, QuantileSurface> out;
	std::vector<QuantileSurface> built(plan.surfaces.size());
	std::vector<std::string> paths(plan.surfaces.size());
	std::vector<char> cached(plan.surfaces.size(), 0);
	fs::create_directories(fs::path(config.output_dir) / "cache");
	parallel_for(static_cast<int>(plan.surfaces.size()), config.threads, [&](int i) {
		const auto &key = plan.surfaces[static_cast<std::size_t>(i)];
		const auto series = fundamental_series(ds, key.variable);
		const auto path = surface_cache_path(config, key, series, plan);
		paths[static_cast<std::size_t>(i)] = path;
		if (fs::exists(path)) {
			built[static_cast<std::size_t>(i)] = read_surface_binary(path);
			cached[static_cast<std::size_t>(i)] = 1;
			return;
		}
		const auto grid = make_grid(key.grid, config.postproc_window);
		built[static_cast<std::size_t>(i)] = build_surface(key.variable, series.forecast, series.actual, key.method,
		                                                   grid, config.postproc_window, plan.surface_start,
		                                                   plan.oos_end);
		write_surface_binary(built[static_cast<std::size_t>(i)], path);
	});
	for (std::size_t i = 0; i < plan.surfaces.size(); ++i) {
		logger(options) << "surface " << to_string(plan.surfaces[i]) << (cached[i] ? " (cached)" : " (built)") << "\n";
		if (write_csv) {
			const auto csv_path = fs::path(config.output_dir) / "surfaces" / (to_string(plan.surfaces[i]) + ".csv");
			fs::create_directories(csv_path.parent_path());
			std::ofstream f(csv_path, std::ios::binary);
			write_surface_csv(built[i], f);
		}
		out.emplace(plan.surfaces[i], std::move(built[i]));
	}
	return out;
}

// ---------------------------------------------------------------- backtest files

const char *kForecastHeader = "date,hour,forecast,actual,error\n";
const char *kHistoryHeader = "date,hour,column,coef,coef_std,x_std\n";

// Days whose 24 forecast rows are all present.
std::set<DayDate> complete_days(const std::string &path) {
	std::set<DayDate> done;
	if (!fs::exists(path)) {
		return done;
	}
	std::ifstream in(path);
	std::string line;
	std::getline(in, line);
	std::map<DayDate, std::set<int>> hours;
	while (std::getline(in, line)) {
		const auto c1 = line.find(',');
		const auto c2 = line.find(',', c1 + 1);
		const auto c5 = std::count(line.begin(), line.end(), ',');
		if (c1 == std::string::npos || c2 == std::string::npos || c5 != 4) {
			continue; // torn final line
		}
		try {
			hours[DayDate::parse(line.substr(0, c1))].insert(std::stoi(line.substr(c1 + 1, c2 - c1 - 1)));
		} catch (const std::exception &) {
			continue;
		}
	}
	for (const auto &[day, hs] : hours) {
		if (hs.size() == kHoursPerDay) {
			done.insert(day);
		}
	}
	return done;
}

// Rewrites a day-keyed CSV keeping only lines of days in `keep`.
void retain_days(const std::string &path, const std::string &header, const std::set<DayDate> &keep) {
	std::string kept = header;
	if (fs::exists(path)) {
		std::ifstream in(path);
		std::string line;
		std::getline(in, line);
		while (std::getline(in, line)) {
			const auto c1 = line.find(',');
			if (c1 == std::string::npos) {
				continue;
			}
			try {
				if (keep.count(DayDate::parse(line.substr(0, c1)))) {
					kept += line + "\n";
				}
			} catch (const std::exception &) {
			}
		}
	}
	write_text(path, kept);
}

std::string forecast_lines(const DayResult &day) {
	std::string s;
	const auto iso = day.day.iso();
	for (int h = 0; h < kHoursPerDay; ++h) {
		const auto k = static_cast<std::size_t>(h);
		s += iso + "," + std::to_string(h + 1) + "," + fmt(day.forecast[k]) + "," + fmt(day.actual[k]) + "," +
		     fmt(day.forecast[k] - day.actual[k]) + "\n";
	}
	return s;
}

std::string history_lines(const DayResult &day) {
	std::string s;
	for (const auto &r : history_rows(day)) {
		s += r.day.iso() + "," + std::to_string(r.hour) + "," + r.column + "," + fmt(r.coef) + "," + fmt(r.coef_std) +
		     "," + fmt(r.x_std) + "\n";
	}
	return s;
}

nlohmann::json fits_json(const DayResult &day) {
	nlohmann::json j;
	j["date"] = day.day.iso();
	j["hours"] = nlohmann::json::array();
	for (const auto &f : day.fits) {
		auto fit = lasso::to_json(f.fit);
		fit["hour"] = f.hour;
		j["hours"].push_back(std::move(fit));
	}
	return j;
}

SurfaceRefs refs_for(const ModelSpec &spec, const std::map<SurfaceKey, QuantileSurface> &surfaces) {
	SurfaceRefs refs;
	if (!spec.is_benchmark()) {
		for (auto var : spec.varset->members) {
			refs.push_back(&surfaces.at({var, *spec.postproc, *spec.grid}));
		}
	}
	return refs;
}

FitOptions fit_options(const RunConfig &config) {
	FitOptions fit;
	fit.window = config.price_window;
	fit.run_seed = config.seed;
	fit.threads = config.threads;
	fit.lasso.folds = config.cv_folds;
	fit.lasso.lambda_count = config.lambda_count;
	fit.lasso.lambda_min_ratio = config.lambda_min_ratio;
	return fit;
}

void backtest_spec(const RunConfig &config, const Dataset &ds, const Plan &plan, const ModelSpec &spec,
                   const std::map<SurfaceKey, QuantileSurface> &surfaces, const PipelineOptions &options) {
	const auto fc_path = forecast_path(config, spec);
	const auto hist_path = history_path(config, spec);
	const auto fits_path = (fs::path(config.output_dir) / "fits" / (spec.slug() + ".json")).string();
	std::set<DayDate> done;
	if (options.resume) {
		for (auto d : complete_days(fc_path)) {
			if (d >= plan.oos_start && d <= plan.oos_end) {
				done.insert(d);
			}
		}
	}
	retain_days(fc_path, kForecastHeader, done);
	retain_days(hist_path, kHistoryHeader, done);
	if (!done.count(plan.oos_end)) {
		fs::remove(fits_path);
	}
	logger(options) << "backtest " << spec.name() << ": " << done.size() << " day(s) on file\n";

	std::ofstream fc_out(fc_path, std::ios::app | std::ios::binary);
	std::ofstream hist_out(hist_path, std::ios::app | std::ios::binary);
	BacktestOptions bo;
	bo.fit = fit_options(config);
	bo.keep_days = false;
	bo.skip = [&](DayDate d) { return done.count(d) > 0; };
	bo.on_day = [&](const DayResult &day) {
		// history first: a day counts as done once its forecast block is complete
		hist_out << history_lines(day);
		hist_out.flush();
		fc_out << forecast_lines(day);
		fc_out.flush();
		if (!hist_out || !fc_out) {
			throw std::runtime_error("failed writing backtest output for " + spec.name());
		}
		if (day.day == plan.oos_end) {
			write_text(fits_path, fits_json(day).dump(1) + "\n");
		}
	};
	rolling_backtest(ds.data, refs_for(spec, surfaces), spec, plan.oos_start, plan.oos_end, bo);
}

// ---------------------------------------------------------------- evaluation

struct SpecErrors {
	ModelSpec spec;
	Eigen::MatrixXd errors; // days x 24
	Eigen::VectorXd daily;  // RMSE_d
	double rmse = 0.0;
};

SpecErrors read_errors(const RunConfig &config, const Plan &plan, const ModelSpec &spec) {
	const auto path = forecast_path(config, spec);
	if (!fs::exists(path)) {
		throw std::runtime_error("no forecasts for " + spec.name() + " ('" + path + "'); run the backtest stage");
	}
	const auto table = csv::read_file(path);
	const auto c_date = table.column("date", path);
	const auto c_hour = table.column("hour", path);
	const auto c_err = table.column("error", path);
	const int n = plan.oos_end - plan.oos_start + 1;
	SpecErrors out;
	out.spec = spec;
	out.errors = Eigen::MatrixXd::Constant(n, kHoursPerDay, std::nan(""));
	for (std::size_t r = 0; r < table.rows.size(); ++r) {
		const auto &row = table.rows[r];
		const auto day = DayDate::parse(row[c_date]);
		if (day < plan.oos_start || day > plan.oos_end) {
			continue;
		}
		const auto ctx = path + ":" + std::to_string(r + 2);
		const int h = csv::to_int(row[c_hour], ctx);
		if (h < 1 || h > kHoursPerDay) {
			throw std::runtime_error(ctx + ": hour outside 1..24");
		}
		out.errors(day - plan.oos_start, h - 1) = csv::to_double(row[c_err], ctx);
	}
	for (int d = 0; d < n; ++d) {
		if (!out.errors.row(d).allFinite()) {
			throw std::runtime_error("forecasts for " + spec.name() + " incomplete on " + (plan.oos_start + d).iso() +
			                         "; rerun the backtest stage");
		}
	}
	out.daily = rmse_by_day(out.errors);
	out.rmse = rmse_aggregate({out.daily.data(), static_cast<std::size_t>(out.daily.size())});
	return out;
}

std::vector<HistoryRow> read_history(const RunConfig &config, const Plan &plan, const ModelSpec &spec) {
	const auto path = history_path(config, spec);
	const auto table = csv::read_file(path);
	const auto c_date = table.column("date", path);
	const auto c_hour = table.column("hour", path);
	const auto c_col = table.column("column", path);
	const auto c_coef = table.column("coef", path);
	const auto c_std = table.column("coef_std", path);
	const auto c_x = table.column("x_std", path);
	std::vector<HistoryRow> rows;
	rows.reserve(table.rows.size());
	for (std::size_t r = 0; r < table.rows.size(); ++r) {
		const auto &row = table.rows[r];
		const auto ctx = path + ":" + std::to_string(r + 2);
		HistoryRow h;
		h.day = DayDate::parse(row[c_date]);
		if (h.day < plan.oos_start || h.day > plan.oos_end) {
			continue;
		}
		h.hour = csv::to_int(row[c_hour], ctx);
		h.column = row[c_col];
		h.coef = csv::to_double(row[c_coef], ctx);
		h.coef_std = csv::to_double(row[c_std], ctx);
		h.x_std = csv::to_double(row[c_x], ctx);
		rows.push_back(std::move(h));
	}
	return rows;
}

const SpecErrors *benchmark_of(const std::vector<SpecErrors> &all, const ModelSpec &spec) {
	for (const auto &e : all) {
		if (e.spec == spec.benchmark()) {
			return &e;
		}
	}
	return nullptr;
}

std::vector<SpecErrors> read_all_errors(const RunConfig &config, const Plan &plan) {
	std::vector<SpecErrors> all;
	for (const auto &spec : plan.specs) {
		all.push_back(read_errors(config, plan, spec));
	}
	return all;
}

void evaluate(const RunConfig &config, const Plan &plan, const PipelineOptions &options) {
	const auto all = read_all_errors(config, plan);
	const fs::path dir = fs::path(config.output_dir) / "reports";

	std::string rmse = "spec,base,postproc,varset,grid,days,rmse,benchmark_rmse,pct_change\n";
	std::string hourly = "spec,hour,rmse,benchmark_rmse,pct_change\n";
	for (const auto &e : all) {
		const auto *b = e.spec.is_benchmark() ? nullptr : benchmark_of(all, e.spec);
		rmse += e.spec.name() + "," + to_string(e.spec.base) + "," +
		        (e.spec.is_benchmark() ? "" : to_string(*e.spec.postproc)) + "," +
		        (e.spec.is_benchmark() ? "" : e.spec.varset->label) + "," +
		        (e.spec.is_benchmark() ? "" : to_string(*e.spec.grid)) + "," + std::to_string(e.errors.rows()) + "," +
		        fmt(e.rmse) + "," + (b ? fmt(b->rmse) : "") + "," + (b ? fmt(pct_change(e.rmse, b->rmse)) : "") +
		        "\n";
		const auto rh = rmse_by_hour(e.errors);
		const Eigen::VectorXd bh = b ? rmse_by_hour(b->errors) : Eigen::VectorXd();
		for (int h = 0; h < kHoursPerDay; ++h) {
			hourly += e.spec.name() + "," + std::to_string(h + 1) + "," + fmt(rh(h)) + "," + (b ? fmt(bh(h)) : "") +
			          "," + (b ? fmt(pct_change(rh(h), bh(h))) : "") + "\n";
		}
	}
	write_text(dir / "rmse.csv", rmse);
	write_text(dir / "hourly_pctchng.csv", hourly);

	std::string cpa = "x,y,statistic,phi0,phi1,p_two_sided,p_one_sided,degenerate\n";
	if (plan.oos_end - plan.oos_start + 1 >= 30) {
		for (const auto &a : all) {
			for (const auto &b : all) {
				if (&a == &b) {
					continue;
				}
				const auto r = cpa_test({a.daily.data(), static_cast<std::size_t>(a.daily.size())},
				                        {b.daily.data(), static_cast<std::size_t>(b.daily.size())});
				cpa += a.spec.name() + "," + b.spec.name() + "," + fmt(r.statistic) + "," + fmt(r.phi(0)) + "," +
				       fmt(r.phi(1)) + "," + fmt(r.p_value) + "," + fmt(r.p_one_sided) + "," +
				       (r.degenerate ? "1" : "0") + "\n";
			}
		}
	} else {
		logger(options) << "evaluate: fewer than 30 out-of-sample days, CPA test skipped\n";
	}
	write_text(dir / "cpa.csv", cpa);

	std::string selection = "spec,variable,tau,hour,percent\n";
	std::string impact = "spec,hour,group,n_columns,signed_mean,absolute_mean\n";
	ImpactOptions io{config.impact_lower_tail, config.impact_upper_tail};
	for (const auto &spec : plan.specs) {
		const auto history = read_history(config, plan, spec);
		std::unique_ptr<ProbGrid> grid;
		if (!spec.is_benchmark()) {
			grid = std::make_unique<ProbGrid>(make_grid(*spec.grid, config.postproc_window));
		}
		const auto layout = make_layout(spec, grid.get(), 1);
		if (!spec.is_benchmark()) {
			const auto freq = selection_frequency(history);
			for (auto var : spec.varset->members) {
				for (double tau : grid->levels) {
					for (int h = 1; h <= kHoursPerDay; ++h) {
						const auto it = freq.find({to_string(var), tau, h});
						selection += spec.name() + "," + to_string(var) + "," + fmt(tau) + "," + std::to_string(h) +
						             "," + fmt(it == freq.end() ? 0.0 : it->second) + "\n";
					}
				}
			}
		}
		for (const auto &row : group_impact(history, layout, io)) {
			impact += spec.name() + "," + std::to_string(row.hour) + "," + row.group + "," +
			          std::to_string(row.n_columns) + "," + fmt(row.signed_mean) + "," + fmt(row.absolute_mean) + "\n";
		}
	}
	write_text(dir / "selection_frequency.csv", selection);
	write_text(dir / "impact.csv", impact);
	logger(options) << "evaluate: wrote " << (dir / "rmse.csv").string() << " and companions\n";
}

void report(const RunConfig &config, const Plan &plan, const PipelineOptions &options) {
	const auto all = read_all_errors(config, plan);
	const fs::path dir = fs::path(config.output_dir) / "reports";
	const GridLabel labels[] = {GridLabel::T5,  GridLabel::T7,   GridLabel::T11, GridLabel::T21,
	                            GridLabel::T51, GridLabel::T101, GridLabel::T201};

	// appendix layout: one row per base-post^set, one (rmse, pct) pair per grid
	std::vector<std::string> row_order;
	std::map<std::string, std::map<GridLabel, const SpecErrors *>> cells;
	std::set<GridLabel> used;
	for (const auto &e : all) {
		if (e.spec.is_benchmark()) {
			continue;
		}
		auto row_spec = e.spec;
		auto row = row_spec.name();
		row = row.substr(0, row.rfind("_T"));
		if (!cells.count(row)) {
			row_order.push_back(row);
		}
		cells[row][*e.spec.grid] = &e;
		used.insert(*e.spec.grid);
	}
	std::string table = "model";
	for (auto g : labels) {
		if (used.count(g)) {
			table += "," + to_string(g) + "_rmse," + to_string(g) + "_pctchng";
		}
	}
	table += ",benchmark_rmse\n";
	for (const auto &e : all) {
		if (e.spec.is_benchmark()) {
			table += e.spec.name();
			for (auto g : labels) {
				if (used.count(g)) {
					table += ",,";
				}
			}
			table += "," + fmt(e.rmse) + "\n";
		}
	}
	for (const auto &row : row_order) {
		table += row;
		const SpecErrors *bench = nullptr;
		for (auto g : labels) {
			if (!used.count(g)) {
				continue;
			}
			const auto it = cells[row].find(g);
			if (it == cells[row].end()) {
				table += ",,";
				continue;
			}
			const auto *b = benchmark_of(all, it->second->spec);
			bench = b;
			table += "," + fmt(it->second->rmse) + "," + (b ? fmt(pct_change(it->second->rmse, b->rmse)) : "");
		}
		table += "," + (bench ? fmt(bench->rmse) : "") + "\n";
	}
	write_text(dir / "appendix_table.csv", table);

	nlohmann::json summary;
	summary["oos_start"] = plan.oos_start.iso();
	summary["oos_end"] = plan.oos_end.iso();
	summary["days"] = plan.oos_end - plan.oos_start + 1;
	summary["postproc_window"] = config.postproc_window;
	summary["price_window"] = config.price_window;
	summary["seed"] = config.seed;
	summary["specs"] = nlohmann::json::array();
	for (const auto &e : all) {
		nlohmann::json s;
		s["name"] = e.spec.name();
		s["rmse"] = e.rmse;
		if (const auto *b = e.spec.is_benchmark() ? nullptr : benchmark_of(all, e.spec)) {
			s["benchmark"] = b->spec.name();
			s["pct_change"] = pct_change(e.rmse, b->rmse);
		}
		summary["specs"].push_back(std::move(s));
	}
	write_text(dir / "summary.json", summary.dump(1) + "\n");

	auto &log = logger(options);
	for (const auto &e : all) {
		const auto *b = e.spec.is_benchmark() ? nullptr : benchmark_of(all, e.spec);
		log << std::left << std::setw(34) << e.spec.name() << " RMSE " << std::fixed << std::setprecision(3) << e.rmse;
		if (b) {
			log << "  %chng " << std::showpos << pct_change(e.rmse, b->rmse) << std::noshowpos;
		}
		log << std::defaultfloat << "\n";
	}
}

void run_one(Stage stage, const RunConfig &config, const Dataset &ds, const Plan &plan,
             const PipelineOptions &options) {
	switch (stage) {
	case Stage::Ingest:
		write_dataset(ds, (fs::path(config.output_dir) / "data").string());
		write_text(fs::path(config.output_dir) / "config.json", to_json(config).dump(1) + "\n");
		logger(options) << "ingest: " << ds.data.price.n_days() << " price days " << ds.data.price.first_day().iso()
		                << " .. " << ds.data.price.last_day().iso() << "\n";
		break;
	case Stage::Postprocess:
		obtain_surfaces(config, ds, plan, options, true);
		break;
	case Stage::Backtest: {
		const auto surfaces = obtain_surfaces(config, ds, plan, options, false);
		for (const auto &spec : plan.specs) {
			backtest_spec(config, ds, plan, spec, surfaces, options);
		}
		break;
	}
	case Stage::Evaluate:
		evaluate(config, plan, options);
		break;
	case Stage::Report:
		report(config, plan, options);
		break;
	case Stage::Run:
		break;
	}
}

} // namespace

Plan run_stage(Stage stage, const RunConfig &config, const PipelineOptions &options) {
	Dataset ds;
	Plan plan;
	const Stage tag = stage == Stage::Run ? Stage::Ingest : stage;
	try {
		validate(config);
		ds = load_dataset(config);
		plan = make_plan(config, ds);
	} catch (const std::exception &e) {
		throw StageError(tag, e.what());
	}
	auto &log = logger(options);
	log << "plan: " << plan.specs.size() << " spec(s), out-of-sample " << plan.oos_start.iso() << " .. "
	    << plan.oos_end.iso() << " (" << (plan.oos_end - plan.oos_start + 1) << " days), " << plan.surfaces.size()
	    << " surface(s)\n";
	if (options.dry_run) {
		for (const auto &spec : plan.specs) {
			log << "  " << spec.name() << ": " << column_count(spec) << " columns\n";
		}
		return plan;
	}
	const std::vector<Stage> stages = stage == Stage::Run
	                                      ? std::vector<Stage>{Stage::Ingest, Stage::Backtest, Stage::Evaluate,
	                                                           Stage::Report}
	                                      : std::vector<Stage>{stage};
	for (auto s : stages) {
		try {
			run_one(s, config, ds, plan, options);
		} catch (const StageError &) {
			throw;
		} catch (const std::exception &e) {
			throw StageError(s, e.what());
		}
	}
	return plan;
}

} // namespace epfq
