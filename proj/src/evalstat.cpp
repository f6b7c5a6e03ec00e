#include "epfq/evalstat.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/LU>

namespace epfq {

double rmse_daily(std::span<const double> errors) {
	if (errors.size() != kHoursPerDay) {
		throw std::invalid_argument("daily RMSE needs 24 errors, got " + std::to_string(errors.size()));
	}
	double s = 0.0;
	for (double e : errors) {
		if (!std::isfinite(e)) {
			throw std::invalid_argument("daily RMSE: non-finite error");
		}
		s += e * e;
	}
	return std::sqrt(s / kHoursPerDay);
}

double rmse_aggregate(std::span<const double> daily_rmse) {
	if (daily_rmse.empty()) {
		throw std::invalid_argument("aggregate RMSE of an empty loss series");
	}
	double s = 0.0;
	for (double r : daily_rmse) {
		s += r * r;
	}
	return std::sqrt(s / static_cast<double>(daily_rmse.size()));
}

Eigen::VectorXd rmse_by_day(const Eigen::MatrixXd &errors) {
	if (errors.cols() != kHoursPerDay || !errors.allFinite()) {
		throw std::invalid_argument("errors must be a finite days x 24 matrix");
	}
	return errors.rowwise().squaredNorm().cwiseQuotient(Eigen::VectorXd::Constant(errors.rows(), kHoursPerDay))
	    .cwiseSqrt();
}

Eigen::VectorXd rmse_by_hour(const Eigen::MatrixXd &errors) {
	if (errors.cols() != kHoursPerDay || errors.rows() == 0 || !errors.allFinite()) {
		throw std::invalid_argument("errors must be a finite, non-empty days x 24 matrix");
	}
	return (errors.colwise().squaredNorm().transpose() / static_cast<double>(errors.rows())).cwiseSqrt();
}

double pct_change(double rmse_a, double rmse_b) {
	if (!(rmse_a > 0.0) || !(rmse_b > 0.0)) {
		throw std::invalid_argument("percentage change needs positive RMSEs");
	}
	return 100.0 * std::log(rmse_a / rmse_b);
}

Eigen::VectorXd pct_change_hourly(const Eigen::MatrixXd &errors_a, const Eigen::MatrixXd &errors_b) {
	if (errors_a.rows() != errors_b.rows()) {
		throw std::invalid_argument("error matrices cover different day counts");
	}
	const auto a = rmse_by_hour(errors_a);
	const auto b = rmse_by_hour(errors_b);
	Eigen::VectorXd out(kHoursPerDay);
	for (int h = 0; h < kHoursPerDay; ++h) {
		out(h) = pct_change(a(h), b(h));
	}
	return out;
}

CpaResult cpa_test(std::span<const double> loss_a, std::span<const double> loss_b) {
	if (loss_a.size() != loss_b.size()) {
		throw std::invalid_argument("CPA test: loss series differ in length");
	}
	if (loss_a.size() < 30) {
		throw std::invalid_argument("CPA test needs at least 30 days, got " + std::to_string(loss_a.size()));
	}
	const auto days = static_cast<Eigen::Index>(loss_a.size());
	Eigen::VectorXd delta(days);
	for (Eigen::Index d = 0; d < days; ++d) {
		delta(d) = loss_a[static_cast<std::size_t>(d)] - loss_b[static_cast<std::size_t>(d)];
	}
	if (!delta.allFinite()) {
		throw std::invalid_argument("CPA test: non-finite losses");
	}
	CpaResult r;
	r.n = static_cast<int>(days - 1);
	r.mean_delta = delta.mean();
	const double spread = (delta.array() - r.mean_delta).abs().maxCoeff();
	if (!(spread > 1e-12 * (1.0 + std::abs(r.mean_delta)))) {
		r.degenerate = true;
		return r;
	}
	const Eigen::Index n = days - 1;
	Eigen::MatrixXd H(n, 2);
	H.col(0).setOnes();
	H.col(1) = delta.head(n);
	const Eigen::VectorXd y = delta.tail(n);
	const Eigen::Matrix2d HtH = H.transpose() * H;
	const Eigen::FullPivLU<Eigen::Matrix2d> lu(HtH);
	if (!lu.isInvertible()) {
		r.degenerate = true;
		return r;
	}
	r.phi = lu.solve(H.transpose() * y);
	const Eigen::VectorXd e = y - H * r.phi;
	const Eigen::Matrix2d meat = H.transpose() * e.array().square().matrix().asDiagonal() * H;
	const Eigen::Matrix2d bread = lu.inverse();
	const Eigen::Matrix2d V = bread * meat * bread;
	const Eigen::FullPivLU<Eigen::Matrix2d> vlu(V);
	if (!vlu.isInvertible()) {
		r.degenerate = true;
		return r;
	}
	r.statistic = std::max(0.0, r.phi.dot(vlu.solve(r.phi)));
	// chi^2 with 2 degrees of freedom: survival function exp(-x / 2)
	r.p_value = std::exp(-0.5 * r.statistic);
	r.p_one_sided = r.mean_delta < 0.0 ? 0.5 * r.p_value : 1.0 - 0.5 * r.p_value;
	return r;
}

std::vector<HistoryRow> history_rows(const DayResult &day) {
	std::vector<HistoryRow> rows;
	for (const auto &f : day.fits) {
		const auto &st = f.fit.standardizer;
		rows.push_back({day.day, f.hour, kInterceptColumn, f.fit.intercept, st.y_mean / st.y_scale, 1.0});
		for (auto j : f.fit.active) {
			rows.push_back({day.day, f.hour, f.fit.names[static_cast<std::size_t>(j)], f.fit.coef(j),
			                f.fit.coef_std(j), f.x_std(j)});
		}
	}
	return rows;
}

std::optional<std::pair<std::string, double>> parse_quantile_column(const std::string &name) {
	const auto pos = name.rfind("_q");
	if (pos == std::string::npos || pos == 0) {
		return std::nullopt;
	}
	try {
		std::size_t used = 0;
		const std::string tail = name.substr(pos + 2);
		const double tau = std::stod(tail, &used);
		if (used != tail.size() || !(tau > 0.0 && tau < 1.0)) {
			return std::nullopt;
		}
		return std::make_pair(name.substr(0, pos), tau);
	} catch (const std::exception &) {
		return std::nullopt;
	}
}

SelectionMap selection_frequency(const std::vector<HistoryRow> &history, const std::optional<std::string> &variable) {
	std::map<int, std::set<DayDate>> fitted; // hour -> days
	std::map<std::tuple<std::string, double, int>, std::set<DayDate>> selected;
	for (const auto &row : history) {
		if (row.column == kInterceptColumn) {
			fitted[row.hour].insert(row.day);
			continue;
		}
		const auto q = parse_quantile_column(row.column);
		if (!q || (variable && q->first != *variable) || row.coef == 0.0) {
			continue;
		}
		selected[{q->first, q->second, row.hour}].insert(row.day);
	}
	SelectionMap out;
	for (const auto &[key, days] : selected) {
		const auto it = fitted.find(std::get<2>(key));
		if (it == fitted.end() || it->second.empty()) {
			throw std::invalid_argument("fit history lacks intercept rows for hour " + std::to_string(std::get<2>(key)));
		}
		out[key] = 100.0 * static_cast<double>(days.size()) / static_cast<double>(it->second.size());
	}
	return out;
}

namespace {

constexpr double kTailSlack = 1e-12;

std::string tail_of(double tau, const ImpactOptions &options) {
	if (tau <= options.lower_tail + kTailSlack) {
		return "lower";
	}
	if (tau >= options.upper_tail - kTailSlack) {
		return "upper";
	}
	return "middle";
}

} // namespace

TailCounts tail_counts(const ProbGrid &grid, const ImpactOptions &options) {
	TailCounts c;
	for (double tau : grid.levels) {
		const auto t = tail_of(tau, options);
		(t == "lower" ? c.lower : t == "upper" ? c.upper : c.middle) += 1;
	}
	return c;
}

std::vector<ImpactRow> group_impact(const std::vector<HistoryRow> &history, const std::vector<ColumnInfo> &columns,
                                    const ImpactOptions &options) {
	std::unordered_map<std::string, const ColumnInfo *> by_name;
	for (const auto &c : columns) {
		by_name.emplace(c.name, &c);
	}
	// group names and their column counts, in a stable order
	std::map<std::string, int> members;
	const std::string calendar = to_string(ColumnGroup::Calendar);
	for (const auto &c : columns) {
		const auto g = to_string(c.group);
		members[g] += 1;
		if (c.is_quantile()) {
			members[g + ":" + tail_of(*c.tau, options)] += 1;
		}
	}
	members[calendar] += 0;

	// (hour, group) -> day -> contribution
	std::map<std::pair<int, std::string>, std::map<DayDate, double>> sums;
	std::map<int, std::set<DayDate>> fitted;
	for (const auto &row : history) {
		if (row.column == kInterceptColumn) {
			fitted[row.hour].insert(row.day);
			sums[{row.hour, calendar}][row.day] += row.coef_std * row.x_std;
			continue;
		}
		const auto it = by_name.find(row.column);
		if (it == by_name.end()) {
			throw std::invalid_argument("fit history column '" + row.column + "' is not in the model layout");
		}
		const auto &c = *it->second;
		const double v = row.coef_std * row.x_std;
		sums[{row.hour, to_string(c.group)}][row.day] += v;
		if (c.is_quantile()) {
			sums[{row.hour, to_string(c.group) + ":" + tail_of(*c.tau, options)}][row.day] += v;
		}
	}
	std::vector<ImpactRow> out;
	for (const auto &[hour, days] : fitted) {
		const double n = static_cast<double>(days.size());
		for (const auto &[group, count] : members) {
			ImpactRow r;
			r.hour = hour;
			r.group = group;
			r.n_columns = count;
			const auto it = sums.find({hour, group});
			if (it != sums.end()) {
				for (const auto &[day, v] : it->second) {
					r.signed_mean += v;
					r.absolute_mean += std::abs(v);
				}
			}
			r.signed_mean /= n;
			r.absolute_mean /= n;
			out.push_back(r);
		}
	}
	return out;
}

MeritCurve::MeritCurve(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
	if (x_.size() < 2 || x_.size() != y_.size()) {
		throw std::invalid_argument("merit curve needs at least two knots with matching coordinates");
	}
	for (std::size_t i = 1; i < x_.size(); ++i) {
		if (!(x_[i] > x_[i - 1])) {
			throw std::invalid_argument("merit curve knots must be strictly increasing in load");
		}
		if (y_[i] < y_[i - 1]) {
			throw std::invalid_argument("merit curve must be nondecreasing");
		}
	}
}

double MeritCurve::operator()(double load) const {
	std::size_t i = 1;
	while (i + 1 < x_.size() && load > x_[i]) {
		++i;
	}
	const double slope = (y_[i] - y_[i - 1]) / (x_[i] - x_[i - 1]);
	return y_[i - 1] + slope * (load - x_[i - 1]);
}

bool MeritCurve::convex() const {
	double prev = -INFINITY;
	for (std::size_t i = 1; i < x_.size(); ++i) {
		const double slope = (y_[i] - y_[i - 1]) / (x_[i] - x_[i - 1]);
		if (slope < prev) {
			return false;
		}
		prev = slope;
	}
	return true;
}

JensenGap jensen_gap(const MeritCurve &curve, const DiscreteDensity &density) {
	if (density.support.empty() || density.support.size() != density.prob.size()) {
		throw std::invalid_argument("density needs matching, non-empty support and probabilities");
	}
	double total = 0.0;
	double mean = 0.0;
	double mean_mo = 0.0;
	for (std::size_t i = 0; i < density.support.size(); ++i) {
		const double p = density.prob[i];
		if (!(p >= 0.0)) {
			throw std::invalid_argument("density probabilities must be nonnegative");
		}
		total += p;
		mean += p * density.support[i];
		mean_mo += p * curve(density.support[i]);
	}
	if (std::abs(total - 1.0) > 1e-9) {
		throw std::invalid_argument("density probabilities must sum to 1");
	}
	return {curve(mean), mean_mo};
}

MeritCurve demo_merit_curve() {
	return MeritCurve({0, 10, 20, 25, 30, 35, 40, 45, 50}, {0, 20, 45, 65, 92, 150, 260, 420, 640});
}

DiscreteDensity demo_density() {
	DiscreteDensity d;
	double total = 0.0;
	for (int gw = 12; gw <= 48; ++gw) {
		const double z = (gw - 30.0) / 7.0;
		d.support.push_back(gw);
		d.prob.push_back(std::exp(-0.5 * z * z));
		total += d.prob.back();
	}
	for (double &p : d.prob) {
		p /= total;
	}
	return d;
}

} // namespace epfq
