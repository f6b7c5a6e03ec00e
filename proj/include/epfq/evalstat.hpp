#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "epfq/models.hpp"

namespace epfq {

/// sqrt of the mean squared error over the 24 hours of one day.
double rmse_daily(std::span<const double> errors);
/// sqrt(mean_d RMSE_d^2); equal to the RMSE pooled over all hourly errors.
double rmse_aggregate(std::span<const double> daily_rmse);

/// Errors as a days x 24 matrix; per-day RMSE series.
Eigen::VectorXd rmse_by_day(const Eigen::MatrixXd &errors);
/// Per-hour RMSE over the days (1/D normalization).
Eigen::VectorXd rmse_by_hour(const Eigen::MatrixXd &errors);
/// 100 ln(RMSE_A / RMSE_B).
double pct_change(double rmse_a, double rmse_b);
/// Per-hour 100 ln(RMSE_h^A / RMSE_h^B).
Eigen::VectorXd pct_change_hourly(const Eigen::MatrixXd &errors_a, const Eigen::MatrixXd &errors_b);

struct CpaResult {
	double statistic = 0.0;
	double p_value = 1.0;       ///< two-sided, H0: phi = 0
	double p_one_sided = 1.0;   ///< small only when A has the lower mean loss
	Eigen::Vector2d phi = Eigen::Vector2d::Zero();
	int n = 0;                  ///< regression observations (days - 1)
	double mean_delta = 0.0;
	bool degenerate = false;
};

/// Conditional predictive ability test on daily losses: Delta_d = loss_A - loss_B is regressed
/// on (1, Delta_{d-1}); Wald statistic with the heteroskedasticity-robust covariance, chi^2(2).
/// Requires at least 30 aligned days.
CpaResult cpa_test(std::span<const double> loss_a, std::span<const double> loss_b);

/// One recorded coefficient of one (day, hour) fit. Every fit also records a row named
/// kInterceptColumn (coef = intercept, coef_std = mean(y)/sd(y), x_std = 1), so the history
/// lists every fitted (day, hour) even when no regressor is active.
struct HistoryRow {
	DayDate day;
	int hour = 1;
	std::string column;
	double coef = 0.0;
	double coef_std = 0.0;
	double x_std = 0.0;
};

inline constexpr const char *kInterceptColumn = "(intercept)";

/// Active coefficients of a finished day, plus the intercept rows.
std::vector<HistoryRow> history_rows(const DayResult &day);

/// Splits "{Var}_q{tau}" into (Var, tau); nullopt for other names.
std::optional<std::pair<std::string, double>> parse_quantile_column(const std::string &name);

/// Percentage of fitted days on which each quantile coefficient is nonzero,
/// keyed by (variable, tau, hour). `variable` restricts to one fundamental.
using SelectionMap = std::map<std::tuple<std::string, double, int>, double>;
SelectionMap selection_frequency(const std::vector<HistoryRow> &history,
                                 const std::optional<std::string> &variable = std::nullopt);

struct ImpactOptions {
	double lower_tail = 0.1; ///< tau <= this counts as the lower tail
	double upper_tail = 0.9; ///< tau >= this counts as the upper tail
};

struct ImpactRow {
	int hour = 1;
	std::string group;
	double signed_mean = 0.0;   ///< mean over days of the group's contribution
	double absolute_mean = 0.0; ///< mean over days of its absolute value
	int n_columns = 0;
};

/// Per-hour average contribution sum_j beta_j x_j of each variable group on the standardized scale
/// (target-sd units). The intercept+dummies group includes mean(y)/sd(y). Quantile columns also
/// enter tail sub-groups "{group}:lower", "{group}:middle", "{group}:upper".
/// Throws std::invalid_argument for history columns missing from `columns`.
std::vector<ImpactRow> group_impact(const std::vector<HistoryRow> &history, const std::vector<ColumnInfo> &columns,
                                    const ImpactOptions &options = {});

/// Column counts of the tail sub-groups of one variable's quantile columns.
struct TailCounts {
	int lower = 0;
	int middle = 0;
	int upper = 0;
};
TailCounts tail_counts(const ProbGrid &grid, const ImpactOptions &options = {});

/// Nondecreasing piecewise-linear merit-order curve: residual load (GW) -> price (EUR/MWh),
/// extended linearly beyond the outer knots.
class MeritCurve {
public:
	MeritCurve(std::vector<double> x, std::vector<double> y);
	double operator()(double load) const;
	bool convex() const;
	const std::vector<double> &x() const { return x_; }
	const std::vector<double> &y() const { return y_; }

private:
	std::vector<double> x_;
	std::vector<double> y_;
};

struct DiscreteDensity {
	std::vector<double> support;
	std::vector<double> prob;
};

struct JensenGap {
	double mo_of_mean = 0.0;
	double mean_of_mo = 0.0;
};

/// MO(E[X]) and E[MO(X)] by exact summation.
JensenGap jensen_gap(const MeritCurve &curve, const DiscreteDensity &density);

/// Demo configuration: convex curve with MO(30 GW) = 92 and a discretized Normal(30, 7)
/// residual-load density on 12..48 GW, giving E[MO(X)] of about 122.
MeritCurve demo_merit_curve();
DiscreteDensity demo_density();

} // namespace epfq
