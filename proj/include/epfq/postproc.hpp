#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "epfq/panel.hpp"

namespace epfq {

enum class GridLabel { T5, T7, T11, T21, T51, T101, T201 };

GridLabel parse_grid_label(std::string_view label);
std::string to_string(GridLabel label);
int grid_size(GridLabel label);

/// Probability levels {gamma, interior..., 1 - gamma} with gamma = 1 / (2N).
struct ProbGrid {
	GridLabel label = GridLabel::T5;
	int window = 0;
	double gamma = 0.0;
	std::vector<double> levels;

	std::size_t size() const { return levels.size(); }
	bool operator==(const ProbGrid &) const = default;
};

/// Throws std::invalid_argument when N < 2 or gamma does not sit below the first interior level.
ProbGrid make_grid(GridLabel label, int window);

/// Compact decimal form used in column names, e.g. "0.005" or "0.00137363".
std::string format_level(double tau);

enum class Fundamental { Load, Solar, Wind, RES, ResLoad };

std::string to_string(Fundamental var);
Fundamental parse_fundamental(std::string_view name);
/// Load, Solar, Wind and RES cannot be negative; ResLoad can.
constexpr bool is_nonnegative(Fundamental var) { return var != Fundamental::ResLoad; }

enum class Method { HS, QR, ReLU };

std::string to_string(Method method);
Method parse_method(std::string_view name);

/// Check-function loss QL_tau(q, x) = (1{x < q} - tau)(q - x).
inline double pinball_loss(double q, double x, double tau) {
	return ((x < q ? 1.0 : 0.0) - tau) * (q - x);
}

/// Linear interpolation between order statistics at rank (n - 1) tau + 1.
double empirical_quantile(std::span<const double> sample, double tau);
/// Same estimator on an ascending sample; no copy.
double quantile_of_sorted(std::span<const double> sorted, double tau);

/// Point forecast plus empirical error quantiles. A 30-day window [d - 30, d - 2] holds
/// 29 errors, the fewest accepted.
Eigen::VectorXd hs_forecast(double point_fc, std::span<const double> error_window, const ProbGrid &grid);

inline constexpr std::size_t kMinQuantileWindow = 30;

struct QrFit {
	double intercept = 0.0;
	double slope = 0.0;
	double objective = 0.0;
	/// Regressor had no spread; intercept is the empirical quantile and slope is 0.
	bool degenerate = false;
};

/// Sum of check losses of the line intercept + slope * xhat against x.
double qr_objective(std::span<const double> xhat, std::span<const double> x, double tau, double intercept,
                    double slope);

/// Exact two-parameter linear quantile regression of x on xhat (any n >= 2).
///
/// The minimum of the check objective is attained by a line through two sample points.
/// Starting from a pivot point, the solver repeatedly finds the best line through the
/// current pivot (a weighted quantile of the pairwise slopes) and moves the pivot to the
/// newly interpolated point. It stops once no rotation around any interpolated point
/// lowers the objective, which certifies a global minimum of the convex objective.
/// `warm` seeds the first pivot with the point closest to a previous solution.
QrFit solve_qr_exact(std::span<const double> xhat, std::span<const double> x, double tau,
                     const QrFit *warm = nullptr);

/// solve_qr_exact with the production precondition of at least 10 pairs.
QrFit fit_qr(std::span<const double> xhat, std::span<const double> x, double tau, const QrFit *warm = nullptr);

/// One fitted line per grid level, forecast at `point_fc` and sorted.
Eigen::VectorXd qr_forecast(std::span<const QrFit> coeffs, double point_fc);

/// max{point_fc, empirical tau-quantile of past point forecasts} per level.
Eigen::VectorXd relu_transform(double point_fc, std::span<const double> forecast_window, const ProbGrid &grid);

/// Sorts ascending (quantile rearrangement).
Eigen::VectorXd rearrange(Eigen::VectorXd values);

/// Quantile inputs for one fundamental on one grid: one |grid|-vector per (day, hour).
class QuantileSurface {
public:
	using Storage = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

	QuantileSurface() = default;
	QuantileSurface(Fundamental variable, Method method, ProbGrid grid, DayDate first_day, int n_days);

	Fundamental variable() const { return variable_; }
	Method method() const { return method_; }
	const ProbGrid &grid() const { return grid_; }
	DayDate first_day() const { return first_day_; }
	DayDate last_day() const { return first_day_ + n_days_ - 1; }
	int n_days() const { return n_days_; }
	bool contains(DayDate day) const { return day >= first_day_ && day <= last_day(); }

	auto quantiles(DayDate day, int hour) const { return values_.row(slot(day, hour)); }
	auto quantiles(DayDate day, int hour) { return values_.row(slot(day, hour)); }
	/// Solar slots with a zero point forecast carry zeros and no fitted distribution.
	bool untrained(DayDate day, int hour) const { return untrained_[static_cast<std::size_t>(slot(day, hour))] != 0; }
	void set_untrained(DayDate day, int hour, bool flag) {
		untrained_[static_cast<std::size_t>(slot(day, hour))] = flag ? 1 : 0;
	}

	const Storage &values() const { return values_; }
	Storage &values() { return values_; }
	const std::vector<std::uint8_t> &untrained_flags() const { return untrained_; }
	std::vector<std::uint8_t> &untrained_flags() { return untrained_; }

private:
	Eigen::Index slot(DayDate day, int hour) const;

	Fundamental variable_ = Fundamental::Load;
	Method method_ = Method::HS;
	ProbGrid grid_;
	DayDate first_day_;
	int n_days_ = 0;
	Storage values_;
	std::vector<std::uint8_t> untrained_;
};

/// Builds the surface for every day d with a full history: HS and QR calibrate on
/// actuals over [d - N, d - 2]; ReLU uses forecasts over [d - N, d - 1]. Outputs are
/// sorted, and nonnegative variables are truncated at zero afterwards.
/// `first`/`last` restrict the output range (defaults: first feasible day, last forecast day).
QuantileSurface build_surface(Fundamental variable, const HourlyPanel &point_fc, const HourlyPanel &actual,
                              Method method, const ProbGrid &grid, int window);
QuantileSurface build_surface(Fundamental variable, const HourlyPanel &point_fc, const HourlyPanel &actual,
                              Method method, const ProbGrid &grid, int window, DayDate first, DayDate last);

/// Long format: date,hour,tau,value,method,variable.
void write_surface_csv(const QuantileSurface &surface, std::ostream &out);

} // namespace epfq
