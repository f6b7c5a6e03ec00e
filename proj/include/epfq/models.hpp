#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "epfq/lasso.hpp"
#include "epfq/panel.hpp"
#include "epfq/postproc.hpp"

namespace epfq {

enum class BaseModel { Expert, HLM };

std::string to_string(BaseModel base);

/// One of the seven fundamental-variable sets whose quantile forecasts can enter a model.
struct VariableSet {
	std::string label; ///< "Load", ..., "Load+RES", "Load+Solar+Wind"
	std::vector<Fundamental> members;
	bool operator==(const VariableSet &) const = default;
};

const std::vector<VariableSet> &variable_sets();
/// Accepts a bare label ("ResLoad", "Load+RES") or a brace list in any order ("{RES,Load}").
VariableSet parse_variable_set(std::string_view text);

/// Base model, optionally extended by quantile inputs from one postprocessing method.
/// postproc, varset and grid are all present or all absent.
struct ModelSpec {
	BaseModel base = BaseModel::Expert;
	std::optional<Method> postproc;
	std::optional<VariableSet> varset;
	std::optional<GridLabel> grid;

	bool is_benchmark() const { return !postproc.has_value(); }
	/// "Expert", "HLM-QR^ResLoad_T201", "Expert-HS^{Load,RES}_T21".
	std::string name() const;
	/// File-name form: "HLM-QR_ResLoad_T201", "Expert-HS_Load+RES_T21".
	std::string slug() const;
	/// The benchmark sharing this spec's base.
	ModelSpec benchmark() const { return ModelSpec{base, {}, {}, {}}; }
	bool operator==(const ModelSpec &) const = default;
};

/// Grammar: Base | Base-Post^Set_T{n} | Base-Post^Set (grid taken from `default_grid`).
/// Base in {Expert, HLM}; Post in {HS, QR, ReLU}; Set a label or {A,B,...}.
ModelSpec parse_model_spec(std::string_view text, GridLabel default_grid = GridLabel::T201);

/// The two benchmarks followed by all 2 x 3 x 7 x 7 = 294 extended specs.
std::vector<ModelSpec> all_model_specs();

/// Variable groups used by the impact analysis.
enum class ColumnGroup { Autoregressive, Load, RES, ResLoad, Commodities, Calendar };

std::string to_string(ColumnGroup group);

struct ColumnInfo {
	std::string name;
	ColumnGroup group = ColumnGroup::Autoregressive;
	/// Set for fundamental point-forecast and quantile columns.
	std::optional<Fundamental> variable;
	/// Probability level of a quantile column.
	std::optional<double> tau;
	/// For point-forecast columns: delivery hour (1..24) and day offset (0 = day d, 1 = day d-1).
	int hour = 0;
	int day_lag = 0;

	bool is_quantile() const { return tau.has_value(); }
};

int base_column_count(BaseModel base);
/// base + |set| x |grid|.
int column_count(const ModelSpec &spec);

/// Columns for one delivery hour. Quantile levels come from `grid`, whose label must match the spec.
std::vector<ColumnInfo> make_layout(const ModelSpec &spec, const ProbGrid *grid = nullptr, int hour = 1);

/// Inputs of the price models. Forecast panels are the day-ahead point forecasts.
struct MarketData {
	HourlyPanel price;
	HourlyPanel load_fc;
	HourlyPanel solar_fc;
	HourlyPanel wind_fc;
	CommoditySeries commodities;
};

/// Named values of one (day, hour) regressor row.
struct FeatureRow {
	std::vector<std::string> names;
	Eigen::VectorXd values;
};

FeatureRow expert_row(const MarketData &data, DayDate day, int hour);
FeatureRow hlm_row(const MarketData &data, DayDate day, int hour);

/// Quantile surfaces used by an extended spec, one per member of its variable set, in set order.
using SurfaceRefs = std::vector<const QuantileSurface *>;

/// Appends q_tau(x_{d,h}) for every member and level. Throws std::invalid_argument when the
/// surfaces do not match the spec's variables, method or grid.
FeatureRow extend_row(const FeatureRow &base, const SurfaceRefs &surfaces, const ModelSpec &spec, DayDate day,
                      int hour);

/// Regressor matrix for one delivery hour: row i is day first_day + i.
struct DesignMatrix {
	std::vector<ColumnInfo> columns;
	Eigen::MatrixXd X;
	Eigen::VectorXd y; ///< prices; NaN where the price is not in the data
	DayDate first_day;
	int hour = 1;
	std::vector<std::string> dropped; ///< names removed by apply_solar_exclusion

	int n_days() const { return static_cast<int>(X.rows()); }
	DayDate last_day() const { return first_day + n_days() - 1; }
	std::vector<std::string> names() const;
	/// Rows for days [from, to].
	DesignMatrix slice(DayDate from, DayDate to) const;
};

/// Builds rows for days [first, last] at `hour`. Throws std::out_of_range naming the day
/// when a lag, forecast, close or surface value is unavailable.
DesignMatrix build_design(const MarketData &data, const SurfaceRefs &surfaces, const ModelSpec &spec, int hour,
                          DayDate first, DayDate last);

/// Share of exact zeros at or above which a solar forecast column is excluded: strictly more than 25%.
inline constexpr double kSolarZeroShare = 0.25;

/// Drop mask for solar columns: point-forecast solar columns with a zero share above 25%,
/// and the hour's solar quantile columns whenever the same-hour day-d point column is dropped.
std::vector<bool> solar_exclusion_mask(const DesignMatrix &window);
DesignMatrix apply_solar_exclusion(const DesignMatrix &window);

/// Per-fit fold seed from (run seed, day, hour), via splitmix64.
std::uint64_t derive_seed(std::uint64_t run_seed, DayDate day, int hour);

struct FitOptions {
	int window = 728; ///< calibration days [d - W, d - 1]
	std::uint64_t run_seed = 0;
	lasso::LassoOptions<double> lasso;
	int threads = 1;
};

/// One hour's fitted model for forecast day d and its forecast.
struct HourFit {
	int hour = 1;
	lasso::LassoFit<double> fit;
	std::vector<int> column_index; ///< positions in the full layout of fit's columns
	double forecast = 0.0;
	/// Standardized forecast-day regressors, aligned with fit's columns.
	Eigen::VectorXd x_std;
};

/// Calibrates the 24 hourly models for forecast day d on [d - W, d - 1].
std::vector<HourFit> fit_hour_models(const MarketData &data, const SurfaceRefs &surfaces, const ModelSpec &spec,
                                     DayDate day, const FitOptions &options);

/// Forecasts and fits of one out-of-sample day.
struct DayResult {
	DayDate day;
	std::array<double, kHoursPerDay> forecast{};
	std::array<double, kHoursPerDay> actual{};
	std::vector<HourFit> fits;
};

struct BacktestOptions {
	FitOptions fit;
	/// Days for which this returns true are skipped (resume).
	std::function<bool(DayDate)> skip;
	/// Receives every finished day, in calendar order.
	std::function<void(const DayResult &)> on_day;
	/// Keep DayResult records in the returned report (off for long sweeps writing via on_day).
	bool keep_days = true;
};

struct BacktestReport {
	ModelSpec spec;
	std::vector<ColumnInfo> columns; ///< full layout (hour-1 names for HLM point columns)
	std::vector<DayResult> days;
};

/// Refits every day in [first, last] and records forecasts, coefficients and active sets.
BacktestReport rolling_backtest(const MarketData &data, const SurfaceRefs &surfaces, const ModelSpec &spec,
                                DayDate first, DayDate last, const BacktestOptions &options);

/// Earliest forecast day whose calibration window and lags are covered by the price panel.
DayDate first_forecast_day(const MarketData &data, BaseModel base, int window);

/// Runs f(i) for i in [0, n) on up to `threads` threads. f must be safe to call concurrently.
void parallel_for(int n, int threads, const std::function<void(int)> &f);

} // namespace epfq
