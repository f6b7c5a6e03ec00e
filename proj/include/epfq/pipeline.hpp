#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "epfq/config.hpp"
#include "epfq/models.hpp"

namespace epfq {

/// Prices, point forecasts, commodities and the actuals the postprocessing calibrates on.
struct Dataset {
	MarketData data;
	HourlyPanel load;
	HourlyPanel solar;
	HourlyPanel wind;
};

/// Reads the configured CSV files (normalizing DST and quarter-hours) or generates the synthetic market.
Dataset load_dataset(const RunConfig &config);
/// Canonical hourly CSVs: price, load_fc, solar_fc, wind_fc, load, solar, wind, commodities.
void write_dataset(const Dataset &dataset, const std::string &dir);

/// Forecast panel and actuals of one fundamental, with the derived RES and ResLoad.
struct FundamentalPair {
	HourlyPanel forecast;
	HourlyPanel actual;
};
FundamentalPair fundamental_series(const Dataset &dataset, Fundamental variable);

struct SurfaceKey {
	Fundamental variable = Fundamental::Load;
	Method method = Method::HS;
	GridLabel grid = GridLabel::T5;
	auto operator<=>(const SurfaceKey &) const = default;
};

std::string to_string(const SurfaceKey &key);

/// What a run will compute.
struct Plan {
	std::vector<ModelSpec> specs;
	DayDate oos_start;
	DayDate oos_end;
	DayDate surface_start; ///< first day quantile inputs are needed (oos_start - W)
	std::vector<SurfaceKey> surfaces;
};

/// Resolves specs and the out-of-sample range against the data; throws std::runtime_error
/// when the requested range is infeasible.
Plan make_plan(const RunConfig &config, const Dataset &dataset);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const void *data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL);

/// Binary surface file: magic, header fields, levels, values, untrained flags.
void write_surface_binary(const QuantileSurface &surface, const std::string &path);
QuantileSurface read_surface_binary(const std::string &path);

enum class Stage { Ingest, Postprocess, Backtest, Evaluate, Report, Run };

std::string to_string(Stage stage);

/// Error raised inside a stage; what() is prefixed with "[stage]".
class StageError : public std::runtime_error {
public:
	StageError(Stage stage, const std::string &message);
	Stage stage() const { return stage_; }

private:
	Stage stage_;
};

struct PipelineOptions {
	bool resume = false;  ///< keep whole days already written and continue after them
	bool dry_run = false; ///< validate config, data and plan; fit nothing
	std::ostream *log = nullptr;
};

/// Runs one stage (Run = all stages in order) and writes its outputs under config.output_dir.
/// Returns the plan that was executed.
Plan run_stage(Stage stage, const RunConfig &config, const PipelineOptions &options = {});

/// Output locations relative to the output directory.
std::string forecast_path(const RunConfig &config, const ModelSpec &spec);
std::string history_path(const RunConfig &config, const ModelSpec &spec);

} // namespace epfq
