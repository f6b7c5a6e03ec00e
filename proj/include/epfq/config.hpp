#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "epfq/day_date.hpp"
#include "epfq/postproc.hpp"

namespace epfq {

/// Where the input series come from: CSV files or the synthetic market.
struct DataSource {
	// CSV paths (hourly date,hour,value or quarter-hourly date,hour,quarter,value; commodities date,coal,gas,oil,eua)
	std::string price, load_fc, solar_fc, wind_fc, load, solar, wind, commodities;
	// synthetic market, used when `synthetic` is set
	bool synthetic = false;
	std::uint64_t synthetic_seed = 0;
	int synthetic_days = 1100;
	DayDate synthetic_start = DayDate::from_ymd(2015, 1, 1);
};

struct RunConfig {
	DataSource data;
	int postproc_window = 364; ///< N
	int price_window = 728;    ///< W
	std::optional<DayDate> oos_start;
	std::optional<DayDate> oos_end;
	std::vector<std::string> specs{"Expert", "HLM"};
	GridLabel default_grid = GridLabel::T201;
	std::uint64_t seed = 0;
	std::string output_dir = "epfq_out";
	int threads = 1;
	int cv_folds = 7;
	int lambda_count = 100;
	double lambda_min_ratio = 1e-4;
	double impact_lower_tail = 0.1;
	double impact_upper_tail = 0.9;
};

/// Thrown for schema violations; what() lists every offending field.
class ConfigError : public std::runtime_error {
public:
	explicit ConfigError(const std::vector<std::string> &problems);
	const std::vector<std::string> &problems() const { return problems_; }

private:
	std::vector<std::string> problems_;
};

/// Parses and validates a JSON document. Missing keys take the defaults above; unknown keys,
/// wrong types and out-of-range values are errors. Relative data paths resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json &doc, const std::string &base_dir = {});
RunConfig parse_config_file(const std::string &path);
RunConfig parse_config_text(const std::string &text, const std::string &base_dir = {});

/// Applies EPFQ_SEED, EPFQ_THREADS, EPFQ_OUTPUT_DIR, EPFQ_POSTPROC_WINDOW and EPFQ_PRICE_WINDOW.
/// `getenv` is injectable for tests.
void apply_env_overrides(RunConfig &config,
                         const std::function<const char *(const char *)> &getenv = [](const char *name) {
	                         return std::getenv(name);
                         });

/// Re-checks the invariants (N >= 30, W >= N, specs parse, ...) after overrides.
void validate(const RunConfig &config);

nlohmann::json to_json(const RunConfig &config);

} // namespace epfq
