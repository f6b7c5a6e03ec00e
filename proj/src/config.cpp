#include "epfq/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "epfq/models.hpp"

namespace epfq {

namespace {

std::string join_problems(const std::vector<std::string> &problems) {
	std::string out = "invalid configuration:";
	for (const auto &p : problems) {
		out += "\n  " + p;
	}
	return out;
}

using json = nlohmann::json;

// Reads typed fields from one JSON object, collecting every problem instead of stopping at the first.
class Reader {
public:
	Reader(const json &obj, std::string path, std::vector<std::string> &problems)
	    : obj_(obj), path_(std::move(path)), problems_(problems) {}

	template <typename T>
	void get(const char *key, T &out) {
		seen_.insert(key);
		if (!obj_.contains(key) || obj_.at(key).is_null()) {
			return;
		}
		const auto &v = obj_.at(key);
		try {
			if constexpr (std::is_same_v<T, std::string>) {
				if (!v.is_string()) {
					throw std::invalid_argument("expected a string");
				}
			} else if constexpr (std::is_integral_v<T>) {
				if (!v.is_number_integer()) {
					throw std::invalid_argument("expected an integer");
				}
				if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
					throw std::invalid_argument("expected a nonnegative integer");
				}
			} else if constexpr (std::is_floating_point_v<T>) {
				if (!v.is_number()) {
					throw std::invalid_argument("expected a number");
				}
			}
			out = v.get<T>();
		} catch (const std::exception &e) {
			problem(key, e.what());
		}
	}

	void get_date(const char *key, std::optional<DayDate> &out) {
		std::string text;
		get(key, text);
		if (!text.empty()) {
			try {
				out = DayDate::parse(text);
			} catch (const std::exception &e) {
				problem(key, e.what());
			}
		}
	}

	const json *object(const char *key) {
		seen_.insert(key);
		if (!obj_.contains(key) || obj_.at(key).is_null()) {
			return nullptr;
		}
		if (!obj_.at(key).is_object()) {
			problem(key, "expected an object");
			return nullptr;
		}
		return &obj_.at(key);
	}

	void mark(const char *key) { seen_.insert(key); }

	void problem(const std::string &key, const std::string &what) { problems_.push_back(path_ + key + ": " + what); }

	void reject_unknown() {
		for (const auto &[key, value] : obj_.items()) {
			if (!seen_.count(key)) {
				problems_.push_back(path_ + key + ": unknown key");
			}
		}
	}

	const std::string &path() const { return path_; }

private:
	const json &obj_;
	std::string path_;
	std::vector<std::string> &problems_;
	std::set<std::string> seen_;
};

std::string resolve(const std::string &path, const std::string &base_dir) {
	if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) {
		return path;
	}
	return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

void check_bounds(const RunConfig &c, std::vector<std::string> &problems) {
	if (c.postproc_window < static_cast<int>(kMinQuantileWindow)) {
		problems.push_back("postproc_window: must be >= " + std::to_string(kMinQuantileWindow) + " (got " +
		                   std::to_string(c.postproc_window) + ")");
	}
	if (c.price_window < c.postproc_window) {
		problems.push_back("price_window: must be >= postproc_window (got " + std::to_string(c.price_window) + " < " +
		                   std::to_string(c.postproc_window) + ")");
	}
	if (c.threads < 1) {
		problems.push_back("threads: must be >= 1 (got " + std::to_string(c.threads) + ")");
	}
	if (c.cv_folds < 2) {
		problems.push_back("cv_folds: must be >= 2 (got " + std::to_string(c.cv_folds) + ")");
	}
	if (c.cv_folds > c.price_window) {
		problems.push_back("cv_folds: must not exceed price_window");
	}
	if (c.lambda_count < 1) {
		problems.push_back("lambda_count: must be >= 1");
	}
	if (!(c.lambda_min_ratio > 0.0 && c.lambda_min_ratio < 1.0)) {
		problems.push_back("lambda_min_ratio: must lie in (0, 1)");
	}
	if (!(c.impact_lower_tail > 0.0 && c.impact_lower_tail < c.impact_upper_tail && c.impact_upper_tail < 1.0)) {
		problems.push_back("impact: need 0 < lower_tail < upper_tail < 1");
	}
	if (c.oos_start && c.oos_end && *c.oos_end < *c.oos_start) {
		problems.push_back("oos_end: precedes oos_start");
	}
	if (c.specs.empty()) {
		problems.push_back("specs: at least one model spec is required");
	}
	for (std::size_t i = 0; i < c.specs.size(); ++i) {
		try {
			parse_model_spec(c.specs[i], c.default_grid);
		} catch (const std::invalid_argument &e) {
			problems.push_back("specs[" + std::to_string(i) + "]: " + e.what());
		}
	}
	if (c.output_dir.empty()) {
		problems.push_back("output_dir: must not be empty");
	}
	const auto &d = c.data;
	if (d.synthetic) {
		if (d.synthetic_days < 30) {
			problems.push_back("data.synthetic.days: must be >= 30");
		}
	} else {
		const std::pair<const char *, const std::string *> required[] = {
		    {"price", &d.price},       {"load_fc", &d.load_fc}, {"solar_fc", &d.solar_fc},
		    {"wind_fc", &d.wind_fc},   {"load", &d.load},       {"solar", &d.solar},
		    {"wind", &d.wind},         {"commodities", &d.commodities}};
		for (const auto &[key, value] : required) {
			if (value->empty()) {
				problems.push_back(std::string("data.") + key + ": path required (or configure data.synthetic)");
			}
		}
	}
}

} // namespace

ConfigError::ConfigError(const std::vector<std::string> &problems)
    : std::runtime_error(join_problems(problems)), problems_(problems) {}

RunConfig parse_config(const json &doc, const std::string &base_dir) {
	std::vector<std::string> problems;
	RunConfig c;
	if (!doc.is_object()) {
		throw ConfigError({"config: top level must be a JSON object"});
	}
	Reader top(doc, "", problems);
	if (const auto *data = top.object("data")) {
		Reader r(*data, "data.", problems);
		for (auto [key, field] : {std::pair{"price", &c.data.price}, std::pair{"load_fc", &c.data.load_fc},
		                          std::pair{"solar_fc", &c.data.solar_fc}, std::pair{"wind_fc", &c.data.wind_fc},
		                          std::pair{"load", &c.data.load}, std::pair{"solar", &c.data.solar},
		                          std::pair{"wind", &c.data.wind}, std::pair{"commodities", &c.data.commodities}}) {
			r.get(key, *field);
			*field = resolve(*field, base_dir);
		}
		if (const auto *syn = r.object("synthetic")) {
			c.data.synthetic = true;
			Reader s(*syn, "data.synthetic.", problems);
			s.get("seed", c.data.synthetic_seed);
			s.get("days", c.data.synthetic_days);
			std::optional<DayDate> start;
			s.get_date("start", start);
			if (start) {
				c.data.synthetic_start = *start;
			}
			s.reject_unknown();
		}
		r.reject_unknown();
	}
	top.get("postproc_window", c.postproc_window);
	top.get("price_window", c.price_window);
	top.get_date("oos_start", c.oos_start);
	top.get_date("oos_end", c.oos_end);
	if (doc.contains("specs")) {
		const auto &specs = doc.at("specs");
		if (!specs.is_array()) {
			problems.push_back("specs: expected an array of strings");
		} else {
			c.specs.clear();
			for (std::size_t i = 0; i < specs.size(); ++i) {
				if (!specs[i].is_string()) {
					problems.push_back("specs[" + std::to_string(i) + "]: expected a string");
				} else {
					c.specs.push_back(specs[i].get<std::string>());
				}
			}
		}
	}
	top.mark("specs");
	std::string grid;
	top.get("default_grid", grid);
	if (!grid.empty()) {
		try {
			c.default_grid = parse_grid_label(grid);
		} catch (const std::invalid_argument &e) {
			top.problem("default_grid", e.what());
		}
	}
	top.get("seed", c.seed);
	top.get("output_dir", c.output_dir);
	if (!c.output_dir.empty()) {
		c.output_dir = resolve(c.output_dir, base_dir);
	}
	top.get("threads", c.threads);
	top.get("cv_folds", c.cv_folds);
	top.get("lambda_count", c.lambda_count);
	top.get("lambda_min_ratio", c.lambda_min_ratio);
	if (const auto *impact = top.object("impact")) {
		Reader r(*impact, "impact.", problems);
		r.get("lower_tail", c.impact_lower_tail);
		r.get("upper_tail", c.impact_upper_tail);
		r.reject_unknown();
	}
	top.reject_unknown();
	check_bounds(c, problems);
	if (!problems.empty()) {
		throw ConfigError(problems);
	}
	return c;
}

RunConfig parse_config_text(const std::string &text, const std::string &base_dir) {
	json doc;
	try {
		doc = json::parse(text);
	} catch (const json::parse_error &e) {
		throw ConfigError({std::string("config: malformed JSON: ") + e.what()});
	}
	return parse_config(doc, base_dir);
}

RunConfig parse_config_file(const std::string &path) {
	std::ifstream in(path);
	if (!in) {
		throw ConfigError({"config: cannot open '" + path + "'"});
	}
	std::stringstream buffer;
	buffer << in.rdbuf();
	return parse_config_text(buffer.str(), std::filesystem::path(path).parent_path().string());
}

namespace {

template <typename T>
void env_number(const std::function<const char *(const char *)> &getenv, const char *name, T &out,
                std::vector<std::string> &problems) {
	const char *value = getenv(name);
	if (value == nullptr) {
		return;
	}
	const std::string_view text(value);
	T parsed{};
	const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), parsed);
	if (ec != std::errc() || ptr != text.data() + text.size()) {
		problems.push_back(std::string(name) + ": not an integer ('" + value + "')");
		return;
	}
	out = parsed;
}

} // namespace

void apply_env_overrides(RunConfig &config, const std::function<const char *(const char *)> &getenv) {
	std::vector<std::string> problems;
	env_number(getenv, "EPFQ_SEED", config.seed, problems);
	env_number(getenv, "EPFQ_THREADS", config.threads, problems);
	env_number(getenv, "EPFQ_POSTPROC_WINDOW", config.postproc_window, problems);
	env_number(getenv, "EPFQ_PRICE_WINDOW", config.price_window, problems);
	if (const char *dir = getenv("EPFQ_OUTPUT_DIR")) {
		config.output_dir = dir;
	}
	if (!problems.empty()) {
		throw ConfigError(problems);
	}
}

void validate(const RunConfig &config) {
	std::vector<std::string> problems;
	check_bounds(config, problems);
	if (!problems.empty()) {
		throw ConfigError(problems);
	}
}

json to_json(const RunConfig &c) {
	json j;
	json data;
	if (c.data.synthetic) {
		data["synthetic"] = {{"seed", c.data.synthetic_seed},
		                     {"days", c.data.synthetic_days},
		                     {"start", c.data.synthetic_start.iso()}};
	} else {
		data = {{"price", c.data.price},   {"load_fc", c.data.load_fc}, {"solar_fc", c.data.solar_fc},
		        {"wind_fc", c.data.wind_fc}, {"load", c.data.load},     {"solar", c.data.solar},
		        {"wind", c.data.wind},     {"commodities", c.data.commodities}};
	}
	j["data"] = data;
	j["postproc_window"] = c.postproc_window;
	j["price_window"] = c.price_window;
	if (c.oos_start) {
		j["oos_start"] = c.oos_start->iso();
	}
	if (c.oos_end) {
		j["oos_end"] = c.oos_end->iso();
	}
	j["specs"] = c.specs;
	j["default_grid"] = to_string(c.default_grid);
	j["seed"] = c.seed;
	j["output_dir"] = c.output_dir;
	j["threads"] = c.threads;
	j["cv_folds"] = c.cv_folds;
	j["lambda_count"] = c.lambda_count;
	j["lambda_min_ratio"] = c.lambda_min_ratio;
	j["impact"] = {{"lower_tail", c.impact_lower_tail}, {"upper_tail", c.impact_upper_tail}};
	return j;
}

} // namespace epfq
