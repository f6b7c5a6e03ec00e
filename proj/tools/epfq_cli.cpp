// epfq: electricity price forecasting with probabilistic fundamental inputs.
//
//   epfq synth --out DIR [--seed S] [--days N]
//   epfq {ingest,postprocess,backtest,evaluate,report,run} --config FILE
//        [--spec S]... [--seed S] [--threads T] [--resume] [--dry-run]
//
// Settings resolve config file < EPFQ_* environment < command line.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "epfq/pipeline.hpp"
#include "epfq/synth.hpp"

namespace fs = std::filesystem;

namespace {

struct StageFlags {
	std::string config;
	std::vector<std::string> specs;
	std::optional<std::uint64_t> seed;
	std::optional<int> threads;
	bool resume = false;
	bool dry_run = false;
};

void add_stage(CLI::App &app, const std::string &name, const std::string &what, epfq::Stage stage, StageFlags &flags,
               std::optional<epfq::Stage> &chosen) {
	auto *sub = app.add_subcommand(name, what);
	sub->add_option("--config", flags.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
	sub->add_option("--spec", flags.specs, "model spec, e.g. HLM-QR^ResLoad_T201 (repeatable; replaces config specs)");
	sub->add_option("--seed", flags.seed, "run seed");
	sub->add_option("--threads", flags.threads, "thread budget")->check(CLI::PositiveNumber);
	sub->add_flag("--resume", flags.resume, "keep whole days already on disk and continue");
	sub->add_flag("--dry-run", flags.dry_run, "validate config, data and plan without fitting");
	sub->callback([&chosen, stage] { chosen = stage; });
}

int run_synth(std::uint64_t seed, int days, const std::string &start, const std::string &out) {
	auto market = epfq::generate_synthetic_market(seed, days, epfq::DayDate::parse(start));
	epfq::Dataset ds{std::move(market.data), std::move(market.load), std::move(market.solar), std::move(market.wind)};
	epfq::write_dataset(ds, out);

	// a ready-to-run config next to the CSVs
	nlohmann::json cfg;
	cfg["data"] = {{"price", "price.csv"},     {"load_fc", "load_fc.csv"}, {"solar_fc", "solar_fc.csv"},
	               {"wind_fc", "wind_fc.csv"}, {"load", "load.csv"},       {"solar", "solar.csv"},
	               {"wind", "wind.csv"},       {"commodities", "commodities.csv"}};
	cfg["seed"] = seed;
	cfg["output_dir"] = "out";
	// shrink the windows for short markets so that about a fifth of the days stay out of sample
	const int budget = days - 10 - std::max(30, days / 5);
	const int price_window = std::min(728, budget * 2 / 3);
	const int postproc_window = std::min(364, budget - price_window);
	if (postproc_window < 30 || price_window < postproc_window) {
		std::cerr << "epfq: [synth] " << days << " days leave no room for a backtest; use more --days\n";
		return 2;
	}
	if (price_window < 728 || postproc_window < 364) {
		cfg["price_window"] = price_window;
		cfg["postproc_window"] = postproc_window;
	}
	std::ofstream(fs::path(out) / "config.json") << cfg.dump(1) << "\n";
	std::cout << "synthetic market: " << days << " days from " << start << " written to " << out << "\n";
	return 0;
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app{"Day-ahead electricity price forecasting with quantile inputs"};
	app.require_subcommand(1);

	StageFlags flags;
	std::optional<epfq::Stage> stage;
	add_stage(app, "ingest", "read and normalize the input series", epfq::Stage::Ingest, flags, stage);
	add_stage(app, "postprocess", "build quantile surfaces of the fundamentals", epfq::Stage::Postprocess, flags, stage);
	add_stage(app, "backtest", "rolling-window price forecasts per spec", epfq::Stage::Backtest, flags, stage);
	add_stage(app, "evaluate", "RMSE, CPA, selection and impact tables", epfq::Stage::Evaluate, flags, stage);
	add_stage(app, "report", "appendix table and summary", epfq::Stage::Report, flags, stage);
	add_stage(app, "run", "all stages in order", epfq::Stage::Run, flags, stage);

	std::uint64_t synth_seed = 0;
	int synth_days = 1100;
	std::string synth_start = "2015-01-01";
	std::string synth_out;
	auto *synth = app.add_subcommand("synth", "write a synthetic market and a matching config");
	synth->add_option("--seed", synth_seed, "generator seed");
	synth->add_option("--days", synth_days, "number of days")->check(CLI::Range(30, 100000));
	synth->add_option("--start", synth_start, "first day (YYYY-MM-DD)");
	synth->add_option("--out", synth_out, "output directory")->required();

	CLI11_PARSE(app, argc, argv);

	try {
		if (synth->parsed()) {
			return run_synth(synth_seed, synth_days, synth_start, synth_out);
		}
		auto config = epfq::parse_config_file(flags.config);
		epfq::apply_env_overrides(config);
		if (!flags.specs.empty()) {
			config.specs = flags.specs;
		}
		if (flags.seed) {
			config.seed = *flags.seed;
		}
		if (flags.threads) {
			config.threads = *flags.threads;
		}
		epfq::validate(config);
		epfq::PipelineOptions options;
		options.resume = flags.resume;
		options.dry_run = flags.dry_run;
		options.log = &std::cerr;
		epfq::run_stage(*stage, config, options);
	} catch (const epfq::ConfigError &e) {
		std::cerr << "epfq: [config] " << e.what() << "\n";
		return 2;
	} catch (const std::exception &e) {
		std::cerr << "epfq: " << e.what() << "\n";
		return 1;
	}
	return 0;
}
