// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
//
//   epfq_acceptance [--only NAME] [--threads N]

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "epfq/evalstat.hpp"
#include "epfq/pipeline.hpp"
#include "epfq/synth.hpp"
#include "oracles.hpp"

using namespace epfq;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
	return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
	bool pass = false;
	std::string detail;
};

int g_threads = 1;

Outcome qr_exactness() {
	const auto t0 = Clock::now();
	std::mt19937_64 rng(2024);
	std::normal_distribution<double> z;
	double worst = 0;
	int instances = 0;
	while (instances < 200) {
		const std::size_t n = 2 + rng() % 11;
		const bool ties = rng() % 3 == 0;
		std::vector<double> xh(n), x(n);
		for (std::size_t i = 0; i < n; ++i) {
			xh[i] = ties ? std::round(2 * z(rng)) : 10 * z(rng);
			x[i] = 0.7 * xh[i] + (ties ? std::round(z(rng)) : 3 * z(rng));
		}
		if (std::all_of(xh.begin(), xh.end(), [&](double v) { return v == xh[0]; })) {
			continue;
		}
		const double tau = std::uniform_real_distribution<double>(0.001, 0.999)(rng);
		const double got = solve_qr_exact(xh, x, tau).objective;
		const double want = oracle::brute_force_qr(xh, x, tau);
		worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
		++instances;
	}
	const double secs = seconds_since(t0);
	std::ostringstream s;
	s << instances << " instances, worst relative gap " << worst << ", " << std::setprecision(3) << secs << " s";
	return {worst <= 1e-9 && secs < 10.0, s.str()};
}

Outcome lasso_kkt() {
	const auto t0 = Clock::now();
	std::mt19937_64 rng(77);
	double worst_kkt = 0;
	for (int rep = 0; rep < 500; ++rep) {
		const int n = 5 + static_cast<int>(rng() % 36);
		const int p = 1 + static_cast<int>(rng() % 10);
		const auto inst = oracle::random_instance(rng, n, p, rep % 4 == 0);
		const double lmax = (inst.X.transpose() * inst.y).cwiseAbs().maxCoeff() / n;
		const double lambda = lmax * std::pow(10.0, -3.0 * std::uniform_real_distribution<double>(0, 1)(rng));
		const auto b = lasso::fit_coordinate_descent(inst.X, inst.y, lambda);
		worst_kkt = std::max(worst_kkt, oracle::kkt_violation(inst.X, inst.y, b, lambda));
	}
	double worst_gap = 0;
	for (int rep = 0; rep < 500; ++rep) {
		const int p = 1 + static_cast<int>(rng() % 4);
		const int n = p + 2 + static_cast<int>(rng() % 30);
		const auto inst = oracle::random_instance(rng, n, p, rep % 3 == 0);
		const double lmax = (inst.X.transpose() * inst.y).cwiseAbs().maxCoeff() / n;
		const double lambda = lmax * std::uniform_real_distribution<double>(0.001, 1.0)(rng);
		const auto b = lasso::fit_coordinate_descent(inst.X, inst.y, lambda);
		worst_gap = std::max(worst_gap, std::abs(lasso::lasso_objective(inst.X, inst.y, b, lambda) -
		                                         oracle::sign_support_oracle(inst.X, inst.y, lambda)));
	}
	const double secs = seconds_since(t0);
	std::ostringstream s;
	s << "500 fits, worst KKT violation " << worst_kkt << "; 500 oracle cases (p<=4), worst objective gap "
	  << worst_gap << "; " << std::setprecision(3) << secs << " s";
	return {worst_kkt <= 1e-6 && worst_gap <= 1e-8 && secs < 60.0, s.str()};
}

// Smallest / largest count k with P(K <= k) >= alpha/2 / P(K >= k) >= alpha/2 under Binomial(n, p).
std::pair<int, int> binomial_interval(int n, double p, double alpha) {
	std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
	for (int k = 0; k <= n; ++k) {
		pmf[static_cast<std::size_t>(k)] =
		    std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
		             (n - k) * std::log1p(-p));
	}
	int lo = 0;
	double cdf = pmf[0];
	while (cdf < alpha / 2) {
		cdf += pmf[static_cast<std::size_t>(++lo)];
	}
	int hi = n;
	double sf = pmf[static_cast<std::size_t>(n)];
	while (sf < alpha / 2) {
		sf += pmf[static_cast<std::size_t>(--hi)];
	}
	return {lo, hi};
}

Outcome hs_coverage() {
	constexpr int N = 364;
	constexpr int eval_days = 1000;
	constexpr int hour = 12;
	std::mt19937_64 rng(42);
	std::student_t_distribution<double> eps(5.0);
	std::normal_distribution<double> level(0.0, 50.0);
	const int days = N + eval_days;
	const auto first = DayDate::from_ymd(2020, 1, 1);
	HourlyMatrix fc(days, kHoursPerDay), act(days, kHoursPerDay);
	for (int d = 0; d < days; ++d) {
		for (int h = 0; h < kHoursPerDay; ++h) {
			fc(d, h) = 500.0 + level(rng);
			act(d, h) = fc(d, h) + 10.0 * eps(rng);
		}
	}
	const HourlyPanel point("x_fc", first, fc), actual("x", first, act);
	const auto grid = make_grid(GridLabel::T11, N);
	const DayDate from = first + N;
	const auto surface =
	    build_surface(Fundamental::ResLoad, point, actual, Method::HS, grid, N, from, from + eval_days - 1);
	bool pass = true;
	std::ostringstream s;
	s << "seed 42, " << eval_days << " points, counts below quantile:";
	for (std::size_t k = 0; k < grid.size(); ++k) {
		int below = 0;
		for (int d = 0; d < eval_days; ++d) {
			below += actual.at(from + d, hour) <= surface.quantiles(from + d, hour)(static_cast<Eigen::Index>(k));
		}
		const auto [lo, hi] = binomial_interval(eval_days, grid.levels[k], 0.01);
		const bool ok = below >= lo && below <= hi;
		pass = pass && ok;
		s << " " << format_level(grid.levels[k]) << ":" << below << (ok ? "" : "!") << "[" << lo << "," << hi << "]";
	}
	return {pass, s.str()};
}

Outcome cpa_size() {
	std::mt19937_64 rng(5150);
	std::normal_distribution<double> z;
	int rejections = 0;
	constexpr int reps = 1000, n = 500;
	std::vector<double> a(n), b(n);
	for (int r = 0; r < reps; ++r) {
		for (int i = 0; i < n; ++i) {
			a[static_cast<std::size_t>(i)] = std::pow(z(rng), 2);
			b[static_cast<std::size_t>(i)] = std::pow(z(rng), 2);
		}
		rejections += cpa_test(a, b).p_value < 0.05;
	}
	const double rate = 100.0 * rejections / reps;
	std::ostringstream s;
	s << reps << " replications, n=" << n << ", rejection rate " << rate << "%";
	return {rate >= 3.0 && rate <= 7.0, s.str()};
}

Outcome jensen() {
	const auto g = jensen_gap(demo_merit_curve(), demo_density());
	std::ostringstream s;
	s << std::fixed << std::setprecision(3) << "MO(E[X]) = " << g.mo_of_mean << ", E[MO(X)] = " << g.mean_of_mo;
	const bool pass = g.mean_of_mo > g.mo_of_mean && std::abs(g.mo_of_mean - 92.0) < 1e-9 && g.mean_of_mo >= 120.0 &&
	                  g.mean_of_mo <= 125.0;
	return {pass, s.str()};
}

double backtest_rmse(const MarketData &data, const SurfaceRefs &surfaces, const std::string &spec, DayDate first,
                     DayDate last, std::uint64_t seed) {
	BacktestOptions opt;
	opt.fit.window = 360;
	opt.fit.run_seed = seed;
	opt.fit.threads = g_threads;
	std::vector<double> daily;
	opt.keep_days = false;
	opt.on_day = [&](const DayResult &r) {
		std::array<double, kHoursPerDay> e{};
		for (int h = 0; h < kHoursPerDay; ++h) {
			e[static_cast<std::size_t>(h)] = r.forecast[static_cast<std::size_t>(h)] - r.actual[static_cast<std::size_t>(h)];
		}
		daily.push_back(rmse_daily(e));
	};
	rolling_backtest(data, surfaces, parse_model_spec(spec), first, last, opt);
	return rmse_aggregate(daily);
}

Outcome directional() {
	const auto t0 = Clock::now();
	constexpr int N = 120;
	int expert_wins = 0, hlm_wins = 0;
	std::ostringstream s;
	s << std::fixed << std::setprecision(2);
	for (std::uint64_t seed = 1; seed <= 5; ++seed) {
		const auto m = generate_synthetic_market(seed, 1100);
		const auto fc = derive_fundamentals(m.data.load_fc, m.data.solar_fc, m.data.wind_fc);
		const auto act = derive_fundamentals(m.load, m.solar, m.wind);
		const DayDate last = m.data.price.last_day();
		const DayDate first = last - 199;
		const DayDate surf_from = first - 360;
		const auto grid = make_grid(GridLabel::T21, N);
		const auto load = build_surface(Fundamental::Load, m.data.load_fc, m.load, Method::QR, grid, N, surf_from, last);
		const auto res = build_surface(Fundamental::RES, fc.res, act.res, Method::QR, grid, N, surf_from, last);
		const auto resload =
		    build_surface(Fundamental::ResLoad, fc.res_load, act.res_load, Method::QR, grid, N, surf_from, last);
		const double e0 = backtest_rmse(m.data, {}, "Expert", first, last, seed);
		const double e1 = backtest_rmse(m.data, {&load, &res}, "Expert-QR^{Load,RES}_T21", first, last, seed);
		const double h0 = backtest_rmse(m.data, {}, "HLM", first, last, seed);
		const double h1 = backtest_rmse(m.data, {&resload}, "HLM-QR^ResLoad_T21", first, last, seed);
		expert_wins += e1 < e0;
		hlm_wins += h1 < h0;
		s << " seed " << seed << ": Expert " << e0 << " vs " << e1 << " (" << pct_change(e1, e0) << "%), HLM " << h0
		  << " vs " << h1 << " (" << pct_change(h1, h0) << "%);";
	}
	const double secs = seconds_since(t0);
	s << " Expert-QR wins " << expert_wins << "/5, HLM-QR wins " << hlm_wins << "/5, " << std::setprecision(0)
	  << secs << " s on " << g_threads << " thread(s)";
	return {expert_wins == 5 && hlm_wins >= 4 && secs < 15 * 60.0, s.str()};
}

Outcome structural() {
	const auto m = generate_synthetic_market(1, 60);
	const DayDate day = m.data.price.first_day() + 20;
	int checked = 0, mismatches = 0, largest = 0;
	for (const auto &spec : all_model_specs()) {
		if (spec.is_benchmark()) {
			continue;
		}
		const auto grid = make_grid(*spec.grid, 364);
		std::vector<QuantileSurface> owned;
		for (auto var : spec.varset->members) {
			owned.emplace_back(var, *spec.postproc, grid, day, 1);
		}
		SurfaceRefs refs;
		for (const auto &o : owned) {
			refs.push_back(&o);
		}
		const auto design = build_design(m.data, refs, spec, 12, day, day);
		const int expected =
		    (spec.base == BaseModel::Expert ? 20 : 205) +
		    static_cast<int>(spec.varset->members.size()) * static_cast<int>(grid.size());
		mismatches += static_cast<int>(design.X.cols()) != expected ||
		              static_cast<int>(design.columns.size()) != expected;
		largest = std::max(largest, static_cast<int>(design.X.cols()));
		++checked;
	}
	std::ostringstream s;
	s << checked << " extended specs, " << mismatches << " mismatches, largest " << largest << " columns";
	return {checked == 294 && mismatches == 0 && largest == 808, s.str()};
}

std::map<std::string, std::string> snapshot(const fs::path &root) {
	std::map<std::string, std::string> files;
	for (const auto &e : fs::recursive_directory_iterator(root)) {
		if (e.is_regular_file()) {
			std::ifstream in(e.path(), std::ios::binary);
			std::stringstream buf;
			buf << in.rdbuf();
			files[fs::relative(e.path(), root).string()] = buf.str();
		}
	}
	return files;
}

Outcome determinism() {
	const auto out = fs::temp_directory_path() / "epfq_acceptance_determinism";
	RunConfig c;
	c.data.synthetic = true;
	c.data.synthetic_seed = 8;
	c.data.synthetic_days = 160;
	c.postproc_window = 30;
	c.price_window = 60;
	c.specs = {"Expert", "HLM", "Expert-QR^{Load,RES}_T11", "HLM-ReLU^Solar_T5", "Expert-HS^ResLoad_T7"};
	c.seed = 3;
	c.threads = g_threads;
	c.output_dir = out.string();
	std::ostringstream log;
	PipelineOptions opt;
	opt.log = &log;
	std::map<std::string, std::string> runs[2];
	for (auto &run : runs) {
		fs::remove_all(out);
		run_stage(Stage::Run, c, opt);
		run = snapshot(out);
	}
	fs::remove_all(out);
	std::size_t bytes = 0;
	for (const auto &[name, content] : runs[0]) {
		bytes += content.size();
	}
	std::ostringstream s;
	s << runs[0].size() << " files, " << bytes << " bytes, "
	  << (runs[0] == runs[1] ? "identical" : "DIFFERENT") << " across two runs";
	return {runs[0] == runs[1] && !runs[0].empty(), s.str()};
}

} // namespace

int main(int argc, char **argv) {
	std::string only;
	g_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
	for (int i = 1; i + 1 < argc; i += 2) {
		const std::string flag = argv[i];
		if (flag == "--only") {
			only = argv[i + 1];
		} else if (flag == "--threads") {
			g_threads = std::max(1, std::atoi(argv[i + 1]));
		}
	}
	const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
	    {"qr-exactness", qr_exactness}, {"lasso-kkt", lasso_kkt},     {"hs-coverage", hs_coverage},
	    {"cpa-size", cpa_size},         {"jensen-gap", jensen},        {"directional-backtest", directional},
	    {"structural-counts", structural}, {"determinism", determinism}};
	int failures = 0;
	for (const auto &[name, run] : criteria) {
		if (!only.empty() && name != only) {
			continue;
		}
		Outcome o;
		try {
			o = run();
		} catch (const std::exception &e) {
			o = {false, std::string("error: ") + e.what()};
		}
		failures += !o.pass;
		std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
	}
	return failures == 0 ? 0 : 1;
}
