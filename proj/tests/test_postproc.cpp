#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "epfq/postproc.hpp"
#include "oracles.hpp"

using namespace epfq;
using namespace epfq::oracle;

namespace {

// Type-7 sample quantile written out independently of the library.
double type7(std::vector<double> v, double tau) {
	std::sort(v.begin(), v.end());
	const double h = (static_cast<double>(v.size()) - 1.0) * tau;
	const auto lo = static_cast<std::size_t>(std::floor(h));
	const auto hi = std::min(lo + 1, v.size() - 1);
	return v[lo] + (h - std::floor(h)) * (v[hi] - v[lo]);
}

HourlyPanel constant_panel(DayDate first, int days, double value, const std::string &name = "x") {
	return HourlyPanel(name, first, HourlyMatrix::Constant(days, kHoursPerDay, value));
}

} // namespace

TEST(Grid, T5AtN364) {
	const auto g = make_grid(GridLabel::T5, 364);
	const std::vector<double> expected{1.0 / 728, 0.1, 0.5, 0.9, 727.0 / 728};
	ASSERT_EQ(g.levels.size(), expected.size());
	for (std::size_t i = 0; i < expected.size(); ++i) {
		EXPECT_NEAR(g.levels[i], expected[i], 1e-15);
	}
}

TEST(Grid, AllLabelsHaveTheirSizeAndSymmetricEndpoints) {
	for (auto label : {GridLabel::T5, GridLabel::T7, GridLabel::T11, GridLabel::T21, GridLabel::T51, GridLabel::T101,
	                   GridLabel::T201}) {
		const auto g = make_grid(label, 364);
		EXPECT_EQ(static_cast<int>(g.size()), grid_size(label));
		EXPECT_DOUBLE_EQ(g.levels.front(), 1.0 / 728);
		EXPECT_DOUBLE_EQ(g.levels.back(), 727.0 / 728);
		EXPECT_TRUE(std::is_sorted(g.levels.begin(), g.levels.end()));
		for (std::size_t i = 0; i < g.size(); ++i) {
			EXPECT_NEAR(g.levels[i] + g.levels[g.size() - 1 - i], 1.0, 1e-12);
		}
		EXPECT_EQ(parse_grid_label(to_string(label)), label);
	}
	EXPECT_EQ(make_grid(GridLabel::T7, 364).levels[2], 0.3);
	EXPECT_THROW(make_grid(GridLabel::T201, 50), std::invalid_argument); // 1/100 would not precede 0.005
	EXPECT_THROW(parse_grid_label("T9"), std::invalid_argument);
}

TEST(Grid, LevelFormatting) {
	EXPECT_EQ(format_level(0.005), "0.005");
	EXPECT_EQ(format_level(0.5), "0.5");
	EXPECT_EQ(format_level(1.0 / 728), "0.00137363");
}

TEST(Quantile, InterpolationRule) {
	const std::vector<double> two{0.0, 10.0};
	EXPECT_DOUBLE_EQ(empirical_quantile(two, 0.25), 2.5);
	std::mt19937_64 rng(3);
	std::normal_distribution<double> n;
	for (int rep = 0; rep < 200; ++rep) {
		std::vector<double> v(1 + rng() % 50);
		for (auto &x : v) {
			x = std::round(n(rng) * 4) / 4; // ties
		}
		const double tau = std::uniform_real_distribution<double>(0, 1)(rng);
		EXPECT_NEAR(empirical_quantile(v, tau), type7(v, tau), 1e-12);
	}
	EXPECT_THROW(empirical_quantile(std::vector<double>{}, 0.5), std::invalid_argument);
}

TEST(Quantile, PinballLoss) {
	EXPECT_DOUBLE_EQ(pinball_loss(1.0, 3.0, 0.9), 0.9 * 2.0);
	EXPECT_DOUBLE_EQ(pinball_loss(3.0, 1.0, 0.9), 0.1 * 2.0);
	EXPECT_DOUBLE_EQ(pinball_loss(2.0, 2.0, 0.3), 0.0);
}

TEST(Qr, SixPointsMatchesEnumeration) {
	const std::vector<double> xh{1.0, 2.5, 3.1, 4.7, 6.0, 7.2};
	const std::vector<double> x{1.4, 2.0, 3.9, 4.1, 6.8, 6.9};
	const auto fit = solve_qr_exact(xh, x, 0.5);
	EXPECT_NEAR(fit.objective, brute_force_qr(xh, x, 0.5), 1e-12);
	EXPECT_NEAR(fit.objective, check_sum(xh, x, 0.5, fit.intercept, fit.slope), 1e-12);
}

TEST(Qr, PropertyRandomInstancesIncludingTies) {
	std::mt19937_64 rng(11);
	std::normal_distribution<double> n;
	for (int rep = 0; rep < 300; ++rep) {
		const std::size_t size = 2 + rng() % 14;
		std::vector<double> xh(size), x(size);
		const bool ties = rep % 3 == 0;
		for (std::size_t i = 0; i < size; ++i) {
			xh[i] = ties ? std::round(n(rng) * 2) : n(rng) * 10;
			x[i] = 0.7 * xh[i] + (ties ? std::round(n(rng)) : n(rng) * 3);
		}
		if (std::all_of(xh.begin(), xh.end(), [&](double v) { return v == xh[0]; })) {
			continue;
		}
		const double tau = std::uniform_real_distribution<double>(0.001, 0.999)(rng);
		const auto fit = solve_qr_exact(xh, x, tau);
		const double oracle = brute_force_qr(xh, x, tau);
		EXPECT_NEAR(fit.objective, oracle, 1e-9 * (1 + std::abs(oracle))) << "rep " << rep;
		// warm start from a perturbed line reaches the same optimum
		QrFit warm{fit.intercept + 1.0, fit.slope * 0.5, 0, false};
		EXPECT_NEAR(solve_qr_exact(xh, x, tau, &warm).objective, oracle, 1e-9 * (1 + std::abs(oracle)));
	}
}

TEST(Qr, ConstantRegressorFallsBackToQuantile) {
	const std::vector<double> xh(12, 5.0);
	std::vector<double> x;
	for (int i = 0; i < 12; ++i) {
		x.push_back(i * 1.5);
	}
	const auto fit = fit_qr(xh, x, 0.3);
	EXPECT_TRUE(fit.degenerate);
	EXPECT_EQ(fit.slope, 0.0);
	EXPECT_NEAR(fit.objective, check_sum(xh, x, 0.3, fit.intercept, 0.0), 1e-12);
	// the intercept minimizes the check loss of a constant
	for (double a = -1; a < 20; a += 0.25) {
		EXPECT_LE(fit.objective, check_sum(xh, x, 0.3, a, 0.0) + 1e-12);
	}
	EXPECT_THROW(fit_qr(std::vector<double>(5, 1.0), std::vector<double>(5, 1.0), 0.5), std::invalid_argument);
}

TEST(Postproc, HistoricalSimulationAddsErrorQuantiles) {
	std::vector<double> errors;
	for (int i = 0; i < 40; ++i) {
		errors.push_back((i * 37 % 40) - 20.0);
	}
	const auto grid = make_grid(GridLabel::T11, 100);
	const auto q = hs_forecast(500.0, errors, grid);
	for (std::size_t k = 0; k < grid.size(); ++k) {
		EXPECT_NEAR(q(static_cast<Eigen::Index>(k)), 500.0 + type7(errors, grid.levels[k]), 1e-12);
	}
	EXPECT_THROW(hs_forecast(1.0, std::vector<double>(28, 0.0), grid), std::invalid_argument);
}

TEST(Postproc, ReluIsMaxOfPointAndForecastQuantile) {
	std::vector<double> past;
	for (int i = 0; i < 60; ++i) {
		past.push_back(i);
	}
	const auto grid = make_grid(GridLabel::T5, 60);
	const auto q = relu_transform(30.0, past, grid);
	for (std::size_t k = 0; k < grid.size(); ++k) {
		EXPECT_DOUBLE_EQ(q(static_cast<Eigen::Index>(k)), std::max(30.0, type7(past, grid.levels[k])));
	}
}

TEST(Postproc, RearrangementSorts) {
	Eigen::VectorXd v(3);
	v << 5, 3, 7;
	const auto r = rearrange(v);
	EXPECT_EQ(r(0), 3);
	EXPECT_EQ(r(1), 5);
	EXPECT_EQ(r(2), 7);
}

TEST(Surface, SolarZeroForecastGivesFlaggedZeros) {
	const auto first = DayDate::parse("2020-01-01");
	const int days = 80;
	HourlyMatrix fc(days, kHoursPerDay), act(days, kHoursPerDay);
	std::mt19937_64 rng(5);
	std::normal_distribution<double> n;
	for (int d = 0; d < days; ++d) {
		for (int h = 0; h < kHoursPerDay; ++h) {
			const bool day_light = h >= 7 && h <= 17;
			fc(d, h) = day_light ? 1000 + 200 * n(rng) : 0.0;
			act(d, h) = day_light ? fc(d, h) + 150 * n(rng) : 0.0;
		}
	}
	const HourlyPanel pf("Solar_fc", first, fc), pa("Solar", first, act);
	for (auto method : {Method::HS, Method::QR, Method::ReLU}) {
		const auto s = build_surface(Fundamental::Solar, pf, pa, method, make_grid(GridLabel::T21, 40), 40);
		const auto day = s.first_day() + 3;
		EXPECT_TRUE(s.untrained(day, 2));
		EXPECT_TRUE(s.quantiles(day, 2).isZero());
		EXPECT_FALSE(s.untrained(day, 12));
	}
	const auto g201 = make_grid(GridLabel::T201, 364);
	QuantileSurface big(Fundamental::Solar, Method::HS, g201, first, 1);
	EXPECT_EQ(big.quantiles(first, 1).size(), 201);
}

TEST(Surface, NonnegativeVariablesAreTruncatedAndSorted) {
	const auto first = DayDate::parse("2020-01-01");
	const int days = 100;
	HourlyMatrix fc(days, kHoursPerDay), act(days, kHoursPerDay);
	std::mt19937_64 rng(8);
	std::normal_distribution<double> n;
	for (int d = 0; d < days; ++d) {
		for (int h = 0; h < kHoursPerDay; ++h) {
			fc(d, h) = 5.0 + std::abs(n(rng));
			act(d, h) = std::max(0.0, fc(d, h) + 12.0 * n(rng)); // errors far below zero
		}
	}
	const HourlyPanel pf("Wind_fc", first, fc), pa("Wind", first, act);
	for (auto method : {Method::HS, Method::QR}) {
		const auto s = build_surface(Fundamental::Wind, pf, pa, method, make_grid(GridLabel::T21, 60), 60);
		const auto raw_low = hs_forecast(fc(70, 0), std::vector<double>(60, -12.0), make_grid(GridLabel::T21, 60));
		EXPECT_LT(raw_low(0), 0.0);
		for (DayDate d = s.first_day(); d <= s.last_day(); ++d) {
			for (int h = 1; h <= kHoursPerDay; ++h) {
				const auto q = s.quantiles(d, h);
				EXPECT_GE(q.minCoeff(), 0.0);
				for (Eigen::Index k = 1; k < q.size(); ++k) {
					EXPECT_LE(q(k - 1), q(k));
				}
			}
		}
	}
	// residual load keeps negative quantiles
	const HourlyPanel rf("ResLoad_fc", first, fc), ra("ResLoad", first, fc.array() - 30.0);
	const auto s = build_surface(Fundamental::ResLoad, rf, ra, Method::HS, make_grid(GridLabel::T5, 60), 60);
	EXPECT_LT(s.quantiles(s.first_day(), 1).maxCoeff(), 0.0);
}

TEST(Surface, UsesOnlyInformationUpToTwoDaysBack) {
	const auto first = DayDate::parse("2020-01-01");
	const int days = 90;
	const auto pf = constant_panel(first, days, 100.0, "Load_fc");
	HourlyMatrix act = HourlyMatrix::Constant(days, kHoursPerDay, 100.0);
	const auto grid = make_grid(GridLabel::T5, 40);
	const auto base = build_surface(Fundamental::Load, pf, HourlyPanel("Load", first, act), Method::HS, grid, 40);
	const auto day = first + 60;
	act.row(59).setConstant(1e6); // day d-1 actuals are not yet known on day d-1
	const auto shifted = build_surface(Fundamental::Load, pf, HourlyPanel("Load", first, act), Method::HS, grid, 40);
	EXPECT_EQ(base.quantiles(day, 5), shifted.quantiles(day, 5));
	EXPECT_NE(base.quantiles(day + 1, 5), shifted.quantiles(day + 1, 5));
}

TEST(Surface, CsvLongFormat) {
	const auto first = DayDate::parse("2020-01-01");
	const auto s = build_surface(Fundamental::Load, constant_panel(first, 40, 5.0), constant_panel(first, 40, 6.0),
	                             Method::QR, make_grid(GridLabel::T5, 35), 35);
	std::ostringstream out;
	write_surface_csv(s, out);
	const auto text = out.str();
	EXPECT_EQ(text.substr(0, text.find('\n')), "date,hour,tau,value,method,variable");
	const auto lines = std::count(text.begin(), text.end(), '\n');
	EXPECT_EQ(lines, 1 + s.n_days() * kHoursPerDay * 5);
}

TEST(Surface, InsufficientHistoryThrows) {
	const auto first = DayDate::parse("2020-01-01");
	const auto p = constant_panel(first, 40, 5.0);
	EXPECT_THROW(build_surface(Fundamental::Load, p, p, Method::HS, make_grid(GridLabel::T5, 35), 35, first + 10,
	                           first + 20),
	             std::out_of_range);
	EXPECT_THROW(build_surface(Fundamental::Load, p, p, Method::HS, make_grid(GridLabel::T5, 20), 20),
	             std::invalid_argument);
}
