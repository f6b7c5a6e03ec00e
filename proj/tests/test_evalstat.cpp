#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "epfq/evalstat.hpp"

using namespace epfq;

namespace {

// Wald statistic of (1, Delta_{d-1}) -> Delta_d with the White covariance, written out for 2x2.
double hc0_wald(const std::vector<double> &delta) {
	const std::size_t n = delta.size() - 1;
	double s0 = 0, s1 = 0, s11 = 0, t0 = 0, t1 = 0;
	for (std::size_t i = 0; i < n; ++i) {
		const double x = delta[i], y = delta[i + 1];
		s0 += 1;
		s1 += x;
		s11 += x * x;
		t0 += y;
		t1 += x * y;
	}
	const double det = s0 * s11 - s1 * s1;
	const double b0 = (s11 * t0 - s1 * t1) / det;
	const double b1 = (s0 * t1 - s1 * t0) / det;
	double m00 = 0, m01 = 0, m11 = 0;
	for (std::size_t i = 0; i < n; ++i) {
		const double x = delta[i];
		const double e = delta[i + 1] - b0 - b1 * x;
		m00 += e * e;
		m01 += e * e * x;
		m11 += e * e * x * x;
	}
	// B = (H'H)^-1
	const double a = s11 / det, b = -s1 / det, d = s0 / det;
	// V = B M B
	const double bm00 = a * m00 + b * m01, bm01 = a * m01 + b * m11;
	const double bm10 = b * m00 + d * m01, bm11 = b * m01 + d * m11;
	const double v00 = bm00 * a + bm01 * b, v01 = bm00 * b + bm01 * d;
	const double v11 = bm10 * b + bm11 * d;
	const double vdet = v00 * v11 - v01 * v01;
	return (b0 * b0 * v11 - 2 * b0 * b1 * v01 + b1 * b1 * v00) / vdet;
}

} // namespace

TEST(Rmse, DailyAndAggregate) {
	std::vector<double> e(24, 0.0);
	e[0] = 3;
	e[1] = -4;
	EXPECT_DOUBLE_EQ(rmse_daily(e), std::sqrt(25.0 / 24.0));
	EXPECT_THROW(rmse_daily(std::vector<double>(23, 0.0)), std::invalid_argument);

	std::mt19937_64 rng(3);
	std::normal_distribution<double> z(0, 5);
	Eigen::MatrixXd errors(40, 24);
	for (Eigen::Index i = 0; i < errors.size(); ++i) {
		errors.data()[i] = z(rng);
	}
	const Eigen::VectorXd daily = rmse_by_day(errors);
	const double pooled = std::sqrt(errors.array().square().mean());
	EXPECT_NEAR(rmse_aggregate({daily.data(), static_cast<std::size_t>(daily.size())}), pooled, 1e-12);
	for (int h = 0; h < 24; ++h) {
		EXPECT_NEAR(rmse_by_hour(errors)(h), std::sqrt(errors.col(h).array().square().mean()), 1e-12);
	}
}

TEST(Rmse, PercentageChangeIsLogRatio) {
	EXPECT_DOUBLE_EQ(pct_change(10.0, 10.0), 0.0);
	EXPECT_NEAR(pct_change(8.0, 10.0), 100.0 * std::log(0.8), 1e-12);
	EXPECT_NEAR(pct_change(8.0, 10.0), -pct_change(10.0, 8.0), 1e-12);
	Eigen::MatrixXd a = Eigen::MatrixXd::Constant(5, 24, 2.0);
	Eigen::MatrixXd b = Eigen::MatrixXd::Constant(5, 24, 4.0);
	const auto hourly = pct_change_hourly(a, b);
	EXPECT_NEAR(hourly(7), 100.0 * std::log(0.5), 1e-12);
}

TEST(Cpa, MatchesClosedFormHc0Wald) {
	std::mt19937_64 rng(11);
	std::normal_distribution<double> z(0, 1);
	for (int rep = 0; rep < 50; ++rep) {
		const int n = 30 + static_cast<int>(rng() % 300);
		std::vector<double> la(n), lb(n), delta(n);
		double prev = 0;
		for (int i = 0; i < n; ++i) {
			prev = 0.3 * prev + z(rng) * (1 + 0.5 * std::abs(z(rng)));
			la[i] = 10 + prev + 0.1 * rep / 50.0;
			lb[i] = 10;
			delta[i] = la[i] - lb[i];
		}
		const auto r = cpa_test(la, lb);
		ASSERT_FALSE(r.degenerate);
		const double w = hc0_wald(delta);
		EXPECT_NEAR(r.statistic, w, 1e-8 * (1 + w));
		EXPECT_NEAR(r.p_value, std::exp(-w / 2), 1e-10);
		EXPECT_EQ(r.n, n - 1);
	}
}

TEST(Cpa, DetectsAClearlyBetterForecast) {
	std::mt19937_64 rng(5);
	std::normal_distribution<double> z(0, 1);
	std::vector<double> la(300), lb(300);
	for (int i = 0; i < 300; ++i) {
		la[i] = std::pow(2.0 * z(rng), 2);
		lb[i] = std::pow(3.0 * z(rng), 2);
	}
	const auto r = cpa_test(la, lb);
	EXPECT_LT(r.p_value, 0.01);
	EXPECT_LT(r.p_one_sided, 0.01);
	EXPECT_GT(cpa_test(lb, la).p_one_sided, 0.99);
}

TEST(Cpa, DegenerateAndShortInputs) {
	std::vector<double> a(40, 3.0), b(40, 1.0);
	EXPECT_TRUE(cpa_test(a, b).degenerate);
	EXPECT_TRUE(cpa_test(a, a).degenerate);
	EXPECT_THROW(cpa_test(std::vector<double>(29, 1.0), std::vector<double>(29, 2.0)), std::invalid_argument);
	EXPECT_THROW(cpa_test(std::vector<double>(40, 1.0), std::vector<double>(41, 2.0)), std::invalid_argument);
}

TEST(Selection, QuantileColumnNames) {
	const auto q = parse_quantile_column("ResLoad_q0.00137363");
	ASSERT_TRUE(q.has_value());
	EXPECT_EQ(q->first, "ResLoad");
	EXPECT_DOUBLE_EQ(q->second, 0.00137363);
	EXPECT_FALSE(parse_quantile_column("load_fc").has_value());
	EXPECT_FALSE(parse_quantile_column("x_qabc").has_value());
	EXPECT_FALSE(parse_quantile_column("x_q1.5").has_value());
}

TEST(Selection, PercentOfFittedDays) {
	const auto d0 = DayDate::parse("2021-01-01");
	std::vector<HistoryRow> h;
	for (int k = 0; k < 4; ++k) {
		h.push_back({d0 + k, 3, kInterceptColumn, 1.0, 0.1, 1.0});
	}
	h.push_back({d0, 3, "Load_q0.5", 2.0, 0.2, 0.5});
	h.push_back({d0 + 2, 3, "Load_q0.5", 2.0, 0.2, 0.5});
	h.push_back({d0 + 1, 3, "RES_q0.1", 1.0, 0.1, 0.5});
	h.push_back({d0 + 1, 3, "p_lag1", 1.0, 0.1, 0.5});
	const auto all = selection_frequency(h);
	EXPECT_DOUBLE_EQ(all.at({"Load", 0.5, 3}), 50.0);
	EXPECT_DOUBLE_EQ(all.at({"RES", 0.1, 3}), 25.0);
	EXPECT_EQ(all.size(), 2u);
	EXPECT_EQ(selection_frequency(h, "Load").size(), 1u);
	h.push_back({d0, 4, "Load_q0.5", 2.0, 0.2, 0.5});
	EXPECT_THROW(selection_frequency(h), std::invalid_argument);
}

TEST(Impact, TailCountsOnTheFinestGrid) {
	const auto c = tail_counts(make_grid(GridLabel::T201, 364));
	EXPECT_EQ(c.lower, 21);
	EXPECT_EQ(c.middle, 159);
	EXPECT_EQ(c.upper, 21);
	const auto c5 = tail_counts(make_grid(GridLabel::T5, 364));
	EXPECT_EQ(c5.lower, 2);
	EXPECT_EQ(c5.middle, 1);
	EXPECT_EQ(c5.upper, 2);
}

TEST(Impact, GroupContributionsAveragedOverFittedDays) {
	const auto grid = make_grid(GridLabel::T5, 364);
	const auto cols = make_layout(parse_model_spec("Expert-QR^Load_T5"), &grid);
	const auto d0 = DayDate::parse("2021-01-01");
	std::vector<HistoryRow> h;
	h.push_back({d0, 1, kInterceptColumn, 50.0, 2.0, 1.0});
	h.push_back({d0 + 1, 1, kInterceptColumn, 50.0, 4.0, 1.0});
	h.push_back({d0, 1, "load_fc", 0.0, 0.5, 2.0});         // +1.0
	h.push_back({d0 + 1, 1, "load_fc", 0.0, -0.5, 2.0});    // -1.0
	h.push_back({d0, 1, "Load_q0.00137363", 0.0, 1.0, 3.0}); // lower tail +3
	h.push_back({d0, 1, "dow1", 0.0, 1.0, 1.0});
	const auto rows = group_impact(h, cols);
	auto find = [&](const std::string &g) {
		for (const auto &r : rows) {
			if (r.group == g && r.hour == 1) {
				return r;
			}
		}
		ADD_FAILURE() << g;
		return ImpactRow{};
	};
	EXPECT_NEAR(find("Load").signed_mean, (1.0 - 1.0 + 3.0) / 2, 1e-12);
	EXPECT_NEAR(find("Load").absolute_mean, (4.0 + 1.0) / 2, 1e-12);
	EXPECT_NEAR(find("Load:lower").signed_mean, 1.5, 1e-12);
	EXPECT_EQ(find("Load:lower").n_columns, 2);
	EXPECT_EQ(find("Load").n_columns, 6);
	EXPECT_NEAR(find("Intercept+Dummies").signed_mean, (2.0 + 1.0 + 4.0) / 2, 1e-12);
	EXPECT_EQ(find("Commodities").signed_mean, 0.0);
	h.push_back({d0, 1, "nonsense", 1.0, 1.0, 1.0});
	EXPECT_THROW(group_impact(h, cols), std::invalid_argument);
}

TEST(Jensen, DemoReproducesTheFigures) {
	const auto curve = demo_merit_curve();
	EXPECT_TRUE(curve.convex());
	const auto density = demo_density();
	const auto g = jensen_gap(curve, density);
	EXPECT_NEAR(g.mo_of_mean, 92.0, 1e-9);
	EXPECT_GT(g.mean_of_mo, g.mo_of_mean);
	EXPECT_GE(g.mean_of_mo, 120.0);
	EXPECT_LE(g.mean_of_mo, 125.0);
}

TEST(Jensen, PropertyConvexCurvesNeverUnderstate) {
	std::mt19937_64 rng(9);
	std::uniform_real_distribution<double> u(0, 1);
	for (int rep = 0; rep < 200; ++rep) {
		std::vector<double> x{0}, y{0};
		double slope = u(rng);
		for (int k = 1; k < 8; ++k) {
			slope += 2 * u(rng);
			x.push_back(x.back() + 1 + 5 * u(rng));
			y.push_back(y.back() + slope * (x.back() - x[x.size() - 2]));
		}
		const MeritCurve curve(x, y);
		ASSERT_TRUE(curve.convex());
		DiscreteDensity d;
		double total = 0;
		for (int k = 0; k < 10; ++k) {
			d.support.push_back(x.back() * u(rng));
			d.prob.push_back(u(rng) + 1e-3);
			total += d.prob.back();
		}
		for (double &p : d.prob) {
			p /= total;
		}
		const auto g = jensen_gap(curve, d);
		EXPECT_GE(g.mean_of_mo, g.mo_of_mean - 1e-9);
	}
}

TEST(Jensen, InvalidCurvesAndDensities) {
	EXPECT_THROW(MeritCurve({0, 1}, {1, 0}), std::invalid_argument);
	EXPECT_THROW(MeritCurve({0, 0}, {0, 1}), std::invalid_argument);
	EXPECT_FALSE(MeritCurve({0, 1, 2}, {0, 5, 6}).convex());
	const MeritCurve c({0, 1}, {0, 1});
	EXPECT_DOUBLE_EQ(c(3.0), 3.0);
	EXPECT_THROW(jensen_gap(c, {{1.0}, {0.5}}), std::invalid_argument);
}
