#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "epfq/csv.hpp"
#include "epfq/panel.hpp"

using namespace epfq;

namespace {

HourlyPanel ramp(DayDate first, int days, double offset = 0.0) {
	HourlyMatrix m(days, kHoursPerDay);
	for (int d = 0; d < days; ++d) {
		for (int h = 0; h < kHoursPerDay; ++h) {
			m(d, h) = offset + 100.0 * d + h;
		}
	}
	return HourlyPanel("ramp", first, m);
}

std::vector<Observation> full_day(DayDate day, double base) {
	std::vector<Observation> obs;
	for (int h = 1; h <= kHoursPerDay; ++h) {
		obs.push_back({day, h, 0, base + h});
	}
	return obs;
}

std::string tmp_path(const std::string &name) {
	std::filesystem::create_directories(EPFQ_TEST_TMP);
	return (std::filesystem::path(EPFQ_TEST_TMP) / name).string();
}

} // namespace

TEST(DayDate, ParsesAndPrintsIso) {
	const auto d = DayDate::parse("2017-12-29");
	EXPECT_EQ(d.iso(), "2017-12-29");
	EXPECT_EQ(d, DayDate::from_ymd(2017, 12, 29));
	EXPECT_THROW(DayDate::parse("2017-02-30"), std::invalid_argument);
	EXPECT_THROW(DayDate::parse("2017-2-3"), std::invalid_argument);
	EXPECT_THROW(DayDate::parse("garbage"), std::invalid_argument);
}

TEST(DayDate, WeekdayIsMondayBased) {
	EXPECT_EQ(DayDate::parse("2024-01-01").iso_weekday(), 1u); // Monday
	EXPECT_EQ(DayDate::parse("2017-12-31").iso_weekday(), 7u); // Sunday
	EXPECT_EQ(DayDate::parse("2017-12-29").iso_weekday(), 5u);
}

TEST(DayDate, DayArithmeticAcrossLeapYears) {
	const auto a = DayDate::parse("2015-12-31");
	EXPECT_EQ((a + 366).iso(), "2016-12-31");
	EXPECT_EQ(DayDate::parse("2023-12-31") - DayDate::parse("2017-12-28") + 1, 2195);
}

TEST(Dst, MissingHourIsMeanOfNeighbours) {
	const auto day = DayDate::parse("2020-03-29");
	std::vector<Observation> obs;
	for (int h = 1; h <= kHoursPerDay; ++h) {
		if (h != 3) {
			obs.push_back({day, h, 0, h == 2 ? 10.0 : (h == 4 ? 14.0 : 1.0)});
		}
	}
	const auto p = normalize_dst(obs, "x");
	EXPECT_DOUBLE_EQ(p.at(day, 3), 12.0);
}

TEST(Dst, MissingFirstHourUsesPreviousDay) {
	const auto d0 = DayDate::parse("2020-03-28");
	auto obs = full_day(d0, 0.0); // hour 24 = 24
	auto next = full_day(d0 + 1, 100.0);
	next.erase(next.begin()); // hour 1 missing, hour 2 = 102
	obs.insert(obs.end(), next.begin(), next.end());
	const auto p = normalize_dst(obs, "x");
	EXPECT_DOUBLE_EQ(p.at(d0 + 1, 1), 0.5 * (24.0 + 102.0));
}

TEST(Dst, DoubledHourIsAveraged) {
	const auto day = DayDate::parse("2020-10-25");
	auto obs = full_day(day, 0.0);
	obs.push_back({day, 3, 0, 9.0}); // second reading of hour 3 (first is 3)
	const auto p = normalize_dst(obs, "x");
	EXPECT_DOUBLE_EQ(p.at(day, 3), 6.0);
	EXPECT_EQ(p.n_days(), 1);
}

TEST(Dst, LongGapIsRejectedNamingTheDay) {
	const auto day = DayDate::parse("2020-06-01");
	auto obs = full_day(day, 0.0);
	obs.erase(obs.begin() + 5, obs.begin() + 7);
	try {
		normalize_dst(obs, "x");
		FAIL();
	} catch (const std::runtime_error &e) {
		EXPECT_NE(std::string(e.what()).find("2020-06-01"), std::string::npos);
	}
	auto triple = full_day(day, 0.0);
	triple.push_back({day, 3, 0, 1.0});
	triple.push_back({day, 3, 0, 1.0});
	EXPECT_THROW(normalize_dst(triple, "x"), std::runtime_error);
}

TEST(Dst, PropertyEveryOutputDayHas24FiniteValues) {
	std::mt19937_64 rng(7);
	for (int rep = 0; rep < 50; ++rep) {
		const auto first = DayDate::parse("2019-01-01") + static_cast<int>(rng() % 300);
		const int days = 1 + static_cast<int>(rng() % 10);
		std::vector<Observation> obs;
		for (int d = 0; d < days; ++d) {
			auto day = full_day(first + d, 10.0 * d);
			const auto r = rng() % 3;
			if (r == 1 && !(d == 0) && !(d == days - 1)) {
				day.erase(day.begin() + static_cast<long>(rng() % 24));
			} else if (r == 2) {
				day.push_back(day[rng() % 24]);
			}
			obs.insert(obs.end(), day.begin(), day.end());
		}
		const auto p = normalize_dst(obs, "x");
		EXPECT_EQ(p.n_days(), days);
		EXPECT_TRUE(p.values().allFinite());
	}
}

TEST(QuarterHours, MeanAndSumAggregation) {
	const auto day = DayDate::parse("2021-05-05");
	std::vector<Observation> raw;
	for (int h = 1; h <= 2; ++h) {
		for (int q = 1; q <= 4; ++q) {
			raw.push_back({day, h, q, 1.0 * q + 10.0 * h});
		}
	}
	const auto mean = aggregate_quarter_hourly(raw);
	ASSERT_EQ(mean.size(), 2u);
	EXPECT_DOUBLE_EQ(mean[0].value, 12.5);
	EXPECT_DOUBLE_EQ(mean[1].value, 22.5);
	const auto sum = aggregate_quarter_hourly(raw, AggregationMode::Sum);
	EXPECT_DOUBLE_EQ(sum[0].value, 50.0);
	raw.pop_back();
	EXPECT_THROW(aggregate_quarter_hourly(raw), std::runtime_error);
}

TEST(QuarterHours, DoubledDstHourYieldsTwoReadings) {
	const auto day = DayDate::parse("2021-10-31");
	std::vector<Observation> raw;
	for (int k = 0; k < 8; ++k) {
		raw.push_back({day, 3, 1 + k % 4, k < 4 ? 4.0 : 8.0});
	}
	const auto out = aggregate_quarter_hourly(raw);
	ASSERT_EQ(out.size(), 2u);
	EXPECT_DOUBLE_EQ(out[0].value, 4.0);
	EXPECT_DOUBLE_EQ(out[1].value, 8.0);
}

TEST(Fundamentals, ResAndResidualLoad) {
	const auto first = DayDate::parse("2020-01-01");
	const auto load = ramp(first, 3, 1000.0);
	const auto solar = ramp(first, 3, 5.0);
	const auto wind = ramp(first, 3, 7.0);
	const auto der = derive_fundamentals(load, solar, wind);
	for (int d = 0; d < 3; ++d) {
		for (int h = 1; h <= 24; ++h) {
			const auto day = first + d;
			EXPECT_DOUBLE_EQ(der.res.at(day, h), solar.at(day, h) + wind.at(day, h));
			EXPECT_DOUBLE_EQ(der.res_load.at(day, h), load.at(day, h) - der.res.at(day, h));
		}
	}
	EXPECT_THROW(derive_fundamentals(load, ramp(first + 1, 3), wind), std::invalid_argument);
}

TEST(Window, SliceEndsOnDayAndSpansLength) {
	const auto p = ramp(DayDate::parse("2015-01-01"), 1200);
	const auto w = slice_window(p, DayDate::parse("2017-12-28"), 728);
	EXPECT_EQ(w.n_days(), 728);
	EXPECT_EQ(w.last_day().iso(), "2017-12-28");
	EXPECT_EQ(w.first_day().iso(), "2016-01-01");
	EXPECT_EQ(slice_window(p, DayDate::parse("2017-12-28"), 729).first_day().iso(), "2015-12-31");
	EXPECT_EQ(w.at(w.first_day(), 5), p.at(w.first_day(), 5));
	EXPECT_THROW(slice_window(p, DayDate::parse("2015-01-10"), 20), std::out_of_range);
}

TEST(Commodities, LaggedCloseSkipsNonTradingDays) {
	CommoditySeries s;
	s.set(DayDate::parse("2024-01-05"), {1, 2, 3, 4}); // Friday
	s.set(DayDate::parse("2024-01-08"), {5, 6, 7, 8}); // Monday
	// Tuesday d: d-2 = Sunday, so the Friday close applies
	EXPECT_EQ(s.lagged_date(DayDate::parse("2024-01-09")).iso(), "2024-01-05");
	EXPECT_EQ(s.lagged(DayDate::parse("2024-01-10"))[0], 5.0);
	EXPECT_THROW(s.lagged(DayDate::parse("2024-01-06")), std::out_of_range);
}

TEST(Calendar, WeekdayDummiesAreOneHot) {
	for (int k = 0; k < 14; ++k) {
		const auto day = DayDate::parse("2024-01-01") + k;
		const auto d = weekday_dummies(day);
		double sum = 0;
		for (double v : d) {
			sum += v;
		}
		EXPECT_EQ(sum, 1.0);
		EXPECT_EQ(d[static_cast<std::size_t>(k % 7)], 1.0);
	}
}

TEST(Csv, FormatRoundTripsDoubles) {
	std::mt19937_64 rng(1);
	std::uniform_real_distribution<double> u(-1e6, 1e6);
	for (int i = 0; i < 1000; ++i) {
		const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
		EXPECT_EQ(csv::to_double(csv::format(v), "x"), v);
	}
	EXPECT_THROW(csv::to_double("1.5x", "ctx"), std::runtime_error);
}

TEST(Csv, PanelRoundTrip) {
	const auto p = ramp(DayDate::parse("2020-02-27"), 4, 0.125);
	const auto path = tmp_path("panel_roundtrip.csv");
	write_panel_csv(p, path);
	const auto back = read_panel_csv(path, "ramp");
	EXPECT_EQ(back, p);
}

TEST(Csv, QuarterHourlyFileIsAggregated) {
	const auto path = tmp_path("quarter.csv");
	{
		std::ofstream out(path);
		out << "date,hour,quarter,value\n";
		for (int h = 1; h <= 24; ++h) {
			for (int q = 1; q <= 4; ++q) {
				out << "2021-01-04," << h << "," << q << "," << (h * 4 + q) << "\n";
			}
		}
	}
	const auto p = read_panel_csv(path, "q");
	EXPECT_DOUBLE_EQ(p.at(DayDate::parse("2021-01-04"), 2), 8 + 2.5);
	EXPECT_DOUBLE_EQ(read_panel_csv(path, "q", AggregationMode::Sum).at(DayDate::parse("2021-01-04"), 1), 4 * 4 + 10);
}

TEST(Csv, CommodityRoundTrip) {
	CommoditySeries s;
	s.set(DayDate::parse("2024-01-05"), {1.5, 2, 3, 4});
	s.set(DayDate::parse("2024-01-08"), {5, 6, 7, 8.25});
	const auto path = tmp_path("comm.csv");
	write_commodities_csv(s, path);
	const auto back = read_commodities_csv(path);
	EXPECT_EQ(back.closes(), s.closes());
}
