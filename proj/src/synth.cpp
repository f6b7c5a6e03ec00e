#include "epfq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace epfq {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Independent streams per component, so adding draws to one leaves the others unchanged.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t component) {
	std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
	                  static_cast<std::uint32_t>(component)};
	return std::mt19937_64(seq);
}

double logistic(double z) {
	return 1.0 / (1.0 + std::exp(-z));
}

} // namespace

double synthetic_merit_order(double gw) {
	const double over = std::max(0.0, gw - 25.0);
	return 15.0 + 0.9 * gw + 0.035 * over * over;
}

SyntheticMarket generate_synthetic_market(std::uint64_t seed, int n_days, DayDate start) {
	if (n_days < 30) {
		throw std::invalid_argument("synthetic market needs at least 30 days");
	}
	const auto n = static_cast<Eigen::Index>(n_days);
	HourlyMatrix load(n, kHoursPerDay), solar(n, kHoursPerDay), wind(n, kHoursPerDay);
	HourlyMatrix load_fc(n, kHoursPerDay), solar_fc(n, kHoursPerDay), wind_fc(n, kHoursPerDay);
	HourlyMatrix price(n, kHoursPerDay);
	std::normal_distribution<double> normal;

	auto rng_load = stream(seed, 1);
	auto rng_solar = stream(seed, 2);
	auto rng_wind = stream(seed, 3);
	auto rng_fc = stream(seed, 4);
	auto rng_price = stream(seed, 5);
	auto rng_comm = stream(seed, 6);

	double u_load = 0.0;  // hourly AR(1) load deviation
	double z_wind = 0.0;  // hourly AR(1) wind latent
	double cloud = 0.6;   // daily AR(1) cloudiness factor
	double eps_price = 0.0;

	std::array<double, 4> comm{60.0, 20.0, 50.0, 8.0}; // coal, gas, oil, eua
	CommoditySeries commodities;

	for (Eigen::Index i = 0; i < n; ++i) {
		const DayDate day = start + static_cast<int>(i);
		const double t = static_cast<double>(i);
		const auto ymd = std::chrono::year_month_day{day.sys_days()};
		const double doy =
		    static_cast<double>((day.sys_days() - std::chrono::sys_days{ymd.year() / std::chrono::January / 1}).count());
		const unsigned weekday = day.iso_weekday();
		const bool weekend = weekday >= 6;

		// forecast calibration drift: actual = growth * (what the forecaster anticipates)
		const double g_load = 1.0 + 0.04 * std::sin(kTwoPi * t / 700.0);
		const double g_res = 1.0 + 0.35 * t / 1000.0 + 0.08 * std::sin(kTwoPi * t / 500.0);

		cloud = std::clamp(0.6 + 0.7 * (cloud - 0.6) + 0.15 * normal(rng_solar), 0.15, 1.0);
		const double half_day = 4.5 + 3.0 * std::cos(kTwoPi * (doy - 172.0) / 365.25);
		const double wind_season = 1.0 + 0.25 * std::cos(kTwoPi * (doy - 15.0) / 365.25);

		for (int h = 0; h < kHoursPerDay; ++h) {
			const double hour = h + 1.0;
			// load
			u_load = 0.95 * u_load + std::sqrt(1.0 - 0.95 * 0.95) * normal(rng_load);
			const double daily = std::sin(std::numbers::pi * std::clamp((hour - 5.0) / 17.0, 0.0, 1.0));
			const double base_load = 45000.0 + 12000.0 * daily - (weekend ? 6000.0 : 0.0) +
			                         4000.0 * std::cos(kTwoPi * (doy - 15.0) / 365.25);
			const double load_pot = base_load + 1500.0 * u_load;
			load(i, h) = g_load * load_pot;

			// solar: zero outside daylight by construction
			const double offset = std::abs(hour - 13.0);
			const double sun = offset < half_day ? std::pow(std::cos(std::numbers::pi * offset / (2.0 * half_day)), 1.5)
			                                     : 0.0;
			const double solar_pot = 22000.0 * sun * cloud;
			solar(i, h) = g_res * solar_pot;

			// wind
			z_wind = 0.97 * z_wind + std::sqrt(1.0 - 0.97 * 0.97) * normal(rng_wind);
			const double wind_pot = 25000.0 * wind_season * logistic(1.6 * z_wind - 0.4);
			wind(i, h) = g_res * wind_pot;

			// day-ahead forecasts of the anticipated level, heteroskedastic noise with a floor
			load_fc(i, h) = load_pot + (500.0 + 0.02 * load_pot) * normal(rng_fc);
			const double e_solar = normal(rng_fc);
			solar_fc(i, h) = solar_pot > 0.0 ? std::max(0.0, solar_pot * (1.0 + 0.12 * e_solar) + 150.0 * normal(rng_fc))
			                                 : 0.0;
			wind_fc(i, h) = std::max(0.0, wind_pot * (1.0 + 0.15 * normal(rng_fc)) + 400.0 * normal(rng_fc));

			// price
			eps_price = 0.7 * eps_price + 4.0 * std::sqrt(1.0 - 0.49) * normal(rng_price);
			const double residual_gw = (load(i, h) - solar(i, h) - wind(i, h)) / 1000.0;
			const double weekday_effect = weekday == 6 ? -3.0 : (weekday == 7 ? -6.0 : 0.0);
			price(i, h) = synthetic_merit_order(residual_gw) + 0.8 * (comm[1] - 20.0) + weekday_effect + eps_price;
		}
		// commodity closes on weekdays; the price above used the previous close
		if (!weekend) {
			comm[0] = std::max(5.0, comm[0] + 0.8 * normal(rng_comm));
			comm[1] = std::max(2.0, comm[1] + 0.4 * normal(rng_comm));
			comm[2] = std::max(5.0, comm[2] + 0.7 * normal(rng_comm));
			comm[3] = std::max(1.0, comm[3] + 0.02 + 0.15 * normal(rng_comm));
			commodities.set(day, comm);
		}
	}

	SyntheticMarket m;
	m.load = HourlyPanel("Load", start, std::move(load));
	m.solar = HourlyPanel("Solar", start, std::move(solar));
	m.wind = HourlyPanel("Wind", start, std::move(wind));
	m.data.price = HourlyPanel("price", start, std::move(price));
	m.data.load_fc = HourlyPanel("Load_fc", start, std::move(load_fc));
	m.data.solar_fc = HourlyPanel("Solar_fc", start, std::move(solar_fc));
	m.data.wind_fc = HourlyPanel("Wind_fc", start, std::move(wind_fc));
	m.data.commodities = std::move(commodities);
	return m;
}

} // namespace epfq
