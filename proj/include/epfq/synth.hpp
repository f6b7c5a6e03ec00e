#pragma once

#include <cstdint>

#include "epfq/models.hpp"

namespace epfq {

/// Simulated market with known structure: actual load, solar and wind; day-ahead point
/// forecasts whose calibration drifts slowly (capacity additions the forecaster lags behind);
/// prices from a convex merit order in residual load plus gas, weekday and AR(1) effects.
struct SyntheticMarket {
	MarketData data; ///< prices, point forecasts, commodity closes
	HourlyPanel load;
	HourlyPanel solar;
	HourlyPanel wind;
};

/// Price (EUR/MWh) at residual load `gw` before gas, weekday and noise terms.
double synthetic_merit_order(double gw);

/// Deterministic per (seed, n_days, start).
SyntheticMarket generate_synthetic_market(std::uint64_t seed, int n_days,
                                          DayDate start = DayDate::from_ymd(2015, 1, 1));

} // namespace epfq
