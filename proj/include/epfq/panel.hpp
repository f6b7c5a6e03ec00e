#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "epfq/day_date.hpp"

namespace epfq {

inline constexpr int kHoursPerDay = 24;

/// Day-major storage: row = day, column = hour (column 0 holds hour 1).
using HourlyMatrix = Eigen::Matrix<double, Eigen::Dynamic, kHoursPerDay, Eigen::RowMajor>;

/// One hourly series on a contiguous day calendar. Immutable once built.
class HourlyPanel {
public:
	HourlyPanel() = default;
	/// Throws std::invalid_argument when empty or non-finite.
	HourlyPanel(std::string name, DayDate first_day, HourlyMatrix values);

	const std::string &name() const { return name_; }
	DayDate first_day() const { return first_day_; }
	DayDate last_day() const { return first_day_ + static_cast<int>(values_.rows()) - 1; }
	int n_days() const { return static_cast<int>(values_.rows()); }
	bool contains(DayDate day) const { return day >= first_day_ && day <= last_day(); }

	/// Row index of `day`; throws std::out_of_range outside the calendar.
	int index_of(DayDate day) const;
	/// Value for `day` at `hour` in 1..24.
	double at(DayDate day, int hour) const { return values_(index_of(day), hour - 1); }
	auto row(DayDate day) const { return values_.row(index_of(day)); }

	const HourlyMatrix &values() const { return values_; }

	HourlyPanel renamed(std::string name) const { return HourlyPanel(std::move(name), first_day_, values_); }

	friend bool operator==(const HourlyPanel &a, const HourlyPanel &b) {
		return a.first_day_ == b.first_day_ && a.values_.rows() == b.values_.rows() && a.values_ == b.values_;
	}

private:
	std::string name_;
	DayDate first_day_;
	HourlyMatrix values_;
};

/// One raw reading before DST repair. `quarter` is 0 for hourly data, 1..4 otherwise.
struct Observation {
	DayDate date;
	int hour = 0;
	int quarter = 0;
	double value = 0.0;
};

/// Repairs the CET/CEST transitions: a single missing hour becomes the mean of its
/// neighbours (across midnight if needed) and a doubled hour becomes the mean of its two
/// readings. Throws std::runtime_error naming the day on longer gaps or >2 readings per slot.
HourlyPanel normalize_dst(const std::vector<Observation> &raw, std::string name = {});

/// Flattens a panel back to observations, in calendar order.
std::vector<Observation> to_observations(const HourlyPanel &panel);

enum class AggregationMode { Mean, Sum };

/// Collapses 4 quarter-hour readings per hour into one hourly reading. A group of 8 readings
/// (the doubled DST hour) yields two hourly readings; any other count is an error.
std::vector<Observation> aggregate_quarter_hourly(const std::vector<Observation> &raw,
                                                  AggregationMode mode = AggregationMode::Mean);

struct DerivedFundamentals {
	HourlyPanel res;
	HourlyPanel res_load;
};

/// RES = solar + wind and ResLoad = load - RES, elementwise.
DerivedFundamentals derive_fundamentals(const HourlyPanel &load, const HourlyPanel &solar, const HourlyPanel &wind);

/// Days [end_day - length + 1, end_day].
HourlyPanel slice_window(const HourlyPanel &panel, DayDate end_day, int length_days);

enum class Commodity { Coal = 0, Gas = 1, Oil = 2, Eua = 3 };
inline constexpr std::array<const char *, 4> kCommodityNames{"coal", "gas", "oil", "eua"};

/// Daily closing prices for coal, gas, oil and EUA on trading days only.
class CommoditySeries {
public:
	using Closes = std::array<double, 4>;

	void set(DayDate day, const Closes &closes) { closes_[day] = closes; }
	bool empty() const { return closes_.empty(); }
	std::size_t size() const { return closes_.size(); }
	const std::map<DayDate, Closes> &closes() const { return closes_; }

	/// Most recent close dated at or before `day - lag`. Throws std::out_of_range when none exists.
	const Closes &lagged(DayDate day, int lag = 2) const;
	/// Date of the close returned by lagged().
	DayDate lagged_date(DayDate day, int lag = 2) const;

private:
	std::map<DayDate, Closes> closes_;
};

/// D1..D7 with D1 = Monday.
std::array<double, 7> weekday_dummies(DayDate day);

// Canonical CSV I/O. Hourly: date,hour,value. Quarter-hourly: date,hour,quarter,value.
// Commodities: date,coal,gas,oil,eua.
std::vector<Observation> read_observations_csv(const std::string &path);
/// Reads hourly or quarter-hourly files (detected from the header) into a normalized panel.
HourlyPanel read_panel_csv(const std::string &path, std::string name,
                           AggregationMode mode = AggregationMode::Mean);
void write_panel_csv(const HourlyPanel &panel, const std::string &path);
CommoditySeries read_commodities_csv(const std::string &path);
void write_commodities_csv(const CommoditySeries &series, const std::string &path);

} // namespace epfq
