#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace epfq {

/// Calendar day (ISO-8601), stored as a day count since 1970-01-01.
class DayDate {
public:
	constexpr DayDate() = default;
	constexpr explicit DayDate(std::chrono::sys_days days) : serial_(days.time_since_epoch().count()) {}

	static DayDate from_ymd(int year, unsigned month, unsigned day);
	/// Parses "YYYY-MM-DD"; throws std::invalid_argument on malformed or impossible dates.
	static DayDate parse(std::string_view iso);
	static constexpr DayDate from_serial(int serial) {
		DayDate d;
		d.serial_ = serial;
		return d;
	}

	std::string iso() const;
	constexpr int serial() const { return serial_; }
	std::chrono::sys_days sys_days() const { return std::chrono::sys_days{std::chrono::days{serial_}}; }

	/// 1 = Monday ... 7 = Sunday.
	unsigned iso_weekday() const;

	constexpr DayDate operator+(int days) const { return from_serial(serial_ + days); }
	constexpr DayDate operator-(int days) const { return from_serial(serial_ - days); }
	constexpr int operator-(DayDate other) const { return serial_ - other.serial_; }
	constexpr DayDate &operator++() {
		++serial_;
		return *this;
	}
	constexpr auto operator<=>(const DayDate &) const = default;

private:
	int serial_ = 0;
};

} // namespace epfq
