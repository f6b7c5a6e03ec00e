#include "epfq/day_date.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace epfq {

DayDate DayDate::from_ymd(int year, unsigned month, unsigned day) {
	const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
	if (!ymd.ok()) {
		throw std::invalid_argument("invalid calendar date " + std::to_string(year) + "-" + std::to_string(month) +
		                            "-" + std::to_string(day));
	}
	return DayDate{std::chrono::sys_days{ymd}};
}

DayDate DayDate::parse(std::string_view iso) {
	auto bad = [&] { return std::invalid_argument("malformed date '" + std::string(iso) + "' (expected YYYY-MM-DD)"); };
	if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
		throw bad();
	}
	int y = 0;
	unsigned m = 0, d = 0;
	auto field = [&](std::size_t pos, std::size_t len, auto &out) {
		const auto *first = iso.data() + pos;
		auto [ptr, ec] = std::from_chars(first, first + len, out);
		if (ec != std::errc{} || ptr != first + len) {
			throw bad();
		}
	};
	field(0, 4, y);
	field(5, 2, m);
	field(8, 2, d);
	return from_ymd(y, m, d);
}

std::string DayDate::iso() const {
	const std::chrono::year_month_day ymd{sys_days()};
	char buf[16];
	std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
	              static_cast<unsigned>(ymd.day()));
	return buf;
}

unsigned DayDate::iso_weekday() const {
	return std::chrono::weekday{sys_days()}.iso_encoding();
}

} // namespace epfq
