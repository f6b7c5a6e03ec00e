#include "epfq/panel.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "epfq/csv.hpp"

namespace epfq {

HourlyPanel::HourlyPanel(std::string name, DayDate first_day, HourlyMatrix values)
    : name_(std::move(name)), first_day_(first_day), values_(std::move(values)) {
	if (values_.rows() < 1) {
		throw std::invalid_argument("panel '" + name_ + "' must hold at least one day");
	}
	if (!values_.allFinite()) {
		throw std::invalid_argument("panel '" + name_ + "' contains non-finite values");
	}
}

int HourlyPanel::index_of(DayDate day) const {
	if (!contains(day)) {
		throw std::out_of_range("panel '" + name_ + "' has no day " + day.iso() + " (covers " + first_day_.iso() +
		                        " .. " + last_day().iso() + ")");
	}
	return day - first_day_;
}

HourlyPanel normalize_dst(const std::vector<Observation> &raw, std::string name) {
	if (raw.empty()) {
		throw std::runtime_error("series '" + name + "': no observations");
	}
	DayDate first = raw.front().date;
	DayDate last = raw.front().date;
	for (const auto &obs : raw) {
		if (obs.hour < 1 || obs.hour > kHoursPerDay) {
			throw std::runtime_error("series '" + name + "': hour " + std::to_string(obs.hour) + " on " +
			                         obs.date.iso() + " outside 1..24");
		}
		first = std::min(first, obs.date);
		last = std::max(last, obs.date);
	}
	const int n_days = last - first + 1;

	// per slot: sum and count
	std::vector<double> sum(static_cast<std::size_t>(n_days) * kHoursPerDay, 0.0);
	std::vector<int> count(sum.size(), 0);
	for (const auto &obs : raw) {
		const auto slot = static_cast<std::size_t>(obs.date - first) * kHoursPerDay + (obs.hour - 1);
		sum[slot] += obs.value;
		if (++count[slot] > 2) {
			throw std::runtime_error("series '" + name + "': more than two readings for hour " +
			                         std::to_string(obs.hour) + " on " + obs.date.iso());
		}
	}

	HourlyMatrix values(n_days, kHoursPerDay);
	for (int d = 0; d < n_days; ++d) {
		int missing = 0;
		for (int h = 0; h < kHoursPerDay; ++h) {
			const auto slot = static_cast<std::size_t>(d) * kHoursPerDay + h;
			if (count[slot] == 0) {
				++missing;
				values(d, h) = std::nan("");
			} else {
				values(d, h) = sum[slot] / count[slot];
			}
		}
		if (missing > 1) {
			throw std::runtime_error("series '" + name + "': gap longer than one hour on " + (first + d).iso() + " (" +
			                         std::to_string(missing) + " hours missing)");
		}
	}

	const auto n_slots = static_cast<std::ptrdiff_t>(sum.size());
	double *flat = values.data();
	for (std::ptrdiff_t slot = 0; slot < n_slots; ++slot) {
		if (count[static_cast<std::size_t>(slot)] != 0) {
			continue;
		}
		const auto day = first + static_cast<int>(slot / kHoursPerDay);
		if (slot == 0 || slot + 1 == n_slots || count[static_cast<std::size_t>(slot - 1)] == 0 ||
		    count[static_cast<std::size_t>(slot + 1)] == 0) {
			throw std::runtime_error("series '" + name + "': gap longer than one hour on " + day.iso() +
			                         " (missing hour has no observed neighbours)");
		}
		flat[slot] = 0.5 * (flat[slot - 1] + flat[slot + 1]);
	}
	return HourlyPanel(std::move(name), first, std::move(values));
}

std::vector<Observation> to_observations(const HourlyPanel &panel) {
	std::vector<Observation> out;
	out.reserve(static_cast<std::size_t>(panel.n_days()) * kHoursPerDay);
	for (int d = 0; d < panel.n_days(); ++d) {
		for (int h = 1; h <= kHoursPerDay; ++h) {
			out.push_back({panel.first_day() + d, h, 0, panel.values()(d, h - 1)});
		}
	}
	return out;
}

std::vector<Observation> aggregate_quarter_hourly(const std::vector<Observation> &raw, AggregationMode mode) {
	std::vector<Observation> hourly;
	std::size_t i = 0;
	while (i < raw.size()) {
		std::size_t j = i;
		while (j < raw.size() && raw[j].date == raw[i].date && raw[j].hour == raw[i].hour) {
			if (raw[j].quarter < 1 || raw[j].quarter > 4) {
				throw std::runtime_error("quarter " + std::to_string(raw[j].quarter) + " outside 1..4 on " +
				                         raw[j].date.iso());
			}
			++j;
		}
		const std::size_t n = j - i;
		if (n != 4 && n != 8) {
			throw std::runtime_error("hour " + std::to_string(raw[i].hour) + " on " + raw[i].date.iso() + " has " +
			                         std::to_string(n) + " quarter-hour readings (expected 4)");
		}
		for (std::size_t block = i; block < j; block += 4) {
			double total = 0.0;
			for (std::size_t k = block; k < block + 4; ++k) {
				total += raw[k].value;
			}
			hourly.push_back({raw[i].date, raw[i].hour, 0, mode == AggregationMode::Mean ? total / 4.0 : total});
		}
		i = j;
	}
	return hourly;
}

namespace {

void require_same_calendar(const HourlyPanel &a, const HourlyPanel &b) {
	if (a.first_day() != b.first_day() || a.n_days() != b.n_days()) {
		throw std::invalid_argument("panels '" + a.name() + "' and '" + b.name() + "' cover different day ranges");
	}
}

} // namespace

DerivedFundamentals derive_fundamentals(const HourlyPanel &load, const HourlyPanel &solar, const HourlyPanel &wind) {
	require_same_calendar(load, solar);
	require_same_calendar(load, wind);
	HourlyMatrix res = solar.values() + wind.values();
	HourlyMatrix res_load = load.values() - res;
	return {HourlyPanel("RES", load.first_day(), std::move(res)),
	        HourlyPanel("ResLoad", load.first_day(), std::move(res_load))};
}

HourlyPanel slice_window(const HourlyPanel &panel, DayDate end_day, int length_days) {
	if (length_days < 1) {
		throw std::out_of_range("window length must be positive");
	}
	const DayDate start = end_day - (length_days - 1);
	if (!panel.contains(start) || !panel.contains(end_day)) {
		throw std::out_of_range("window " + start.iso() + " .. " + end_day.iso() + " outside panel '" + panel.name() +
		                        "' (" + panel.first_day().iso() + " .. " + panel.last_day().iso() + ")");
	}
	return HourlyPanel(panel.name(), start, panel.values().middleRows(panel.index_of(start), length_days));
}

const CommoditySeries::Closes &CommoditySeries::lagged(DayDate day, int lag) const {
	auto it = closes_.upper_bound(day - lag);
	if (it == closes_.begin()) {
		throw std::out_of_range("no commodity close at or before " + (day - lag).iso());
	}
	return std::prev(it)->second;
}

DayDate CommoditySeries::lagged_date(DayDate day, int lag) const {
	auto it = closes_.upper_bound(day - lag);
	if (it == closes_.begin()) {
		throw std::out_of_range("no commodity close at or before " + (day - lag).iso());
	}
	return std::prev(it)->first;
}

std::array<double, 7> weekday_dummies(DayDate day) {
	std::array<double, 7> d{};
	d[day.iso_weekday() - 1] = 1.0;
	return d;
}

std::vector<Observation> read_observations_csv(const std::string &path) {
	const auto table = csv::read_file(path);
	const auto c_date = table.column("date", path);
	const auto c_hour = table.column("hour", path);
	const auto c_value = table.column("value", path);
	const bool quarterly = table.has_column("quarter");
	const auto c_quarter = quarterly ? table.column("quarter", path) : 0;
	std::vector<Observation> out;
	out.reserve(table.rows.size());
	for (std::size_t r = 0; r < table.rows.size(); ++r) {
		const auto &row = table.rows[r];
		const auto ctx = path + ":" + std::to_string(r + 2);
		Observation obs;
		obs.date = DayDate::parse(row[c_date]);
		obs.hour = csv::to_int(row[c_hour], ctx);
		obs.quarter = quarterly ? csv::to_int(row[c_quarter], ctx) : 0;
		obs.value = csv::to_double(row[c_value], ctx);
		out.push_back(obs);
	}
	return out;
}

HourlyPanel read_panel_csv(const std::string &path, std::string name, AggregationMode mode) {
	auto obs = read_observations_csv(path);
	const bool quarterly = !obs.empty() && obs.front().quarter != 0;
	if (quarterly) {
		obs = aggregate_quarter_hourly(obs, mode);
	}
	return normalize_dst(obs, std::move(name));
}

void write_panel_csv(const HourlyPanel &panel, const std::string &path) {
	std::ofstream out(path);
	if (!out) {
		throw std::runtime_error("cannot write '" + path + "'");
	}
	out << "date,hour,value\n";
	for (int d = 0; d < panel.n_days(); ++d) {
		const auto iso = (panel.first_day() + d).iso();
		for (int h = 1; h <= kHoursPerDay; ++h) {
			out << iso << ',' << h << ',' << csv::format(panel.values()(d, h - 1)) << '\n';
		}
	}
}

CommoditySeries read_commodities_csv(const std::string &path) {
	const auto table = csv::read_file(path);
	const auto c_date = table.column("date", path);
	std::array<std::size_t, 4> cols{};
	for (std::size_t k = 0; k < 4; ++k) {
		cols[k] = table.column(kCommodityNames[k], path);
	}
	CommoditySeries series;
	for (std::size_t r = 0; r < table.rows.size(); ++r) {
		const auto &row = table.rows[r];
		const auto ctx = path + ":" + std::to_string(r + 2);
		CommoditySeries::Closes closes{};
		for (std::size_t k = 0; k < 4; ++k) {
			closes[k] = csv::to_double(row[cols[k]], ctx);
		}
		series.set(DayDate::parse(row[c_date]), closes);
	}
	return series;
}

void write_commodities_csv(const CommoditySeries &series, const std::string &path) {
	std::ofstream out(path);
	if (!out) {
		throw std::runtime_error("cannot write '" + path + "'");
	}
	out << "date,coal,gas,oil,eua\n";
	for (const auto &[day, closes] : series.closes()) {
		out << day.iso();
		for (double c : closes) {
			out << ',' << csv::format(c);
		}
		out << '\n';
	}
}

} // namespace epfq
