#include "epfq/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <stdexcept>

namespace epfq::csv {

namespace {

std::vector<std::string> split(std::string_view line) {
	std::vector<std::string> cells;
	std::size_t start = 0;
	while (true) {
		const auto pos = line.find(',', start);
		auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
		while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) {
			cell.remove_prefix(1);
		}
		while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
			cell.remove_suffix(1);
		}
		cells.emplace_back(cell);
		if (pos == std::string_view::npos) {
			break;
		}
		start = pos + 1;
	}
	return cells;
}

} // namespace

std::size_t Table::column(std::string_view name, std::string_view source) const {
	const auto it = std::find(header.begin(), header.end(), name);
	if (it == header.end()) {
		throw std::runtime_error(std::string(source) + ": missing column '" + std::string(name) + "'");
	}
	return static_cast<std::size_t>(it - header.begin());
}

bool Table::has_column(std::string_view name) const {
	return std::find(header.begin(), header.end(), name) != header.end();
}

Table read(std::istream &in, std::string_view source) {
	Table table;
	std::string line;
	bool have_header = false;
	std::size_t line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (!have_header) {
			// strip UTF-8 BOM
			if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
				line.erase(0, 3);
			}
			table.header = split(line);
			have_header = true;
			continue;
		}
		if (line.empty() || line == "\r") {
			continue;
		}
		auto cells = split(line);
		if (cells.size() != table.header.size()) {
			throw std::runtime_error(std::string(source) + ":" + std::to_string(line_no) + ": expected " +
			                         std::to_string(table.header.size()) + " cells, got " +
			                         std::to_string(cells.size()));
		}
		table.rows.push_back(std::move(cells));
	}
	if (!have_header) {
		throw std::runtime_error(std::string(source) + ": empty file (header row required)");
	}
	return table;
}

Table read_file(const std::string &path) {
	std::ifstream in(path);
	if (!in) {
		throw std::runtime_error("cannot open '" + path + "'");
	}
	return read(in, path);
}

double to_double(std::string_view cell, std::string_view context) {
	double value = 0.0;
	auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
	if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
		throw std::runtime_error(std::string(context) + ": not a finite number: '" + std::string(cell) + "'");
	}
	return value;
}

int to_int(std::string_view cell, std::string_view context) {
	int value = 0;
	auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
	if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
		throw std::runtime_error(std::string(context) + ": not an integer: '" + std::string(cell) + "'");
	}
	return value;
}

std::string format(double value) {
	char buf[32];
	auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
	return std::string(buf, ptr);
}

} // namespace epfq::csv
