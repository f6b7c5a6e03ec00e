#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace epfq::csv {

/// Header-indexed table of string cells. Comma separated, no quoting.
struct Table {
	std::vector<std::string> header;
	std::vector<std::vector<std::string>> rows;

	/// Index of a header column; throws naming `source` when absent.
	std::size_t column(std::string_view name, std::string_view source = {}) const;
	bool has_column(std::string_view name) const;
};

Table read(std::istream &in, std::string_view source);
Table read_file(const std::string &path);

double to_double(std::string_view cell, std::string_view context);
int to_int(std::string_view cell, std::string_view context);

/// Shortest representation that parses back to the same double.
std::string format(double value);

} // namespace epfq::csv
