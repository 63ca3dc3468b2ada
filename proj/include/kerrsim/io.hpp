#pragma once

// Locale-independent number formatting and CSV helpers. Doubles are written in
// the shortest form that round-trips, so identical values give identical bytes.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace kerrsim {

std::string format_number(double x);
// Throws InputError naming `what` on malformed input.
double parse_number(std::string_view text, std::string_view what);
long long parse_integer(std::string_view text, std::string_view what);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

// Writes one CSV row terminated by '\n'.
void write_csv_row(std::ostream& out, const std::vector<std::string>& cells);

}  // namespace kerrsim
