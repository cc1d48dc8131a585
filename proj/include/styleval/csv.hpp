#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace styleval::csv {

// RFC 4180 subset: comma separated, double-quoted fields may hold commas and
// doubled quotes, no embedded newlines.
std::vector<std::string> split_line(std::string_view line);
std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

// Splits on '\n', dropping a trailing '\r' and the final empty line.
std::vector<std::string_view> lines(std::string_view text);

}  // namespace styleval::csv
