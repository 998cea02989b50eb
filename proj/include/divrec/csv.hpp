#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace divrec::csv {

/// Quotes a field when it contains a comma, quote or line break.
std::string escape(std::string_view field);

/// Splits one CSV record (no trailing newline), honouring double quotes.
std::vector<std::string> split_line(std::string_view line);

/// Splits text into lines, dropping '\r' and a final empty line.
std::vector<std::string_view> lines(std::string_view text);

std::string format_real(double v);

} // namespace divrec::csv
