#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace crts {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// trim + ASCII case-fold; the normalization used for index tokens and
// name/key comparisons.
std::string normalize_token(std::string_view s);

// Unit comparison form: trim, case-fold, "percent" -> "%".
std::string normalize_unit(std::string_view s);

// true when s is non-empty and free of whitespace
bool is_token(std::string_view s);

// Shortest decimal representation that parses back to the same double.
std::string format_number(double v);

// Full-string parse; rejects trailing garbage, NaN and infinities.
std::optional<double> parse_number(std::string_view s);

}  // namespace crts
