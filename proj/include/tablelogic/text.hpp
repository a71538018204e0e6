#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared across modules.
namespace tablelogic::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Collapses every run of whitespace to a single space and trims the ends.
std::string collapse_whitespace(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

/// First run of ASCII digits (with optional leading '-') in `s`.
std::optional<long long> first_integer(std::string_view s);

/// Lower-cased alphanumeric word tokens.
std::vector<std::string> word_tokens(std::string_view s);

bool contains(std::string_view haystack, std::string_view needle);

}  // namespace tablelogic::text
