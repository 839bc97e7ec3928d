#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kgpath {

// Casefold, trim, collapse internal whitespace, strip surrounding punctuation.
std::string normalize_answer(std::string_view s);

// 1 when the first prediction, normalized, is in the normalized gold set.
int hits_at_1(std::span<const std::string> predictions, std::span<const std::string> gold);

// Set F1 over normalized strings; 0 when either side is empty.
double f1_score(std::span<const std::string> predictions, std::span<const std::string> gold);

// Arithmetic mean; 0 for an empty list.
double macro_mean(std::span<const double> values);

}  // namespace kgpath
