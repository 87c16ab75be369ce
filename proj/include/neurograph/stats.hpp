#pragma once

#include <optional>
#include <vector>

namespace neurograph {

// Sample Pearson correlation. Returns nullopt (rendered downstream as NA)
// when either series is shorter than 3 points or has zero variance; a NA is
// never collapsed to 0.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

// 1-based ranks; tied values receive the mean rank of their span.
std::vector<double> average_ranks(const std::vector<double>& values);

// Spearman rank correlation: Pearson of the tie-averaged rank series.
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace neurograph
