#pragma once

#include <span>

namespace hg::analytics {

double mean(std::span<const double> x);
// Population standard deviation (divides by n).
double population_std(std::span<const double> x);
// Linear interpolation between closest ranks on the sorted input; q in [0, 100].
double percentile(std::span<const double> sorted, double q);

}  // namespace hg::analytics
