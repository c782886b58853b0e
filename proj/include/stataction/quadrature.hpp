#pragma once

#include <span>
#include <vector>

#include "stataction/linalg.hpp"

namespace stataction {

/// Composite Simpson weights on a (possibly non-uniform) strictly increasing grid.
/// An odd number of intervals is closed with a three-point end correction on the
/// last interval. Requires at least 3 nodes.
std::vector<double> simpson_weights(std::span<const double> times);

double simpson(std::span<const double> times, std::span<const double> values);

/// Cumulative integral F_i = ∫_{s_0}^{s_i} f of nodal samples, by the trapezoid rule with
/// Euler–Maclaurin endpoint corrections (fourth order for smooth f).
std::vector<Vec> cumulative_integral(std::span<const double> times, std::span<const Vec> values);

/// Nodal first derivative by second-order three-point differences.
std::vector<Vec> nodal_derivative(std::span<const double> times, std::span<const Vec> values);

}  // namespace stataction
