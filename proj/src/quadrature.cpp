#include "stataction/quadrature.hpp"

#include <string>

namespace stataction {

std::vector<double> simpson_weights(std::span<const double> times) {
  const std::size_t nodes = times.size();
  if (nodes < 3) {
    throw GridTooCoarse("Simpson quadrature needs at least 3 nodes, got " + std::to_string(nodes));
  }
  std::vector<double> w(nodes, 0.0);
  const std::size_t intervals = nodes - 1;
  const std::size_t paired = intervals - intervals % 2;

  for (std::size_t i = 0; i + 2 <= paired; i += 2) {
    const double h0 = times[i + 1] - times[i];
    const double h1 = times[i + 2] - times[i + 1];
    const double hs = h0 + h1;
    w[i] += hs / 6.0 * (2.0 - h1 / h0);
    w[i + 1] += hs * hs * hs / (6.0 * h0 * h1);
    w[i + 2] += hs / 6.0 * (2.0 - h0 / h1);
  }
  if (intervals % 2 == 1) {
    // quadratic through the last three nodes, integrated over the last interval only
    const std::size_t n = nodes - 1;
    const double h0 = times[n - 1] - times[n - 2];
    const double h1 = times[n] - times[n - 1];
    w[n] += (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1));
    w[n - 1] += (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0);
    w[n - 2] -= h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
  }
  return w;
}

double simpson(std::span<const double> times, std::span<const double> values) {
  if (values.size() != times.size()) throw GridMismatch("simpson: value count differs from grid");
  const auto w = simpson_weights(times);
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) sum += w[i] * values[i];
  return sum;
}

std::vector<Vec> nodal_derivative(std::span<const double> times, std::span<const Vec> values) {
  const std::size_t nodes = times.size();
  if (values.size() != nodes) throw GridMismatch("nodal_derivative: value count differs from grid");
  if (nodes < 2) throw GridTooCoarse("nodal_derivative needs at least 2 nodes");
  std::vector<Vec> d(nodes);
  if (nodes == 2) {
    const Vec slope = (values[1] - values[0]) / (times[1] - times[0]);
    d[0] = slope;
    d[1] = slope;
    return d;
  }
  {
    const double h0 = times[1] - times[0];
    const double h1 = times[2] - times[1];
    d[0] = -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * values[0] + (h0 + h1) / (h0 * h1) * values[1] -
           h0 / (h1 * (h0 + h1)) * values[2];
  }
  for (std::size_t i = 1; i + 1 < nodes; ++i) {
    const double h0 = times[i] - times[i - 1];
    const double h1 = times[i + 1] - times[i];
    d[i] = -h1 / (h0 * (h0 + h1)) * values[i - 1] + (h1 - h0) / (h0 * h1) * values[i] +
           h0 / (h1 * (h0 + h1)) * values[i + 1];
  }
  {
    const std::size_t n = nodes - 1;
    const double h0 = times[n - 1] - times[n - 2];
    const double h1 = times[n] - times[n - 1];
    d[n] = h1 / (h0 * (h0 + h1)) * values[n - 2] - (h0 + h1) / (h0 * h1) * values[n - 1] +
           (2.0 * h1 + h0) / (h1 * (h0 + h1)) * values[n];
  }
  return d;
}

std::vector<Vec> cumulative_integral(std::span<const double> times, std::span<const Vec> values) {
  const std::size_t nodes = times.size();
  if (values.size() != nodes) throw GridMismatch("cumulative_integral: value count differs from grid");
  if (nodes == 0) return {};
  std::vector<Vec> out(nodes);
  out[0] = Vec::Zero(values[0].size());
  if (nodes == 1) return out;
  const auto d = nodal_derivative(times, values);
  for (std::size_t i = 0; i + 1 < nodes; ++i) {
    const double h = times[i + 1] - times[i];
    out[i + 1] = out[i] + 0.5 * h * (values[i] + values[i + 1]) - (h * h / 12.0) * (d[i + 1] - d[i]);
  }
  return out;
}

}  // namespace stataction
