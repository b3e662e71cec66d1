#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace chitbl::cheb {

/// Machine zero for IEEE double precision (2^-52).
inline constexpr double kEps0 = 0x1p-52;

/// k-point Chebyshev extrema (Lobatto) grid on [a, b], ascending, both
/// endpoints included: x_j = (b+a)/2 - (b-a)/2 cos(j pi / (k-1)).
struct ChebGrid {
  double a = 0.0;
  double b = 0.0;
  std::vector<double> nodes;

  std::size_t size() const noexcept { return nodes.size(); }
};

ChebGrid extrema_grid(double a, double b, std::size_t k);

/// k-term Chebyshev expansion sum_j c_j T_j(u), u = (2x - (a+b)) / (b-a).
struct ChebExpansion {
  double a = 0.0;
  double b = 0.0;
  std::vector<double> coeffs;

  std::size_t size() const noexcept { return coeffs.size(); }

  /// Clenshaw evaluation. Requires x in [a, b].
  double operator()(double x) const;
  /// Clenshaw evaluation without the range check.
  double eval_unchecked(double x) const noexcept;
  /// Values of the expansion on its own extrema grid (ascending).
  std::vector<double> nodal_values() const;
};

/// Coefficients of the degree-(k-1) interpolant to `values` sampled on
/// extrema_grid(a, b, values.size()).
ChebExpansion vals_to_coeffs(double a, double b, std::span<const double> values);

/// Inverse transform: values on the extrema grid from coefficients.
std::vector<double> coeffs_to_vals(std::span<const double> coeffs);

/// Barycentric Lagrange evaluation on the k-point extrema grid of [a, b] given
/// nodal values. Returns the nodal value exactly when x is a node.
double barycentric_eval(double a, double b, std::span<const double> values, double x);

/// Sum_{j>=k/2} a_j^2 < factor * eps0^2 * sum_j a_j^2. An identically zero
/// coefficient vector is accepted.
bool passes_tail_test(std::span<const double> coeffs, double factor = 100.0);

/// Partition x_0 < ... < x_m with one k-term expansion per [x_i, x_{i+1}].
class PiecewiseChebModel {
 public:
  PiecewiseChebModel() = default;
  /// `coeffs` holds pieces back to back, k values per piece.
  PiecewiseChebModel(std::vector<double> breakpoints, std::vector<double> coeffs,
                     std::size_t k);

  std::size_t k() const noexcept { return k_; }
  std::size_t piece_count() const noexcept {
    return breakpoints_.empty() ? 0 : breakpoints_.size() - 1;
  }
  double lower() const noexcept { return breakpoints_.front(); }
  double upper() const noexcept { return breakpoints_.back(); }
  std::span<const double> breakpoints() const noexcept { return breakpoints_; }
  std::span<const double> coeffs() const noexcept { return coeffs_; }
  std::span<const double> piece_coeffs(std::size_t i) const noexcept {
    return std::span<const double>(coeffs_).subspan(i * k_, k_);
  }
  ChebExpansion piece(std::size_t i) const;

  /// Index of the piece whose half-open interval [x_i, x_{i+1}) holds x; the
  /// last piece is closed.
  std::size_t locate(double x) const noexcept;

  /// Evaluate at x in [lower(), upper()]; throws out_of_range otherwise.
  double operator()(double x) const;
  /// Same, without the range check (x is clamped into the partition).
  double eval_unchecked(double x) const noexcept;

 private:
  std::vector<double> breakpoints_;
  std::vector<double> coeffs_;
  std::size_t k_ = 0;
};

struct AdaptiveOptions {
  double tail_factor = 100.0;
  /// Minimum piece width relative to max(|a|, |b|, 1), in units of eps0.
  double min_width_eps = 256.0;
  /// Also accept a piece whose tail is small against the largest |sample|
  /// seen so far, not only against its own coefficients. For functions with
  /// interior zeros sampled with absolute noise.
  bool absolute_floor = false;
};

using ScalarFunction = std::function<double(double)>;

/// Adaptive bisection: sample f on the k-point grid of each candidate piece,
/// accept when the tail test passes, otherwise split in half.
PiecewiseChebModel adaptive_expand(const ScalarFunction& f, double a, double b,
                                   std::size_t k, const AdaptiveOptions& opts = {});

/// Variant taking a batch sampler: called once per candidate piece with its
/// grid nodes, must return one value per node.
using BatchFunction = std::function<std::vector<double>(std::span<const double>)>;
PiecewiseChebModel adaptive_expand_batch(const BatchFunction& f, double a, double b,
                                         std::size_t k, const AdaptiveOptions& opts = {});

}  // namespace chitbl::cheb
