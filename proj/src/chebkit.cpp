#include "chitbl/chebkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <utility>

#include "chitbl/error.hpp"

namespace chitbl::cheb {

namespace {

// cos(i * pi / n) for integer i, reduced so that symmetric angles produce
// bit-identical values and cos(pi/2) is exactly zero.
double cos_pi_ratio(std::size_t i, std::size_t n) {
  i %= 2 * n;
  if (i > n) i = 2 * n - i;
  // cos(i pi / n) = sin((n - 2i) pi / (2n))
  const long num = static_cast<long>(n) - 2 * static_cast<long>(i);
  if (num == 0) return 0.0;
  const double s = std::sin(std::numbers::pi * static_cast<double>(std::labs(num)) /
                            static_cast<double>(2 * n));
  return num > 0 ? s : -s;
}

// Row-major (k x k) table of (-1)^m cos(m j pi / (k-1)).
std::vector<double> make_transform_table(std::size_t k) {
  const std::size_t n = k - 1;
  std::vector<double> t(k * k);
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t j = 0; j < k; ++j) {
      const double c = cos_pi_ratio(m * j, n);
      t[m * k + j] = (m % 2 == 0) ? c : -c;
    }
  }
  return t;
}

const std::vector<double>& transform_table(std::size_t k) {
  // k = 30 is the only size used on hot paths; other sizes are built on demand.
  static const std::vector<double> t30 = make_transform_table(30);
  if (k == 30) return t30;
  thread_local std::vector<double> other;
  thread_local std::size_t other_k = 0;
  if (other_k != k) {
    other = make_transform_table(k);
    other_k = k;
  }
  return other;
}

void check_interval(double a, double b) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
    std::ostringstream os;
    os << "invalid interval [" << a << ", " << b << "]";
    fail(ErrorCode::invalid_argument, os.str());
  }
}

}  // namespace

ChebGrid extrema_grid(double a, double b, std::size_t k) {
  if (k < 2) fail(ErrorCode::invalid_argument, "extrema grid needs k >= 2");
  check_interval(a, b);
  ChebGrid g{a, b, std::vector<double>(k)};
  const std::size_t n = k - 1;
  const double mid = 0.5 * (b + a);
  const double half = 0.5 * (b - a);
  for (std::size_t j = 0; j < k; ++j) g.nodes[j] = mid - half * cos_pi_ratio(j, n);
  g.nodes.front() = a;
  g.nodes.back() = b;
  return g;
}

ChebExpansion vals_to_coeffs(double a, double b, std::span<const double> values) {
  check_interval(a, b);
  const std::size_t k = values.size();
  if (k < 2) fail(ErrorCode::invalid_argument, "need at least two samples");
  const std::vector<double>& t = transform_table(k);
  const double n = static_cast<double>(k - 1);
  ChebExpansion e{a, b, std::vector<double>(k)};
  for (std::size_t m = 0; m < k; ++m) {
    const double* row = &t[m * k];
    double s = 0.5 * (row[0] * values[0] + row[k - 1] * values[k - 1]);
    for (std::size_t j = 1; j + 1 < k; ++j) s += row[j] * values[j];
    s *= 2.0 / n;
    if (m == 0 || m == k - 1) s *= 0.5;
    e.coeffs[m] = s;
  }
  return e;
}

std::vector<double> coeffs_to_vals(std::span<const double> coeffs) {
  const std::size_t k = coeffs.size();
  if (k < 2) fail(ErrorCode::invalid_argument, "need at least two coefficients");
  const std::vector<double>& t = transform_table(k);
  std::vector<double> v(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t m = 0; m < k; ++m) s += coeffs[m] * t[m * k + j];
    v[j] = s;
  }
  return v;
}

double ChebExpansion::eval_unchecked(double x) const noexcept {
  const double u = (2.0 * x - (a + b)) / (b - a);
  const double u2 = 2.0 * u;
  double b1 = 0.0;
  double b2 = 0.0;
  for (std::size_t j = coeffs.size(); j-- > 1;) {
    const double t = std::fma(u2, b1, coeffs[j] - b2);
    b2 = b1;
    b1 = t;
  }
  return std::fma(u, b1, coeffs[0] - b2);
}

double ChebExpansion::operator()(double x) const {
  if (!(x >= a && x <= b)) {
    std::ostringstream os;
    os.precision(17);
    os << "x = " << x << " outside expansion range [" << a << ", " << b << "]";
    fail(ErrorCode::out_of_range, os.str());
  }
  return eval_unchecked(x);
}

std::vector<double> ChebExpansion::nodal_values() const { return coeffs_to_vals(coeffs); }

double barycentric_eval(double a, double b, std::span<const double> values, double x) {
  const std::size_t k = values.size();
  const ChebGrid g = extrema_grid(a, b, k);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double d = x - g.nodes[j];
    if (d == 0.0) return values[j];
    double w = (j % 2 == 0) ? 1.0 : -1.0;
    if (j == 0 || j == k - 1) w *= 0.5;
    w /= d;
    num += w * values[j];
    den += w;
  }
  return num / den;
}

bool passes_tail_test(std::span<const double> coeffs, double factor) {
  const std::size_t k = coeffs.size();
  double total = 0.0;
  double tail = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double s = coeffs[j] * coeffs[j];
    total += s;
    if (j >= k / 2) tail += s;
  }
  if (total == 0.0) return true;
  return tail < factor * kEps0 * kEps0 * total;
}

namespace {

bool below_floor(std::span<const double> coeffs, double factor, double peak) {
  double tail = 0.0;
  for (std::size_t j = coeffs.size() / 2; j < coeffs.size(); ++j) tail += coeffs[j] * coeffs[j];
  return tail < factor * kEps0 * kEps0 * peak * peak;
}

}  // namespace

PiecewiseChebModel::PiecewiseChebModel(std::vector<double> breakpoints,
                                       std::vector<double> coeffs, std::size_t k)
    : breakpoints_(std::move(breakpoints)), coeffs_(std::move(coeffs)), k_(k) {
  if (breakpoints_.size() < 2 || k_ < 2 ||
      coeffs_.size() != (breakpoints_.size() - 1) * k_) {
    fail(ErrorCode::invalid_argument, "piecewise model: inconsistent sizes");
  }
  for (std::size_t i = 0; i + 1 < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i] < breakpoints_[i + 1])) {
      fail(ErrorCode::invariant_violation,
           "piecewise model: breakpoints not strictly increasing");
    }
  }
}

ChebExpansion PiecewiseChebModel::piece(std::size_t i) const {
  const auto c = piece_coeffs(i);
  return ChebExpansion{breakpoints_[i], breakpoints_[i + 1],
                       std::vector<double>(c.begin(), c.end())};
}

std::size_t PiecewiseChebModel::locate(double x) const noexcept {
  // Number of interior breakpoints x_1 .. x_{m-1} that are <= x.
  const auto first = breakpoints_.begin() + 1;
  const auto last = breakpoints_.end() - 1;
  return static_cast<std::size_t>(std::upper_bound(first, last, x) - first);
}

double PiecewiseChebModel::eval_unchecked(double x) const noexcept {
  const std::size_t i = locate(x);
  const double a = breakpoints_[i];
  const double b = breakpoints_[i + 1];
  const double* c = coeffs_.data() + i * k_;
  const double u = (2.0 * x - (a + b)) / (b - a);
  const double u2 = 2.0 * u;
  double b1 = 0.0;
  double b2 = 0.0;
  for (std::size_t j = k_; j-- > 1;) {
    const double t = std::fma(u2, b1, c[j] - b2);
    b2 = b1;
    b1 = t;
  }
  return std::fma(u, b1, c[0] - b2);
}

double PiecewiseChebModel::operator()(double x) const {
  if (!(x >= lower() && x <= upper())) {
    std::ostringstream os;
    os.precision(17);
    os << "x = " << x << " outside model range [" << lower() << ", " << upper() << "]";
    fail(ErrorCode::out_of_range, os.str());
  }
  return eval_unchecked(x);
}

PiecewiseChebModel adaptive_expand_batch(const BatchFunction& f, double a, double b,
                                         std::size_t k, const AdaptiveOptions& opts) {
  check_interval(a, b);
  if (k < 2 || k % 2 != 0) fail(ErrorCode::invalid_argument, "adaptive_expand needs even k >= 2");

  struct Piece {
    double a, b;
    std::vector<double> coeffs;
  };
  std::vector<std::pair<double, double>> to_process{{a, b}};
  std::vector<Piece> processed;
  double peak = 0.0;

  while (!to_process.empty()) {
    const auto [lo, hi] = to_process.back();
    to_process.pop_back();
    const ChebGrid g = extrema_grid(lo, hi, k);
    const std::vector<double> vals = f(g.nodes);
    if (vals.size() != k) fail(ErrorCode::invalid_argument, "sampler returned wrong count");
    for (double v : vals) {
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os.precision(17);
        os << "non-finite sample on [" << lo << ", " << hi << "]";
        fail(ErrorCode::numerical_failure, os.str());
      }
    }
    for (double v : vals) peak = std::max(peak, std::fabs(v));
    ChebExpansion e = vals_to_coeffs(lo, hi, vals);
    if (passes_tail_test(e.coeffs, opts.tail_factor) ||
        (opts.absolute_floor && below_floor(e.coeffs, opts.tail_factor, peak))) {
      processed.push_back({lo, hi, std::move(e.coeffs)});
      continue;
    }
    const double scale = std::max({std::fabs(lo), std::fabs(hi), 1.0});
    if (hi - lo < opts.min_width_eps * kEps0 * scale) {
      std::ostringstream os;
      os.precision(17);
      os << "adaptive expansion failed to resolve [" << lo << ", " << hi
         << "]: function is not smooth at working precision";
      fail(ErrorCode::numerical_failure, os.str());
    }
    const double mid = 0.5 * (lo + hi);
    // Right half first so the left half is processed next.
    to_process.emplace_back(mid, hi);
    to_process.emplace_back(lo, mid);
  }

  std::sort(processed.begin(), processed.end(),
            [](const Piece& x, const Piece& y) { return x.a < y.a; });
  std::vector<double> bps;
  std::vector<double> coeffs;
  bps.reserve(processed.size() + 1);
  coeffs.reserve(processed.size() * k);
  bps.push_back(processed.front().a);
  for (const Piece& p : processed) {
    bps.push_back(p.b);
    coeffs.insert(coeffs.end(), p.coeffs.begin(), p.coeffs.end());
  }
  return PiecewiseChebModel(std::move(bps), std::move(coeffs), k);
}

PiecewiseChebModel adaptive_expand(const ScalarFunction& f, double a, double b,
                                   std::size_t k, const AdaptiveOptions& opts) {
  return adaptive_expand_batch(
      [&f](std::span<const double> xs) {
        std::vector<double> v(xs.size());
        std::transform(xs.begin(), xs.end(), v.begin(), f);
        return v;
      },
      a, b, k, opts);
}

}  // namespace chitbl::cheb
