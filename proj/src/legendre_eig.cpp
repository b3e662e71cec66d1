#include "chitbl/legendre_eig.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>
#include <sstream>

#include "chitbl/chebkit.hpp"
#include "chitbl/error.hpp"

namespace chitbl::oxr {

namespace {

constexpr long double kEpsExt = LDBL_EPSILON;

void check_finite(const TridiagonalOperator& op) {
  for (long double v : op.diag) {
    if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "operator has non-finite diagonal");
  }
  for (long double v : op.offdiag) {
    if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "operator has non-finite off-diagonal");
  }
}

// Sturm count with squared off-diagonals precomputed.
std::size_t count_below(const std::vector<long double>& diag, const std::vector<long double>& off2,
                        long double x) {
  const std::size_t n = diag.size();
  std::size_t neg = 0;
  long double d = diag[0] - x;
  // Pivot floor keeps the recurrence finite when a pivot rounds to zero.
  const long double tiny = LDBL_MIN / kEpsExt;
  for (std::size_t i = 0;; ++i) {
    if (d == 0.0L) d = -tiny;
    if (d < 0.0L) ++neg;
    if (i + 1 == n) break;
    d = (diag[i + 1] - x) - off2[i] / d;
  }
  return neg;
}

std::vector<long double> squares(const std::vector<long double>& v) {
  std::vector<long double> s(v.size());
  std::transform(v.begin(), v.end(), s.begin(), [](long double x) { return x * x; });
  return s;
}

long double bisect(const std::vector<long double>& diag, const std::vector<long double>& off2,
                   std::size_t idx, long double lo, long double hi) {
  // Invariant: count(lo) <= idx < count(hi).
  for (;;) {
    const long double mid = 0.5L * (lo + hi);
    const long double tol = 4.0L * kEpsExt * std::max(1.0L, std::fabs(mid));
    if (hi - lo <= tol || mid <= lo || mid >= hi) return mid;
    if (count_below(diag, off2, mid) >= idx + 1) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
}

long double solve(const TridiagonalOperator& op, std::size_t idx, const long double* guess) {
  const std::vector<long double> off2 = squares(op.offdiag);
  if (guess != nullptr) {
    // Successive dimensions move the eigenvalue by a tiny amount; try a narrow
    // bracket around the previous value before falling back to Gershgorin.
    const long double w = 1e-9L * std::max(1.0L, std::fabs(*guess));
    const long double lo = *guess - w;
    const long double hi = *guess + w;
    if (count_below(op.diag, off2, lo) <= idx && count_below(op.diag, off2, hi) > idx) {
      return bisect(op.diag, off2, idx, lo, hi);
    }
  }
  long double lo = op.diag[0];
  long double hi = op.diag[0];
  const std::size_t n = op.dim();
  for (std::size_t i = 0; i < n; ++i) {
    long double r = 0.0L;
    if (i > 0) r += std::fabs(op.offdiag[i - 1]);
    if (i + 1 < n) r += std::fabs(op.offdiag[i]);
    lo = std::min(lo, op.diag[i] - r);
    hi = std::max(hi, op.diag[i] + r);
  }
  const long double pad = kEpsExt * std::max(std::fabs(lo), std::fabs(hi)) + LDBL_MIN;
  return bisect(op.diag, off2, idx, lo - pad, hi + pad);
}

}  // namespace

TridiagonalOperator build_operator(double gamma, Parity parity, std::size_t dim) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    fail(ErrorCode::invalid_argument, "gamma must be finite and nonnegative");
  }
  if (dim < 1) fail(ErrorCode::invalid_argument, "operator dimension must be positive");
  TridiagonalOperator op;
  op.parity = parity;
  op.gamma = gamma;
  op.diag.resize(dim);
  op.offdiag.resize(dim - 1);
  const long double g2 = static_cast<long double>(gamma) * static_cast<long double>(gamma);
  const long double p = static_cast<long double>(static_cast<int>(parity));
  for (std::size_t j = 0; j < dim; ++j) {
    const long double k = p + 2.0L * static_cast<long double>(j);
    const long double kk1 = k * (k + 1.0L);
    op.diag[j] = kk1 + g2 * (2.0L * kk1 - 1.0L) / ((2.0L * k - 1.0L) * (2.0L * k + 3.0L));
    if (j + 1 < dim) {
      op.offdiag[j] = g2 * (k + 1.0L) * (k + 2.0L) /
                      ((2.0L * k + 3.0L) * std::sqrt((2.0L * k + 1.0L) * (2.0L * k + 5.0L)));
    }
  }
  return op;
}

std::size_t sturm_count(const TridiagonalOperator& op, long double x) {
  check_finite(op);
  return count_below(op.diag, squares(op.offdiag), x);
}

TridiagonalOperator leading(const TridiagonalOperator& op, std::size_t dim) {
  if (dim < 1 || dim > op.dim()) fail(ErrorCode::invalid_argument, "bad sub-operator dimension");
  TridiagonalOperator sub;
  sub.parity = op.parity;
  sub.gamma = op.gamma;
  sub.diag.assign(op.diag.begin(), op.diag.begin() + static_cast<std::ptrdiff_t>(dim));
  sub.offdiag.assign(op.offdiag.begin(), op.offdiag.begin() + static_cast<std::ptrdiff_t>(dim - 1));
  return sub;
}

long double eigenvalue_kth(const TridiagonalOperator& op, std::size_t idx) {
  if (idx >= op.dim()) {
    std::ostringstream os;
    os << "eigenvalue index " << idx << " out of range for dimension " << op.dim();
    fail(ErrorCode::out_of_range, os.str());
  }
  check_finite(op);
  return solve(op, idx, nullptr);
}

std::size_t initial_dim(int n, double gamma) {
  const double nn = static_cast<double>(n);
  const auto est = static_cast<std::size_t>(50.0 + std::floor(2.0 / std::numbers::pi * nn) +
                                            std::floor(std::sqrt(gamma * nn)));
  return std::max(est, static_cast<std::size_t>(n / 2) + 10);
}

long double chi_at_dim(int n, double gamma, std::size_t dim) {
  if (n < 0) fail(ErrorCode::invalid_argument, "n must be nonnegative");
  const auto idx = static_cast<std::size_t>(n / 2);
  const Parity parity = (n % 2 == 0) ? Parity::even : Parity::odd;
  return eigenvalue_kth(build_operator(gamma, parity, dim), idx);
}

EigenResult chi_integer(int n, double gamma) {
  if (n < 0) fail(ErrorCode::invalid_argument, "n must be nonnegative");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    fail(ErrorCode::invalid_argument, "gamma must be finite and nonnegative");
  }
  constexpr int kMaxEnlargements = 12;
  const auto idx = static_cast<std::size_t>(n / 2);
  const Parity parity = (n % 2 == 0) ? Parity::even : Parity::odd;

  EigenResult res;
  std::size_t dim = initial_dim(n, gamma);
  // The operator is positive semidefinite; bisection may land a hair below 0.
  long double prev = std::max(0.0L, solve(build_operator(gamma, parity, dim), idx, nullptr));
  for (int e = 1; e <= kMaxEnlargements; ++e) {
    dim += dim / 2;
    const long double cur = std::max(0.0L, solve(build_operator(gamma, parity, dim), idx, &prev));
    const long double diff = std::fabs(cur - prev);
    res.chi_ext = cur;
    res.chi = static_cast<double>(cur);
    res.previous = static_cast<double>(prev);
    res.residual = static_cast<double>(diff);
    res.dim_used = dim;
    res.enlargements = e;
    if (diff <= 2.0L * cheb::kEps0 * std::fabs(cur) || std::fabs(cur) <= cheb::kEps0) {
      res.converged = true;
      return res;
    }
    prev = cur;
  }
  std::ostringstream os;
  os.precision(17);
  os << "chi_integer(n=" << n << ", gamma=" << gamma << ") did not converge: last iterates "
     << res.previous << ", " << res.chi;
  fail(ErrorCode::no_convergence, os.str());
}

}  // namespace chitbl::oxr
