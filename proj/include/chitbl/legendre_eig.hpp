#pragma once

// Sturm-Liouville eigenvalues chi_n(gamma) of the reduced prolate spheroidal
// equation via the symmetric tridiagonal operator in the normalized Legendre
// basis. Arithmetic is carried out in extended precision (long double): the
// gamma^2 parts of the diagonal and off-diagonal cancel down to chi ~ gamma for
// small n, which costs about log10(gamma) digits in plain double.

#include <cstddef>
#include <vector>

namespace chitbl::oxr {

enum class Parity : int { even = 0, odd = 1 };

struct TridiagonalOperator {
  Parity parity = Parity::even;
  double gamma = 0.0;
  std::vector<long double> diag;
  std::vector<long double> offdiag;  // diag.size() - 1 entries

  std::size_t dim() const noexcept { return diag.size(); }
};

/// Row j couples Legendre degree k = parity + 2j:
///   diag[j]    = k(k+1) + g^2 (2k(k+1) - 1) / ((2k-1)(2k+3))
///   offdiag[j] = g^2 (k+1)(k+2) / ((2k+3) sqrt((2k+1)(2k+5)))
TridiagonalOperator build_operator(double gamma, Parity parity, std::size_t dim);

/// Number of eigenvalues strictly less than x (LDL^T sign count of T - x I).
std::size_t sturm_count(const TridiagonalOperator& op, long double x);

/// Leading principal sub-operator of the given dimension.
TridiagonalOperator leading(const TridiagonalOperator& op, std::size_t dim);

/// idx-th smallest eigenvalue (0-based) by Sturm bisection from Gershgorin
/// bounds.
long double eigenvalue_kth(const TridiagonalOperator& op, std::size_t idx);

struct EigenResult {
  double chi = 0.0;
  long double chi_ext = 0.0L;
  std::size_t dim_used = 0;
  bool converged = false;
  /// |chi(last dim) - chi(previous dim)|.
  double residual = 0.0;
  double previous = 0.0;
  int enlargements = 0;
};

/// Starting dimension 50 + floor(2n/pi) + floor(sqrt(gamma n)), at least
/// floor(n/2) + 10.
std::size_t initial_dim(int n, double gamma);

/// chi_n(gamma) with an adaptively enlarged operator. Throws no_convergence if
/// twelve 50% enlargements do not bring successive values within 2 eps0 |chi|.
EigenResult chi_integer(int n, double gamma);

/// Same eigenvalue at a fixed operator dimension (no adaptivity).
long double chi_at_dim(int n, double gamma, std::size_t dim);

}  // namespace chitbl::oxr
