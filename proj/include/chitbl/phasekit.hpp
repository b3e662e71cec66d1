#pragma once

// Phase and modulus functions of the normal form w'' + q w = 0 of the reduced
// prolate spheroidal equation,
//
//   q(z) = 1/(1-z^2)^2 + (chi - gamma^2 z^2)/(1-z^2),
//
// built from the solution w3 = S3 sqrt(1-z^2) that decays along the positive
// imaginary axis. With r = w3'/w3 and N = M (1-z^2) on (0,1):
//
//   Im r = gamma/N = psi',  Re r = N'/(2N),  Psi(0) = -int_0^1 gamma/N.
//
// Everything here runs in extended precision (long double). The public results
// carry both rounded doubles and the extended values they came from.

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

namespace chitbl::phase {

using xreal = long double;

/// q and q' for fixed (chi, gamma), on the real segment and the imaginary axis.
struct NormalFormCoefficient {
  xreal chi;
  xreal gamma;

  /// q(z), |z| < 1.
  xreal q(xreal z) const noexcept;
  /// dq/dz, |z| < 1.
  xreal dq(xreal z) const noexcept;
  /// q(iy) = 1/(1+y^2)^2 + (chi + gamma^2 y^2)/(1+y^2); real and positive.
  xreal q_imag(xreal y) const noexcept;
  /// d/dy of q(iy).
  xreal dq_imag(xreal y) const noexcept;
  /// q t^2 as a function of t = 1 - z (endpoint variable).
  xreal q_t2(xreal t) const noexcept;
  /// q'(z) t^3 as a function of t = 1 - z.
  xreal dq_t3(xreal t) const noexcept;
};

struct ProbeOptions {
  xreal rtol = 1e-17L;
  /// Perturbations of the imaginary-axis flow decay like exp(-2 int b dy) on
  /// the way down, with b >= b_min = sqrt(min(gamma^2, 1 + chi)). The start
  /// point is Y = attenuation / (2 b_min), doubled until r(0) settles.
  xreal attenuation = 80.0L;
  int max_doublings = 8;
};

/// Logarithmic derivative r(0) of w3 at the origin and what follows from it.
struct PhaseProbe {
  std::complex<double> r0;
  xreal N0 = 0, N1 = 0, N2 = 0;        // N(0), N'(0), N''(0)
  xreal psi1 = 0, psi2 = 0, psi3 = 0;  // psi'(0), psi''(0), psi'''(0)
  /// (Im r(0))^2 - q(0), the quantity the imaginary-axis integration tracks.
  xreal defect0 = 0;
  /// Y where the asymptotic initial condition was imposed.
  double ic_point = 0;
  /// r(iY) as imposed: i (gamma + 1/Y - Y/(1+Y^2)).
  std::complex<double> r_start;
  double est_error = 0;
  int doublings = 0;
  std::size_t steps = 0;
};

PhaseProbe riccati_probe(double chi, double gamma, const ProbeOptions& opts = {});

struct TrajectorySample {
  double y;
  std::complex<double> r;  // r(iy)
};

/// Accepted-step samples of r(iy) for y from Y down to 0.
std::vector<TrajectorySample> riccati_trajectory(double chi, double gamma, double Y,
                                                 const ProbeOptions& opts = {});

struct AppellOptions {
  xreal rtol = 1e-15L;
  /// Switch from z to s = -log(1-z) at z = 1 - delta.
  xreal delta = 1e-3L;
  /// 0 selects s_max = max(36, log(1 + gamma^2 + chi) + 54).
  xreal s_max = 0;
};

/// N on [z0, 1). N solves the Appell equation N''' + 4qN' + 2q'N = 0; it is
/// carried through r = w3'/w3 as a = Re r, beta = log Im r, which stay smooth
/// and finite while N itself may grow past the range of any floating type.
/// Point queries re-integrate from the nearest stored step.
class ModulusPath {
 public:
  struct Derivs {
    xreal log_n;  // log N
    xreal dn_n;   // N'/N
    xreal d2n_n;  // N''/N
  };

  /// log N, N'/N, N''/N at z in [z_begin, 1).
  Derivs at(double z) const;
  /// Multiplied out (may overflow to inf in exponential regimes).
  xreal N(double z) const;
  xreal dN(double z) const;
  xreal d2N(double z) const;
  /// psi'(z) = gamma / N(z).
  xreal psi_prime(double z) const;
  /// The same three quantities for M = N / (1 - z^2) = (S1)^2 + (S2)^2.
  Derivs m_at(double z) const;

  double z_begin() const noexcept { return static_cast<double>(z_begin_); }
  double z_switch() const noexcept { return static_cast<double>(z_switch_); }
  xreal s_max() const noexcept { return s_max_; }

  /// int_{z_begin}^{z(s_max)} gamma/N.
  xreal phase_integral() const noexcept { return phi_end_; }
  /// Sum of local error estimates for the phase integral.
  xreal phase_error() const noexcept { return phi_err_; }
  std::size_t steps() const noexcept { return steps_; }

  static constexpr int kTailSamples = 20;
  /// log(gamma/P) at the 20 equispaced points of [s_max - 10, s_max], where
  /// P = N e^s.
  const std::array<xreal, kTailSamples>& tail_log_eta() const noexcept { return tail_theta_; }

 private:
  friend ModulusPath appell_extend_from(double, double, xreal, xreal, xreal,
                                        const AppellOptions&);
  struct Checkpoint {
    xreal t;                 // z, or s in the endpoint region
    std::array<xreal, 2> x;  // (Re r, log Im r), or the same for (1-z) r
  };

  xreal chi_ = 0;
  xreal gamma_ = 0;
  AppellOptions opts_;
  xreal z_begin_ = 0;
  xreal z_switch_ = 0;
  xreal s_switch_ = 0;
  xreal s_max_ = 0;
  xreal phi_end_ = 0;
  xreal phi_err_ = 0;
  std::size_t steps_ = 0;
  std::vector<Checkpoint> z_pts_;
  std::vector<Checkpoint> s_pts_;
  std::array<xreal, kTailSamples> tail_theta_{};
};

ModulusPath appell_extend(const PhaseProbe& probe, double chi, double gamma,
                          const AppellOptions& opts = {});

/// Start at z0 in [0, 1) from N and N' there.
ModulusPath appell_extend_from(double chi, double gamma, xreal z0, xreal n, xreal dn,
                               const AppellOptions& opts = {});

struct PhaseIndexResult {
  double xi = 0;    // -(2/pi) Psi(0) - 1
  double psi0 = 0;  // Psi(0)
  xreal xi_ext = 0;
  xreal psi0_ext = 0;
  /// Fit P(s)/P(s_max) ~ c2 u^2 + c1 u + c0 on [s_max - 10, s_max], with
  /// P = N e^s and u = s - (s_max - 5).
  std::array<double, 3> tail_coeffs{};
  /// int_{s_max}^inf gamma / P ds.
  double tail = 0;
  double quad_error = 0;
  PhaseProbe probe;
};

struct PhaseOptions {
  ProbeOptions probe;
  AppellOptions appell;
};

PhaseIndexResult psi_at_zero(double chi, double gamma, const PhaseOptions& opts = {});

double xi_of_chi(double chi, double gamma);

/// Closed form of int_{u0}^inf du / (c2 u^2 + c1 u + c0); requires the
/// quadratic to stay positive on [u0, inf).
xreal quadratic_tail(xreal c2, xreal c1, xreal c0, xreal u0);

}  // namespace chitbl::phase
