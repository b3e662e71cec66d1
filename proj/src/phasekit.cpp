#include "chitbl/phasekit.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>
#include <sstream>

#include "chitbl/error.hpp"
#include "ode.hpp"

namespace chitbl::phase {

using detail::OdeState;
using detail::StepEnds;

// ---------------------------------------------------------------------------
// Coefficients

xreal NormalFormCoefficient::q(xreal z) const noexcept {
  const xreal om = (1.0L - z) * (1.0L + z);
  return 1.0L / (om * om) + (chi - gamma * gamma * z * z) / om;
}

xreal NormalFormCoefficient::dq(xreal z) const noexcept {
  const xreal om = (1.0L - z) * (1.0L + z);
  return 4.0L * z / (om * om * om) + 2.0L * z * (chi - gamma * gamma) / (om * om);
}

xreal NormalFormCoefficient::q_imag(xreal y) const noexcept {
  const xreal op = 1.0L + y * y;
  return 1.0L / (op * op) + gamma * gamma + (chi - gamma * gamma) / op;
}

xreal NormalFormCoefficient::dq_imag(xreal y) const noexcept {
  const xreal op = 1.0L + y * y;
  return -4.0L * y / (op * op * op) + 2.0L * y * (gamma * gamma - chi) / (op * op);
}

xreal NormalFormCoefficient::q_t2(xreal t) const noexcept {
  const xreal w = 2.0L - t;
  const xreal z = 1.0L - t;
  return 1.0L / (w * w) + t * (chi - gamma * gamma * z * z) / w;
}

xreal NormalFormCoefficient::dq_t3(xreal t) const noexcept {
  const xreal w = 2.0L - t;
  return 4.0L * (1.0L - t) / (w * w * w) - 2.0L * t * (1.0L - t) * (gamma * gamma - chi) / (w * w);
}

namespace {

void check_params(double chi, double gamma) {
  if (!(chi > 0.0) || !std::isfinite(chi) || !(gamma > 0.0) || !std::isfinite(gamma)) {
    std::ostringstream os;
    os.precision(17);
    os << "phase functions need chi > 0 and gamma > 0 (chi = " << chi << ", gamma = " << gamma
       << ")";
    fail(ErrorCode::invalid_argument, os.str());
  }
}

[[noreturn]] void lost_positivity(const char* where, xreal at, const NormalFormCoefficient& nf) {
  std::ostringstream os;
  os.precision(17);
  os << where << " at " << static_cast<double>(at) << " (chi = " << static_cast<double>(nf.chi)
     << ", gamma = " << static_cast<double>(nf.gamma) << ")";
  fail(ErrorCode::numerical_failure, os.str());
}

xreal b_min(const NormalFormCoefficient& nf) {
  return std::sqrt(std::min(nf.gamma * nf.gamma, 1.0L + nf.chi));
}

// ---------------------------------------------------------------------------
// Imaginary axis.
//
// On z = iy, r = i b(y) with b real and b' = b^2 - q(iy). The integration
// tracks the defect D = b^2 - q(iy), with D' = 2 b D - dq(iy)/dy and
// b = sqrt(q + D). Going down in y, perturbations shrink like exp(-2 int b), so
// the error scale is relaxed by that factor away from y = 0.

struct RiccatiRun {
  xreal defect0;
  xreal b0;
  xreal b_start;
  xreal err;
  std::size_t steps;
};

template <class Sink>
RiccatiRun run_riccati(const NormalFormCoefficient& nf, xreal Y, xreal rtol, Sink&& sink) {
  const xreal op = 1.0L + Y * Y;
  const xreal b_minus_g = 1.0L / (Y * op);
  const xreal b_start = nf.gamma + b_minus_g;
  OdeState<1> x{b_minus_g * (b_start + nf.gamma) - 1.0L / (op * op) -
                (nf.chi - nf.gamma * nf.gamma) / op};

  const xreal bm = b_min(nf);
  const xreal spread = std::fabs(nf.chi - nf.gamma * nf.gamma) + 1.0L;
  auto rhs = [&nf](const OdeState<1>& s, OdeState<1>& d, xreal y) {
    const xreal b = std::sqrt(std::max(nf.q_imag(y) + s[0], 0.0L));
    d[0] = 2.0L * b * s[0] - nf.dq_imag(y);
  };
  auto scale = [&](const OdeState<1>& s, const OdeState<1>& d, xreal y, xreal h) {
    const xreal floor = 1e-2L * spread / nf.q_imag(y);
    const xreal relax = std::min(std::exp(std::min(1.8L * bm * y, 46.0L)), 1e-4L / rtol);
    return OdeState<1>{rtol * relax * (std::fabs(s[0]) + std::fabs(h * d[0]) + floor)};
  };
  auto accept = [&](const StepEnds<1>& e, OdeState<1>& xn) {
    const xreal qq = nf.q_imag(e.tb);
    if (!(qq + xn[0] > 0.0L)) lost_positivity("Im r(iy) lost positivity at y", e.tb, nf);
    sink(e.tb, std::sqrt(qq + xn[0]));
  };

  detail::StepControl ctl;
  ctl.rtol = rtol;
  ctl.h_init = 0.1L / std::sqrt(nf.q_imag(Y));
  ctl.h_max = Y;
  sink(Y, b_start);
  const auto st = detail::integrate<1>(rhs, x, Y, 0.0L, ctl, scale, accept);

  const xreal q0 = nf.q_imag(0.0L);
  if (!(q0 + x[0] > 0.0L)) lost_positivity("Im r(0) is not positive; y", 0.0L, nf);
  return RiccatiRun{x[0], std::sqrt(q0 + x[0]), b_start, rtol * st.err_sum, st.accepted};
}

xreal rel_diff(xreal a, xreal b) {
  const xreal m = std::max(std::fabs(a), std::fabs(b));
  return m == 0.0L ? 0.0L : std::fabs(a - b) / m;
}

// ---------------------------------------------------------------------------
// Real segment.
//
// z variable, state (a, beta, Phi) with r = a + i e^beta:
//   a' = -q - a^2 + e^{2 beta},  beta' = -2a,  Phi' = e^beta.
// s = -log(1-z), t = e^-s, state (alpha, theta, Phi) for t r = alpha + i e^theta:
//   alpha' = -Q - alpha^2 + e^{2 theta} - alpha,  theta' = -(2 alpha + 1),
//   Phi' = e^theta,  Q = q t^2.

// Once Im r is tiny against the accumulated phase, errors in (a, beta) can move
// the rest of the phase integral by at most about Im r times the error, so the
// tolerance on those components is relaxed by Phi / (100 Im r), up to 1e-4.
struct Relaxed {
  xreal rtol;
  xreal relax(xreal phi, xreal b) const {
    return std::clamp(std::fabs(phi) / (100.0L * b + LDBL_MIN), 1.0L, 1e-4L / rtol);
  }
};

struct ZSystem : Relaxed {
  const NormalFormCoefficient& nf;
  ZSystem(const NormalFormCoefficient& c, xreal tol) : Relaxed{tol}, nf(c) {}

  void operator()(const OdeState<3>& s, OdeState<3>& d, xreal z) const {
    const xreal b = std::exp(s[1]);
    d[0] = -nf.q(z) - s[0] * s[0] + b * b;
    d[1] = -2.0L * s[0];
    d[2] = b;
  }
  OdeState<3> scale(const OdeState<3>& s, const OdeState<3>& d, xreal z, xreal h) const {
    const xreal kap = std::sqrt(std::fabs(nf.q(z)) + 1.0L);
    const xreal b = std::exp(s[1]);
    const xreal r = rtol * relax(s[2], b);
    return {r * (std::fabs(s[0]) + b + kap), r * (1.0L + std::fabs(s[1])),
            rtol * (std::fabs(s[2]) + std::fabs(h * d[2])) + LDBL_MIN};
  }
};

struct SSystem : Relaxed {
  const NormalFormCoefficient& nf;
  SSystem(const NormalFormCoefficient& c, xreal tol) : Relaxed{tol}, nf(c) {}

  void operator()(const OdeState<3>& s, OdeState<3>& d, xreal sv) const {
    const xreal eta = std::exp(s[1]);
    d[0] = -nf.q_t2(std::exp(-sv)) - s[0] * s[0] + eta * eta - s[0];
    d[1] = -(2.0L * s[0] + 1.0L);
    d[2] = eta;
  }
  OdeState<3> scale(const OdeState<3>& s, const OdeState<3>& d, xreal sv, xreal h) const {
    const xreal kap = std::sqrt(std::fabs(nf.q_t2(std::exp(-sv))) + 1.0L);
    const xreal eta = std::exp(s[1]);
    const xreal r = rtol * relax(s[2], eta);
    return {r * (std::fabs(s[0]) + eta + kap), r * (1.0L + std::fabs(s[1])),
            rtol * (std::fabs(s[2]) + std::fabs(h * d[2])) + LDBL_MIN};
  }
};

template <class Sys, class OnAccept>
detail::IntegrationStats run(const Sys& sys, OdeState<3>& x, xreal t0, xreal t1, xreal h_init,
                             xreal h_max, OnAccept&& on_accept) {
  detail::StepControl ctl;
  ctl.rtol = sys.rtol;
  ctl.h_init = h_init;
  ctl.h_max = h_max;
  auto rhs = [&sys](const OdeState<3>& s, OdeState<3>& d, xreal t) { sys(s, d, t); };
  auto scale = [&sys](const OdeState<3>& s, const OdeState<3>& d, xreal t, xreal h) {
    return sys.scale(s, d, t, h);
  };
  return detail::integrate<3>(rhs, x, t0, t1, ctl, scale, on_accept);
}

constexpr xreal kZStepMax = 0.05L;
constexpr xreal kSStepMax = 2.0L;

xreal z_h_init(const NormalFormCoefficient& nf, xreal z) {
  return 0.05L / std::sqrt(std::fabs(nf.q(z)) + 1.0L);
}

xreal s_h_init(const NormalFormCoefficient& nf, xreal s) {
  return 0.05L / std::sqrt(std::fabs(nf.q_t2(std::exp(-s))) + 1.0L);
}

}  // namespace

// ---------------------------------------------------------------------------
// Probe

PhaseProbe riccati_probe(double chi, double gamma, const ProbeOptions& opts) {
  check_params(chi, gamma);
  const NormalFormCoefficient nf{chi, gamma};
  xreal Y = opts.attenuation / (2.0L * b_min(nf));

  auto no_sink = [](xreal, xreal) {};
  RiccatiRun prev = run_riccati(nf, Y, opts.rtol, no_sink);
  std::size_t steps = prev.steps;
  int doublings = 0;
  for (;;) {
    ++doublings;
    const RiccatiRun cur = run_riccati(nf, 2.0L * Y, opts.rtol, no_sink);
    steps += cur.steps;
    const bool settled = rel_diff(cur.b0, prev.b0) <= 1e-16L &&
                         std::fabs(cur.defect0 - prev.defect0) <=
                             1e-13L * std::fabs(cur.defect0) + 1e-18L * cur.b0 * cur.b0;
    if (settled) break;
    Y *= 2.0L;
    prev = cur;
    if (doublings >= opts.max_doublings) {
      fail(ErrorCode::no_convergence, "imaginary-axis probe did not settle under doubling of Y");
    }
  }

  PhaseProbe p;
  const xreal b = prev.b0;
  p.psi1 = b;
  p.psi2 = 0.0L;
  p.psi3 = -2.0L * b * prev.defect0;
  p.defect0 = prev.defect0;
  p.N0 = nf.gamma / b;
  p.N1 = 0.0L;
  p.N2 = 2.0L * p.N0 * prev.defect0;
  p.r0 = std::complex<double>(0.0, static_cast<double>(b));
  p.ic_point = static_cast<double>(Y);
  p.r_start = std::complex<double>(0.0, static_cast<double>(prev.b_start));
  p.est_error = static_cast<double>(prev.err);
  p.doublings = doublings;
  p.steps = steps;
  return p;
}

std::vector<TrajectorySample> riccati_trajectory(double chi, double gamma, double Y,
                                                 const ProbeOptions& opts) {
  check_params(chi, gamma);
  if (!(Y > 0.0)) fail(ErrorCode::invalid_argument, "trajectory start must be positive");
  const NormalFormCoefficient nf{chi, gamma};
  std::vector<TrajectorySample> out;
  run_riccati(nf, Y, opts.rtol, [&out](xreal y, xreal b) {
    out.push_back({static_cast<double>(y), std::complex<double>(0.0, static_cast<double>(b))});
  });
  return out;
}

// ---------------------------------------------------------------------------
// Modulus path

ModulusPath appell_extend(const PhaseProbe& probe, double chi, double gamma,
                          const AppellOptions& opts) {
  if (!(probe.N0 > 0.0L)) fail(ErrorCode::invalid_argument, "probe has nonpositive N(0)");
  return appell_extend_from(chi, gamma, 0.0L, probe.N0, probe.N1, opts);
}

ModulusPath appell_extend_from(double chi, double gamma, xreal z0, xreal n, xreal dn,
                               const AppellOptions& opts) {
  check_params(chi, gamma);
  if (!(z0 >= 0.0L && z0 < 1.0L)) fail(ErrorCode::invalid_argument, "z0 must lie in [0, 1)");
  if (!(n > 0.0L) || !std::isfinite(n)) {
    fail(ErrorCode::invalid_argument, "N must be positive and finite at the start point");
  }
  const NormalFormCoefficient nf{chi, gamma};

  ModulusPath path;
  path.chi_ = chi;
  path.gamma_ = gamma;
  path.opts_ = opts;
  path.z_begin_ = z0;
  path.z_switch_ = std::max(1.0L - opts.delta, z0);
  const xreal s_max = opts.s_max > 0.0L
                          ? opts.s_max
                          : std::max(36.0L, std::log1p(nf.gamma * nf.gamma + nf.chi) + 54.0L);
  path.s_max_ = s_max;

  OdeState<3> x{dn / (2.0L * n), std::log(nf.gamma / n), 0.0L};
  std::size_t steps = 0;
  xreal phi_err = 0.0L;

  const ZSystem zs{nf, opts.rtol};
  path.z_pts_.push_back({z0, {x[0], x[1]}});
  if (z0 < path.z_switch_) {
    const auto st = run(zs, x, z0, path.z_switch_, z_h_init(nf, z0), kZStepMax,
                        [&](const StepEnds<3>& e, OdeState<3>& xn) {
                          path.z_pts_.push_back({e.tb, {xn[0], xn[1]}});
                        });
    steps += st.accepted;
    phi_err += opts.rtol * st.err_sum * std::max(1.0L, std::fabs(x[2]));
  }

  // Change of variable: alpha = t a, theta = beta + log t.
  const xreal t = 1.0L - path.z_switch_;
  const xreal s0 = -std::log(t);
  path.s_switch_ = s0;
  x = OdeState<3>{t * x[0], x[1] + std::log(t), x[2]};
  path.s_pts_.push_back({s0, {x[0], x[1]}});

  const SSystem ss{nf, opts.rtol};
  auto keep = [&](const StepEnds<3>& e, OdeState<3>& xn) {
    path.s_pts_.push_back({e.tb, {xn[0], xn[1]}});
  };
  constexpr int kSamples = ModulusPath::kTailSamples;
  const xreal s_fit = s_max - 10.0L;
  xreal h = s_h_init(nf, s0);
  xreal s_prev = s0;
  for (int j = -1; j < kSamples; ++j) {
    const xreal s_next =
        j < 0 ? s_fit : s_fit + 10.0L * static_cast<xreal>(j) / static_cast<xreal>(kSamples - 1);
    if (s_next > s_prev) {
      const auto st = run(ss, x, s_prev, s_next, h, kSStepMax, keep);
      steps += st.accepted;
      phi_err += opts.rtol * st.err_sum * std::max(1.0L, std::fabs(x[2]));
      h = st.h_next;
      s_prev = s_next;
    }
    if (j >= 0) path.tail_theta_[j] = x[1];
  }

  path.phi_end_ = x[2];
  path.phi_err_ = phi_err;
  path.steps_ = steps;
  return path;
}

ModulusPath::Derivs ModulusPath::at(double zq) const {
  const xreal z = zq;
  if (!(z >= z_begin_ && z < 1.0L)) {
    std::ostringstream os;
    os.precision(17);
    os << "z = " << zq << " outside the modulus path [" << static_cast<double>(z_begin_)
       << ", 1)";
    fail(ErrorCode::out_of_range, os.str());
  }
  const NormalFormCoefficient nf{chi_, gamma_};
  auto before = [](const std::vector<Checkpoint>& pts, xreal v) {
    auto it = std::upper_bound(pts.begin(), pts.end(), v,
                               [](xreal val, const Checkpoint& c) { return val < c.t; });
    return *(it - 1);
  };
  auto none = [](const StepEnds<3>&, OdeState<3>&) {};

  if (z <= z_switch_) {
    const Checkpoint c = before(z_pts_, z);
    OdeState<3> x{c.x[0], c.x[1], 0.0L};
    if (z > c.t) run(ZSystem{nf, opts_.rtol}, x, c.t, z, z_h_init(nf, c.t), kZStepMax, none);
    const xreal b = std::exp(x[1]);
    return {std::log(gamma_) - x[1], 2.0L * x[0], -2.0L * nf.q(z) + 2.0L * x[0] * x[0] + 2.0L * b * b};
  }
  const xreal s = -std::log1p(-z);
  if (s > s_max_) fail(ErrorCode::out_of_range, "z beyond the integrated endpoint region");
  const Checkpoint c = before(s_pts_, s);
  OdeState<3> x{c.x[0], c.x[1], 0.0L};
  if (s > c.t) run(SSystem{nf, opts_.rtol}, x, c.t, s, s_h_init(nf, c.t), kSStepMax, none);
  const xreal t = 1.0L - z;
  const xreal eta = std::exp(x[1]);
  const xreal d2 = -2.0L * nf.q_t2(t) + 2.0L * x[0] * x[0] + 2.0L * eta * eta;
  return {std::log(gamma_) - x[1] + std::log(t), 2.0L * x[0] / t, d2 / (t * t)};
}

xreal ModulusPath::N(double z) const { return std::exp(at(z).log_n); }

xreal ModulusPath::dN(double z) const {
  const Derivs d = at(z);
  return std::exp(d.log_n) * d.dn_n;
}

xreal ModulusPath::d2N(double z) const {
  const Derivs d = at(z);
  return std::exp(d.log_n) * d.d2n_n;
}

xreal ModulusPath::psi_prime(double z) const { return gamma_ * std::exp(-at(z).log_n); }

ModulusPath::Derivs ModulusPath::m_at(double zq) const {
  const Derivs d = at(zq);
  const xreal z = zq;
  const xreal w = 1 - z * z;
  // (log M)' = N'/N + 2z/w and (log M)'' = (log N)'' + 2(1 + z^2)/w^2.
  const xreal dm = d.dn_n + 2 * z / w;
  const xreal log_m_2 = d.d2n_n - d.dn_n * d.dn_n + 2 * (1 + z * z) / (w * w);
  return {d.log_n - std::log(w), dm, log_m_2 + dm * dm};
}

// ---------------------------------------------------------------------------
// Psi(0)

xreal quadratic_tail(xreal c2, xreal c1, xreal c0, xreal u0) {
  // With t = 2 c2 u0 + c1 and disc = c1^2 - 4 c2 c0:
  //   disc < 0:  (2/sqrt(-disc)) (pi/2 - atan(t / sqrt(-disc)))
  //   disc >= 0: (2/t) F(disc/t^2), F(x) = atanh(sqrt x)/sqrt x, needs t > sqrt(disc)
  if (!(c2 > 0.0L)) fail(ErrorCode::numerical_failure, "tail fit has nonpositive curvature");
  const xreal t = 2.0L * c2 * u0 + c1;
  const xreal disc = c1 * c1 - 4.0L * c2 * c0;
  if (disc < 0.0L) {
    const xreal sq = std::sqrt(-disc);
    if (t > 0.0L) return 2.0L / sq * std::atan(sq / t);
    return 2.0L / sq * (std::numbers::pi_v<long double> / 2.0L - std::atan(t / sq));
  }
  if (!(t > 0.0L) || !(t * t > disc)) {
    fail(ErrorCode::numerical_failure, "tail quadratic vanishes beyond the fit window");
  }
  const xreal x = disc / (t * t);
  xreal f;
  if (x < 1e-6L) {
    f = 1.0L + x / 3.0L + x * x / 5.0L + x * x * x / 7.0L;
  } else {
    const xreal r = std::sqrt(x);
    f = std::atanh(r) / r;
  }
  return 2.0L / t * f;
}

PhaseIndexResult psi_at_zero(double chi, double gamma, const PhaseOptions& opts) {
  check_params(chi, gamma);
  PhaseIndexResult res;
  res.probe = riccati_probe(chi, gamma, opts.probe);
  const ModulusPath path = appell_extend(res.probe, chi, gamma, opts.appell);

  // Least squares for P(s)/P(s_max) = exp(theta_last - theta) on the samples,
  // in u = s - (s_max - 5), via the 3x3 normal equations.
  constexpr int kSamples = ModulusPath::kTailSamples;
  const auto& theta = path.tail_log_eta();
  const xreal theta_last = theta[kSamples - 1];
  std::array<std::array<xreal, 3>, 3> ata{};
  std::array<xreal, 3> atb{};
  std::array<xreal, kSamples> us{};
  std::array<xreal, kSamples> ps{};
  for (int j = 0; j < kSamples; ++j) {
    const xreal u = -5.0L + 10.0L * static_cast<xreal>(j) / (kSamples - 1);
    const xreal p = std::exp(theta_last - theta[j]);
    us[j] = u;
    ps[j] = p;
    const std::array<xreal, 3> row{u * u, u, 1.0L};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) ata[a][b] += row[a] * row[b];
      atb[a] += row[a] * p;
    }
  }
  auto det3 = [](const std::array<std::array<xreal, 3>, 3>& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  const xreal det = det3(ata);
  std::array<xreal, 3> c{};
  for (int col = 0; col < 3; ++col) {
    auto m = ata;
    for (int r = 0; r < 3; ++r) m[r][col] = atb[r];
    c[col] = det3(m) / det;
  }
  xreal resid = 0.0L;
  for (int j = 0; j < kSamples; ++j) {
    resid = std::max(resid, std::fabs(c[0] * us[j] * us[j] + c[1] * us[j] + c[2] - ps[j]));
  }
  if (!(c[0] > 0.0L)) {
    std::ostringstream os;
    os.precision(17);
    os << "endpoint fit has nonpositive leading coefficient (chi = " << chi
       << ", gamma = " << gamma << ")";
    fail(ErrorCode::numerical_failure, os.str());
  }
  const xreal tail = std::exp(theta_last) * quadratic_tail(c[0], c[1], c[2], 5.0L);

  res.tail_coeffs = {static_cast<double>(c[0]), static_cast<double>(c[1]),
                     static_cast<double>(c[2])};
  res.tail = static_cast<double>(tail);
  const xreal phi = path.phase_integral() + tail;
  res.psi0_ext = -phi;
  res.xi_ext = 2.0L / std::numbers::pi_v<long double> * phi - 1.0L;
  res.psi0 = static_cast<double>(res.psi0_ext);
  res.xi = static_cast<double>(res.xi_ext);
  res.quad_error = static_cast<double>(path.phase_error() + tail * resid);
  return res;
}

double xi_of_chi(double chi, double gamma) { return psi_at_zero(chi, gamma).xi; }

}  // namespace chitbl::phase
