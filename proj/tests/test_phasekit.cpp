#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "chitbl/error.hpp"
#include "chitbl/legendre_eig.hpp"
#include "chitbl/phasekit.hpp"

using namespace chitbl;
using namespace chitbl::phase;

namespace {

double chi_n(int n, double gamma) { return oxr::chi_integer(n, gamma).chi; }

double rel(long double got, long double want) {
  return static_cast<double>(std::fabs(got - want) / std::fabs(want));
}

}  // namespace

TEST_CASE("normal form: q on the imaginary axis is positive and matches q(z)") {
  const NormalFormCoefficient nf{500.0L, 64.0L};
  for (long double y : {0.0L, 0.01L, 0.3L, 2.0L, 50.0L}) {
    CHECK(nf.q_imag(y) > 0.0L);
    // Central difference of q(iy) against the closed-form derivative.
    if (y > 0.0L) {
      const long double h = 1e-6L * (1 + y);
      const long double fd = (nf.q_imag(y + h) - nf.q_imag(y - h)) / (2 * h);
      CHECK(rel(fd, nf.dq_imag(y)) < 1e-7);
    }
  }
  CHECK(nf.q(0.0L) == 501.0L);
  CHECK(nf.q_imag(0.0L) == nf.q(0.0L));
  const long double t = 0.01L;
  CHECK(rel(nf.q_t2(t), nf.q(1.0L - t) * t * t) < 1e-15);
  CHECK(rel(nf.dq_t3(t), nf.dq(1.0L - t) * t * t * t) < 1e-14);
}

TEST_CASE("probe: identities at the origin") {
  const double gamma = 64.0;
  const double chi = chi_n(5, gamma);
  const PhaseProbe p = riccati_probe(chi, gamma);
  CHECK(p.r0.real() == 0.0);
  CHECK(p.r0.imag() > 0.0);
  CHECK(p.N0 > 0.0L);
  CHECK(rel(p.psi1, gamma / p.N0) < 1e-18);
  CHECK(p.N1 == 0.0L);
  CHECK(p.psi2 == 0.0L);
  const long double want3 =
      -gamma * p.N2 / (p.N0 * p.N0) + 2 * gamma * p.N1 * p.N1 / (p.N0 * p.N0 * p.N0);
  CHECK(rel(p.psi3, want3) < 1e-17);
  CHECK(rel(p.defect0, p.psi1 * p.psi1 - (1.0L + chi)) < 1e-12);
}

TEST_CASE("probe: trajectory starts at the imposed asymptotic value") {
  const double gamma = 100.0;
  const double chi = chi_n(7, gamma);
  const double Y = 3.0;
  const auto traj = riccati_trajectory(chi, gamma, Y);
  REQUIRE(!traj.empty());
  CHECK(traj.front().y == Y);
  CHECK(traj.front().r.real() == 0.0);
  CHECK(traj.front().r.imag() == doctest::Approx(gamma + 1 / Y - Y / (1 + Y * Y)).epsilon(1e-16));
  CHECK(traj.back().y == 0.0);

  const PhaseProbe p = riccati_probe(chi, gamma);
  const double Yp = p.ic_point;
  CHECK(p.r_start.imag() == doctest::Approx(gamma + 1 / Yp - Yp / (1 + Yp * Yp)).epsilon(1e-16));
}

TEST_CASE("probe: |w3(iy)| decreases in y") {
  // d/dy log|w3(iy)| = -Im r(iy).
  for (double gamma : {64.0, 300.0}) {
    for (double sigma : {0.1, 0.64, 1.05}) {
      const double chi = chi_n(static_cast<int>(sigma * gamma), gamma);
      for (const auto& s : riccati_trajectory(chi, gamma, 5.0)) CHECK(s.r.imag() > 0.0);
    }
  }
}

TEST_CASE("probe: doubling Y leaves psi'(0) unchanged") {
  for (double gamma : {64.0, 1000.0}) {
    for (int n : {0, static_cast<int>(0.6 * gamma), static_cast<int>(1.1 * gamma)}) {
      const double chi = chi_n(n, gamma);
      ProbeOptions twice;
      twice.attenuation *= 2;
      const auto a = riccati_probe(chi, gamma);
      const auto b = riccati_probe(chi, gamma, twice);
      CHECK(b.ic_point > a.ic_point);
      CHECK_MESSAGE(rel(b.psi1, a.psi1) <= 1e-13, "gamma = " << gamma << ", n = " << n);
    }
  }
}

TEST_CASE("probe: scaled psi'(0) stays in (0, 4]") {
  for (double gamma : {64.0, 256.0, 2048.0}) {
    for (double sigma : {0.0, 0.3, 0.64, 0.9, 1.1}) {
      const double v = static_cast<double>(
          riccati_probe(chi_n(static_cast<int>(sigma * gamma), gamma), gamma).psi1 / gamma);
      CHECK(v > 0.0);
      CHECK(v <= 4.0);
    }
  }
}

TEST_CASE("probe: rejects nonpositive parameters") {
  CHECK_THROWS_AS(riccati_probe(0.0, 10.0), Error);
  CHECK_THROWS_AS(riccati_probe(10.0, 0.0), Error);
  CHECK_THROWS_AS(riccati_probe(NAN, 10.0), Error);
}

TEST_CASE("modulus path: starts at N0") {
  const double gamma = 64.0;
  const double chi = chi_n(10, gamma);
  const auto p = riccati_probe(chi, gamma);
  const auto path = appell_extend(p, chi, gamma);
  CHECK(path.z_begin() == 0.0);
  CHECK(rel(path.N(0.0), p.N0) < 1e-18);
  CHECK(std::fabs(path.dN(0.0)) < 1e-18L * p.N0);
}

TEST_CASE("modulus path: N, N', N'' nonnegative on (0, 0.99)") {
  const double gamma = 64.0;
  const double chi = chi_n(10, gamma);
  const auto path = appell_extend(riccati_probe(chi, gamma), chi, gamma);
  for (int j = 1; j <= 64; ++j) {
    const double z = 0.99 * j / 65.0;
    const auto d = path.at(z);
    CHECK(std::isfinite(static_cast<double>(d.log_n)));
    CHECK(d.dn_n >= 0.0L);
    CHECK(d.d2n_n >= 0.0L);
  }
}

TEST_CASE("modulus path: M = N / (1 - z^2) is absolutely monotone to second order") {
  for (double gamma : {64.0, 700.0}) {
    for (double sigma : {0.05, 0.5, 0.8, 1.09}) {
      const double chi = chi_n(static_cast<int>(sigma * gamma), gamma);
      const auto path = appell_extend(riccati_probe(chi, gamma), chi, gamma);
      for (int j = 1; j <= 64; ++j) {
        const double z = 0.99 * j / 65.0;
        const auto m = path.m_at(z);
        const auto n = path.at(z);
        CHECK(rel(m.log_n, n.log_n - std::log1p(-static_cast<long double>(z) * z)) < 1e-15);
        CHECK(m.dn_n >= 0.0L);
        CHECK(m.d2n_n >= 0.0L);
      }
    }
  }
}

TEST_CASE("modulus path: N decreases when chi > gamma^2") {
  // q is increasing on (0, 1) in that case, and N ~ gamma / sqrt(q).
  const double gamma = 64.0;
  const double chi = chi_n(60, gamma);
  REQUIRE(chi > gamma * gamma);
  const auto path = appell_extend(riccati_probe(chi, gamma), chi, gamma);
  for (double z : {0.1, 0.4, 0.7}) CHECK(path.at(z).dn_n < 0.0L);
}

TEST_CASE("modulus path: restart from z = 0.25 reproduces z = 0.5") {
  const double gamma = 128.0;
  AppellOptions tight;
  tight.rtol = 1e-18L;
  for (int n : {3, 80, 140}) {
    const double chi = chi_n(n, gamma);
    const auto path = appell_extend(riccati_probe(chi, gamma), chi, gamma, tight);
    const auto s = path.at(0.25);
    const long double n0 = std::exp(s.log_n);
    const auto again = appell_extend_from(chi, gamma, 0.25L, n0, n0 * s.dn_n, tight);
    const auto a = path.at(0.5);
    const auto b = again.at(0.5);
    CHECK(rel(std::exp(b.log_n), std::exp(a.log_n)) <= 1e-11);
    CHECK(rel(b.dn_n, a.dn_n) <= 1e-11);
    CHECK(rel(b.d2n_n, a.d2n_n) <= 1e-11);
  }
}

TEST_CASE("modulus path: argument checks") {
  CHECK_THROWS_AS(appell_extend_from(100.0, 10.0, 1.0L, 1.0L, 0.0L), Error);
  CHECK_THROWS_AS(appell_extend_from(100.0, 10.0, 0.5L, -1.0L, 0.0L), Error);
  const auto path = appell_extend(riccati_probe(100.0, 10.0), 100.0, 10.0);
  CHECK_THROWS_AS(path.at(-0.1), Error);
}

TEST_CASE("derivatives: probe against finite differences of gamma/N") {
  AppellOptions tight;
  tight.rtol = 1e-18L;
  for (double gamma : {64.0, 256.0}) {
    for (int n : {5, static_cast<int>(0.3 * gamma), static_cast<int>(0.9 * gamma)}) {
      const double chi = chi_n(n, gamma);
      const auto p = riccati_probe(chi, gamma);
      const auto path = appell_extend(p, chi, gamma, tight);
      const long double f0 = path.psi_prime(0.0);
      CHECK(rel(f0, p.psi1) < 1e-16);

      // psi' is even in z: one-sided second-order difference for psi''(0).
      const double h = 1e-4;
      const long double d2 =
          (-3 * f0 + 4 * path.psi_prime(h) - path.psi_prime(2 * h)) / (2 * h);
      CHECK(std::fabs(d2 - p.psi2) <= 1e-6L * p.psi1);

      // psi'''(0) from 2 (psi'(h) - psi'(0)) / h^2 with Richardson over h = 1e-3, 1e-4.
      auto c = [&](double hh) { return 2 * (path.psi_prime(hh) - f0) / (hh * hh); };
      const long double d3 = (100 * c(1e-4) - c(1e-3)) / 99;
      CHECK_MESSAGE(rel(d3, p.psi3) <= 1e-6, "gamma = " << gamma << ", n = " << n
                                                        << ", fd = " << static_cast<double>(d3)
                                                        << ", probe = "
                                                        << static_cast<double>(p.psi3));
    }
  }
}

TEST_CASE("phase: integer identity") {
  const std::pair<int, double> cases[] = {{0, 64.0}, {7, 100.0}, {200, 256.0}, {1000, 1024.0}};
  for (const auto& [n, gamma] : cases) {
    const auto r = psi_at_zero(chi_n(n, gamma), gamma);
    CHECK_MESSAGE(std::fabs(r.psi0 + std::numbers::pi / 2 * (n + 1)) <= 1e-9,
                  "n = " << n << ", gamma = " << gamma);
    CHECK(std::fabs(r.xi - n) <= 1e-9);
    CHECK(r.tail_coeffs[0] > 0.0);
    CHECK(r.tail > 0.0);
    CHECK(r.psi0 < 0.0);
  }
}

TEST_CASE("phase: psi0 and xi are tied") {
  const auto r = psi_at_zero(1234.5, 40.0);
  CHECK(std::fabs(r.psi0 + std::numbers::pi / 2 * (r.xi + 1)) <= 1e-13 * std::fabs(r.psi0));
  CHECK(xi_of_chi(1234.5, 40.0) == r.xi);
}

TEST_CASE("phase: midpoint of chi_0 and chi_1 lies between the indices") {
  const double gamma = 64.0;
  const double xi = xi_of_chi(0.5 * (chi_n(0, gamma) + chi_n(1, gamma)), gamma);
  CHECK(xi > 0.0);
  CHECK(xi < 1.0);
}

TEST_CASE("phase: xi increases with chi") {
  const double gamma = 128.0;
  const double lo = chi_n(0, gamma);
  const double hi = chi_n(141, gamma);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(lo, hi);
  for (int i = 0; i < 200; ++i) {
    double a = u(rng);
    double b = u(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    CHECK_MESSAGE(xi_of_chi(a, gamma) < xi_of_chi(b, gamma), "chi = " << a << ", " << b);
  }
}

TEST_CASE("phase: repeated runs are bit-identical") {
  const double a = xi_of_chi(7777.25, 90.0);
  const double b = xi_of_chi(7777.25, 90.0);
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
  const auto p = riccati_probe(7777.25, 90.0);
  const auto q = riccati_probe(7777.25, 90.0);
  CHECK(p.psi3 == q.psi3);
}

TEST_CASE("quadratic tail: closed forms") {
  CHECK(rel(quadratic_tail(1.0L, 0.0L, 1.0L, 0.0L), std::numbers::pi_v<long double> / 2) < 1e-18);
  CHECK(rel(quadratic_tail(1.0L, 2.0L, 1.0L, 1.0L), 0.5L) < 1e-18);
  // 1 / (u^2 - 1) on [2, inf): log(3) / 2.
  CHECK(rel(quadratic_tail(1.0L, 0.0L, -1.0L, 2.0L), std::log(3.0L) / 2) < 1e-17);
  CHECK_THROWS_AS(quadratic_tail(1.0L, 0.0L, -1.0L, 0.0L), Error);
  CHECK_THROWS_AS(quadratic_tail(-1.0L, 0.0L, 1.0L, 0.0L), Error);
}
