#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "chitbl/chebkit.hpp"
#include "chitbl/error.hpp"

using namespace chitbl;
using namespace chitbl::cheb;

namespace {

double rel(double got, double want) {
  return want == 0.0 ? std::fabs(got) : std::fabs(got - want) / std::fabs(want);
}

std::vector<double> sample(double a, double b, std::size_t k, double (*f)(double)) {
  const ChebGrid g = extrema_grid(a, b, k);
  std::vector<double> v;
  for (double x : g.nodes) v.push_back(f(x));
  return v;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ok;
}

}  // namespace

TEST_CASE("extrema grid: closed-form small grids") {
  const auto g2 = extrema_grid(-1, 1, 2);
  CHECK(g2.nodes == std::vector<double>{-1.0, 1.0});

  const auto g3 = extrema_grid(0, 2, 3);
  CHECK(g3.nodes == std::vector<double>{0.0, 1.0, 2.0});

  const auto g5 = extrema_grid(-1, 1, 5);
  const double r = std::sqrt(2.0) / 2.0;
  const std::vector<double> want{-1.0, -r, 0.0, r, 1.0};
  for (std::size_t j = 0; j < 5; ++j) CHECK(g5.nodes[j] == doctest::Approx(want[j]).epsilon(1e-16));
}

TEST_CASE("extrema grid: invariants") {
  const auto g = extrema_grid(0.25, 7.5, 30);
  REQUIRE(g.size() == 30);
  CHECK(g.nodes.front() == 0.25);
  CHECK(g.nodes.back() == 7.5);
  for (std::size_t j = 1; j < 30; ++j) CHECK(g.nodes[j] > g.nodes[j - 1]);
  for (std::size_t j = 1; j + 1 < 30; ++j) {
    const double want = 3.875 - 3.625 * std::cos(j * M_PI / 29.0);
    CHECK(rel(g.nodes[j], want) < 16 * kEps0);
  }
}

TEST_CASE("extrema grid: rejects bad input") {
  CHECK(code_of([] { extrema_grid(0, 1, 1); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { extrema_grid(1, 1, 4); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { extrema_grid(2, 1, 4); }) == ErrorCode::invalid_argument);
}

TEST_CASE("vals_to_coeffs: identities T0, T1, (T0+T2)/2") {
  const std::size_t k = 30;
  auto one = vals_to_coeffs(-1, 1, sample(-1, 1, k, [](double) { return 1.0; }));
  auto lin = vals_to_coeffs(-1, 1, sample(-1, 1, k, [](double x) { return x; }));
  auto sq = vals_to_coeffs(-1, 1, sample(-1, 1, k, [](double x) { return x * x; }));
  for (std::size_t j = 0; j < k; ++j) {
    CHECK(std::fabs(one.coeffs[j] - (j == 0 ? 1.0 : 0.0)) < 10 * k * kEps0);
    CHECK(std::fabs(lin.coeffs[j] - (j == 1 ? 1.0 : 0.0)) < 10 * k * kEps0);
    CHECK(std::fabs(sq.coeffs[j] - (j == 0 || j == 2 ? 0.5 : 0.0)) < 10 * k * kEps0);
  }
}

TEST_CASE("vals_to_coeffs / coeffs_to_vals round trip") {
  const std::size_t k = 30;
  const auto v = sample(0.5, 3.0, k, [](double x) { return std::exp(x) * std::sin(3 * x); });
  const auto back = coeffs_to_vals(vals_to_coeffs(0.5, 3.0, v).coeffs);
  const double scale = std::fabs(*std::max_element(v.begin(), v.end(), [](double a, double b) {
    return std::fabs(a) < std::fabs(b);
  }));
  for (std::size_t j = 0; j < k; ++j) CHECK(std::fabs(back[j] - v[j]) <= 10 * k * kEps0 * scale);
}

TEST_CASE("evaluation: constants, nodes, cube") {
  const std::size_t k = 30;
  const auto c = vals_to_coeffs(0, 1, std::vector<double>(k, 2.5));
  for (double x : {0.0, 0.1, 0.77, 1.0}) CHECK(rel(c(x), 2.5) < 4 * kEps0);

  const auto v = sample(0, 1, k, [](double x) { return x * x * x; });
  const auto e = vals_to_coeffs(0, 1, v);
  const auto g = extrema_grid(0, 1, k);
  for (std::size_t j = 0; j < k; ++j) {
    CHECK(barycentric_eval(0, 1, v, g.nodes[j]) == v[j]);
    CHECK(std::fabs(e(g.nodes[j]) - v[j]) <= 4 * kEps0);
  }
  CHECK(rel(e(0.37), 0.050653) < 1e-14);
  CHECK(rel(barycentric_eval(0, 1, v, 0.37), 0.050653) < 1e-14);
}

TEST_CASE("evaluation: out-of-range x names the range") {
  const auto e = vals_to_coeffs(0, 1, std::vector<double>(30, 1.0));
  try {
    e(1.5);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::out_of_range);
    CHECK(std::string(err.what()).find("1.5") != std::string::npos);
    CHECK(std::string(err.what()).find("[0, 1]") != std::string::npos);
  }
}

TEST_CASE("transform consistency: Clenshaw equals barycentric") {
  const std::size_t k = 30;
  const auto v = sample(-2, 5, k, [](double x) { return std::cos(x) + 0.1 * x * x; });
  const auto e = vals_to_coeffs(-2, 5, v);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2, 5);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    const double b = barycentric_eval(-2, 5, v, x);
    CHECK(std::fabs(e(x) - b) <= 10 * k * kEps0 * std::max(1.0, std::fabs(b)));
  }
}

TEST_CASE("tail test") {
  std::vector<double> c(30, 0.0);
  CHECK(passes_tail_test(c));
  c[0] = 1.0;
  CHECK(passes_tail_test(c));
  c[15] = 1e-14;
  CHECK(!passes_tail_test(c));
  c[15] = 1e-16;
  CHECK(passes_tail_test(c));
}

TEST_CASE("adaptive expansion: polynomial is one piece and round trips") {
  const auto m = adaptive_expand([](double x) { return std::pow(x, 5) + 1.0; }, 0, 1, 30);
  CHECK(m.piece_count() == 1);
  CHECK(m.lower() == 0.0);
  CHECK(m.upper() == 1.0);

  auto p = [](double x) {
    double s = 0;
    for (int j = 14; j >= 0; --j) s = s * x + std::sin(j + 1.0);
    return s;
  };
  const auto mp = adaptive_expand(p, -1, 1, 30);
  CHECK(mp.piece_count() == 1);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    CHECK(std::fabs(mp(x) - p(x)) <= 10 * 30 * kEps0 * std::max(1.0, std::fabs(p(x))));
  }
}

TEST_CASE("adaptive expansion: Runge-type function") {
  auto f = [](double x) { return 1.0 / (1e-4 + x * x); };
  const auto m = adaptive_expand(f, -1, 1, 30);
  CHECK(m.piece_count() > 1);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng);
    worst = std::max(worst, rel(m(x), f(x)));
  }
  CHECK(worst <= 5e-13);

  for (std::size_t i = 0; i < m.piece_count(); ++i) CHECK(passes_tail_test(m.piece_coeffs(i)));

  // Breakpoint continuity.
  const auto bps = m.breakpoints();
  for (std::size_t i = 1; i + 1 < bps.size(); ++i) {
    const double left = m.piece(i - 1).eval_unchecked(bps[i]);
    const double right = m.piece(i).eval_unchecked(bps[i]);
    CHECK(std::fabs(left - right) <= 100 * kEps0 * std::fabs(f(bps[i])));
  }
}

TEST_CASE("adaptive expansion: stricter threshold refines the partition") {
  auto f = [](double x) { return 1.0 / (1.0 + 25.0 * x * x); };
  AdaptiveOptions loose;
  AdaptiveOptions strict;
  strict.tail_factor = loose.tail_factor / 2;
  const auto a = adaptive_expand(f, -1, 1, 30, loose);
  const auto b = adaptive_expand(f, -1, 1, 30, strict);
  CHECK(b.piece_count() >= a.piece_count());
  // Every breakpoint of the looser run is one of the stricter run.
  for (double x : a.breakpoints()) {
    const auto bb = b.breakpoints();
    CHECK(std::find(bb.begin(), bb.end(), x) != bb.end());
  }
}

TEST_CASE("adaptive expansion: piece lookup is half-open") {
  const auto m = adaptive_expand([](double x) { return std::fabs(x - 0.5) + std::exp(x); }, 0, 1,
                                 30, {1e12, 256.0, false});
  const auto bps = m.breakpoints();
  REQUIRE(bps.size() > 2);
  CHECK(m.locate(bps[1]) == 1);
  CHECK(m.locate(m.upper()) == m.piece_count() - 1);
  CHECK(m.locate(m.lower()) == 0);
}

TEST_CASE("adaptive expansion: noise is reported") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  auto noisy = [&](double x) { return x + 1e-10 * u(rng); };
  CHECK(code_of([&] { adaptive_expand(noisy, 0, 1, 30); }) == ErrorCode::numerical_failure);
  CHECK(code_of([] { adaptive_expand([](double x) { return x; }, 0, 1, 31); }) ==
        ErrorCode::invalid_argument);
}

TEST_CASE("adaptive expansion: absolute floor admits interior zeros with noise") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  auto f = [&](double x) { return (x - 0.4) + 1e-15 * u(rng); };
  AdaptiveOptions opts;
  opts.absolute_floor = true;
  opts.tail_factor = 1e8;
  const auto m = adaptive_expand(f, 0, 1, 30, opts);
  CHECK(m.piece_count() < 10);
  CHECK(std::fabs(m(0.7) - 0.3) < 1e-13);
}

TEST_CASE("piecewise model: construction checks") {
  CHECK(code_of([] { PiecewiseChebModel({0.0, 1.0}, std::vector<double>(29), 30); }) ==
        ErrorCode::invalid_argument);
  CHECK(code_of([] { PiecewiseChebModel({0.0, 1.0, 1.0}, std::vector<double>(60), 30); }) ==
        ErrorCode::invariant_violation);
  const PiecewiseChebModel m({0.0, 1.0, 2.0}, std::vector<double>(60, 0.0), 30);
  CHECK(code_of([&] { m(2.5); }) == ErrorCode::out_of_range);
  CHECK(code_of([&] { m(-0.1); }) == ErrorCode::out_of_range);
}
