#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "chitbl/chitab.hpp"
#include "chitbl/error.hpp"
#include "chitbl/legendre_eig.hpp"

using namespace chitbl;
using namespace chitbl::table;

namespace {

const ChiTable& fixture() {
  static const ChiTable t = [] {
    const char* path = std::getenv("CHITBL_TEST_TABLE");
    REQUIRE_MESSAGE(path != nullptr, "CHITBL_TEST_TABLE is not set");
    return load_table(path);
  }();
  return t;
}

const std::vector<std::uint8_t>& fixture_bytes() {
  static const std::vector<std::uint8_t> b = serialize(fixture());
  return b;
}

ErrorCode load_code(const std::vector<std::uint8_t>& bytes) {
  try {
    deserialize(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ok;
}

ErrorCode eval_code(const EvalQuery& q) {
  try {
    chi_eval(fixture(), q);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ok;
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_f64(std::vector<std::uint8_t>& b, std::size_t at, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

// Byte offsets in the first panel.
constexpr std::size_t kPanelL = 24;
constexpr std::size_t kPanelA = 28;
constexpr std::size_t kNode0Gamma = 44;
constexpr std::size_t kModel0Count = 52;
constexpr std::size_t kModel0Breaks = 56;

}  // namespace

TEST_CASE("table: shape of the fixture") {
  const ChiTable& t = fixture();
  REQUIRE(!t.panels.empty());
  CHECK(t.gamma_min() == 64.0);
  for (std::size_t p = 0; p < t.panels.size(); ++p) {
    const GammaPanel& panel = t.panels[p];
    CHECK(panel.l == static_cast<int>(p) + 1);
    CHECK(panel.nodes.size() == kNodes);
    const auto nodes = panel_nodes(panel.l);
    for (std::size_t j = 0; j < kNodes; ++j) CHECK(panel.nodes[j].gamma == nodes[j]);
  }
}

TEST_CASE("eval: reproduces stored nodal values") {
  const ChiTable& t = fixture();
  const GammaPanel& panel = t.panels[0];
  for (std::size_t j : {1u, 7u, 20u}) {
    const NodeExpansionSet& node = panel.nodes[j];
    const auto piece = node.chi.piece(1);
    const auto grid = cheb::extrema_grid(piece.a, piece.b, kNodes);
    const auto vals = piece.nodal_values();
    for (std::size_t i : {0u, 5u, 29u}) {
      const double got = chi_eval(t, EvalQuery::at_sigma(node.gamma, grid.nodes[i])).chi;
      CHECK(std::fabs(got - vals[i]) <= 4 * cheb::kEps0 * std::fabs(vals[i]));
    }
  }
}

TEST_CASE("eval: matches the eigensolver at (100, 40)") {
  const double want = oxr::chi_integer(40, 100.0).chi;
  const EvalAnswer a = chi_eval(fixture(), EvalQuery::index(100.0, 40));
  CHECK(std::fabs(a.chi - want) / want <= 1e-13);
  CHECK(!a.has_derivatives);
  CHECK(chi_eval(fixture(), EvalQuery::at_sigma(100.0, 0.4)).chi == a.chi);
}

TEST_CASE("eval: derivatives") {
  const EvalAnswer a = chi_eval(fixture(), EvalQuery::index(100.0, 40, true));
  CHECK(a.has_derivatives);
  CHECK(a.chi > 0.0);
  CHECK(a.psi1 > 0.0);
  CHECK(a.psi2 == 0.0);
}

TEST_CASE("eval: domain edges and range errors") {
  const ChiTable& t = fixture();
  const double top = t.gamma_max();
  CHECK(eval_code(EvalQuery::index(64.0, 0)) == ErrorCode::ok);
  CHECK(eval_code(EvalQuery::index(top, static_cast<long long>(std::floor(1.1 * top)))) ==
        ErrorCode::ok);
  CHECK(eval_code(EvalQuery::at_sigma(top, kSigmaMax)) == ErrorCode::ok);
  CHECK(eval_code(EvalQuery::index(50.0, 1)) == ErrorCode::out_of_range);
  CHECK(eval_code(EvalQuery::index(top * 1.0001, 1)) == ErrorCode::out_of_range);
  CHECK(eval_code(EvalQuery::index(100.0, 111)) == ErrorCode::out_of_range);
  CHECK(eval_code(EvalQuery::index(100.0, -1)) == ErrorCode::out_of_range);
  CHECK(eval_code(EvalQuery::at_sigma(100.0, 1.2)) == ErrorCode::out_of_range);
  CHECK(eval_code(EvalQuery::at_sigma(NAN, 0.5)) == ErrorCode::out_of_range);
  try {
    chi_eval(t, EvalQuery::index(50.0, 1));
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("[64,") != std::string::npos);
  }
}

TEST_CASE("eval: panel boundaries go to the lower panel") {
  const ChiTable& t = fixture();
  CHECK(find_panel(t, 64.0) == 0);
  if (t.panels.size() > 1) {
    CHECK(find_panel(t, 256.0) == 0);
    CHECK(find_panel(t, std::nextafter(256.0, 1e9)) == 1);
  }
}

TEST_CASE("eval: operation count does not depend on the query") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ug(64.0, fixture().gamma_max());
  std::uniform_real_distribution<double> us(0.0, kSigmaMax);
  for (int i = 0; i < 200; ++i) {
    EvalCounters c;
    chi_eval(fixture(), EvalQuery::at_sigma(ug(rng), us(rng)), &c);
    CHECK(c.panels == 1);
    CHECK(c.model_lookups == kNodes);
    CHECK(c.term_evaluations == kNodes * kNodes);
    CHECK(c.barycentric_steps == 1);
  }
}

TEST_CASE("eval: concurrent readers agree with serial evaluation") {
  std::vector<EvalQuery> qs;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ug(64.0, fixture().gamma_max());
  std::uniform_real_distribution<double> us(0.0, kSigmaMax);
  for (int i = 0; i < 2000; ++i) qs.push_back(EvalQuery::at_sigma(ug(rng), us(rng), i % 2 == 0));
  std::vector<double> serial;
  for (const auto& q : qs) serial.push_back(chi_eval(fixture(), q).chi);
  std::vector<std::vector<double>> out(4, std::vector<double>(qs.size()));
  std::vector<std::thread> pool;
  for (int w = 0; w < 4; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = 0; i < qs.size(); ++i) out[w][i] = chi_eval(fixture(), qs[i]).chi;
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& o : out) CHECK(std::memcmp(o.data(), serial.data(), 8 * serial.size()) == 0);
}

TEST_CASE("format: save, load, save is byte-identical") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto a = dir / "chitbl_roundtrip_a.bin";
  const auto b = dir / "chitbl_roundtrip_b.bin";
  save_table(fixture(), a);
  save_table(load_table(a), b);
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  CHECK(read(a) == read(b));
  CHECK(serialize(deserialize(fixture_bytes())) == fixture_bytes());
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("format: header layout") {
  const auto& b = fixture_bytes();
  CHECK(std::memcmp(b.data(), "CHITBL01", 8) == 0);
  CHECK(b[8] == kFormatVersion);
  CHECK(b[12] == kNodes);
  CHECK(b[16] == fixture().panels.size());
  CHECK(b[20] == kFlagDerivatives);
  CHECK(b[kPanelL] == 1);
}

TEST_CASE("format: damaged inputs are rejected with distinct errors") {
  const auto& good = fixture_bytes();

  auto bad = good;
  bad[0] = 'X';
  CHECK(load_code(bad) == ErrorCode::bad_format);

  bad = good;
  put_u32(bad, 8, 2);
  CHECK(load_code(bad) == ErrorCode::version_mismatch);

  bad = good;
  put_u32(bad, 12, 31);
  CHECK(load_code(bad) == ErrorCode::bad_format);

  bad = good;
  put_u32(bad, 20, 3);
  CHECK(load_code(bad) == ErrorCode::bad_format);

  bad = good;
  bad.pop_back();
  CHECK(load_code(bad) == ErrorCode::truncated);
  CHECK(load_code(std::vector<std::uint8_t>(good.begin(), good.begin() + 30)) ==
        ErrorCode::truncated);
  CHECK(load_code({}) == ErrorCode::truncated);

  bad = good;
  bad.push_back(0);
  CHECK(load_code(bad) == ErrorCode::bad_format);

  // Panel interval that does not match its index.
  bad = good;
  put_f64(bad, kPanelA, 65.0);
  CHECK(load_code(bad) == ErrorCode::invariant_violation);
  bad = good;
  put_u32(bad, kPanelL, 2);
  CHECK(load_code(bad) == ErrorCode::invariant_violation);

  // First gamma node moved off the panel start.
  bad = good;
  put_f64(bad, kNode0Gamma, 64.5);
  CHECK(load_code(bad) == ErrorCode::invariant_violation);

  // Interior breakpoint moved past its successor.
  REQUIRE(fixture().panels[0].nodes[0].chi.piece_count() >= 2);
  bad = good;
  const double next = fixture().panels[0].nodes[0].chi.breakpoints()[2];
  put_f64(bad, kModel0Breaks + 8, next + 0.01);
  CHECK(load_code(bad) == ErrorCode::invariant_violation);

  // Non-finite coefficient.
  bad = good;
  const std::size_t pieces = fixture().panels[0].nodes[0].chi.piece_count();
  put_f64(bad, kModel0Breaks + 8 * (pieces + 1), NAN);
  CHECK(load_code(bad) == ErrorCode::invariant_violation);

  // Piece count larger than the data.
  bad = good;
  put_u32(bad, kModel0Count, 0x7fffffff);
  CHECK(load_code(bad) == ErrorCode::truncated);
}

TEST_CASE("format: missing file is an I/O error") {
  try {
    load_table("/nonexistent/chitbl.bin");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
}
