#include "chitbl/chitab.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "chitbl/error.hpp"

namespace chitbl::table {

namespace {

constexpr char kMagic[8] = {'C', 'H', 'I', 'T', 'B', 'L', '0', '1'};

// Barycentric weights of the 30-point extrema grid: (-1)^j, halved at the ends.
constexpr std::array<double, kNodes> make_weights() {
  std::array<double, kNodes> w{};
  for (std::size_t j = 0; j < kNodes; ++j) w[j] = (j % 2 == 0) ? 1.0 : -1.0;
  w[0] *= 0.5;
  w[kNodes - 1] *= 0.5;
  return w;
}
constexpr std::array<double, kNodes> kWeights = make_weights();

[[noreturn]] void range_error(const char* what, double v, double lo, double hi) {
  std::ostringstream os;
  os.precision(17);
  os << what << " = " << v << " outside the table range [" << lo << ", " << hi << "]";
  fail(ErrorCode::out_of_range, os.str());
}

double interpolate(const GammaPanel& panel, const std::array<double, kNodes>& v, double gamma) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < kNodes; ++j) {
    const double d = gamma - panel.nodes[j].gamma;
    if (d == 0.0) return v[j];
    const double w = kWeights[j] / d;
    num += w * v[j];
    den += w;
  }
  return num / den;
}

// ---------------------------------------------------------------------------
// Byte encoding

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) {
      std::ostringstream os;
      os << "table data ends early: need " << n << " bytes at offset " << pos_ << ", have "
         << b_.size() - pos_;
      fail(ErrorCode::truncated, os.str());
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  bool magic() {
    need(sizeof kMagic);
    const bool ok = std::memcmp(b_.data() + pos_, kMagic, sizeof kMagic) == 0;
    pos_ += sizeof kMagic;
    return ok;
  }
  std::size_t remaining() const { return b_.size() - pos_; }
  std::size_t offset() const { return pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void write_model(Writer& w, const cheb::PiecewiseChebModel& m) {
  w.u32(static_cast<std::uint32_t>(m.piece_count()));
  for (double x : m.breakpoints()) w.f64(x);
  for (double c : m.coeffs()) w.f64(c);
}

[[noreturn]] void invariant(const std::string& what) {
  fail(ErrorCode::invariant_violation, "table invariant violated: " + what);
}

cheb::PiecewiseChebModel read_model(Reader& r, std::size_t k) {
  const std::uint32_t m = r.u32();
  if (m == 0) fail(ErrorCode::bad_format, "model with zero pieces");
  // Checked against the remaining size before allocating.
  const std::size_t count = (static_cast<std::size_t>(m) + 1) + static_cast<std::size_t>(m) * k;
  r.need(count * 8);
  std::vector<double> bps(m + 1);
  for (double& x : bps) x = r.f64();
  std::vector<double> coeffs(static_cast<std::size_t>(m) * k);
  for (double& c : coeffs) {
    c = r.f64();
    if (!std::isfinite(c)) invariant("non-finite coefficient");
  }
  if (bps.front() != 0.0 || bps.back() != kSigmaMax) invariant("model domain is not [0, 1.1]");
  return cheb::PiecewiseChebModel(std::move(bps), std::move(coeffs), k);
}

}  // namespace

std::size_t find_panel(const ChiTable& table, double gamma) {
  if (table.panels.empty()) fail(ErrorCode::invalid_argument, "table has no panels");
  if (!(gamma >= table.gamma_min() && gamma <= table.gamma_max())) {
    range_error("gamma", gamma, table.gamma_min(), table.gamma_max());
  }
  std::size_t p = 0;
  while (gamma > table.panels[p].b) ++p;
  return p;
}

EvalAnswer chi_eval(const ChiTable& table, const EvalQuery& q, EvalCounters* counters) {
  const std::size_t p = find_panel(table, q.gamma);
  const GammaPanel& panel = table.panels[p];
  if (panel.nodes.size() != kNodes) fail(ErrorCode::invalid_argument, "panel is incomplete");

  double sigma = q.sigma;
  if (q.by_index) {
    if (q.n < 0 || static_cast<double>(q.n) > kSigmaMax * q.gamma) {
      std::ostringstream os;
      os.precision(17);
      os << "n = " << q.n << " outside [0, 1.1 gamma] = [0, " << kSigmaMax * q.gamma << "]";
      fail(ErrorCode::out_of_range, os.str());
    }
    sigma = std::min(static_cast<double>(q.n) / q.gamma, kSigmaMax);
  } else if (!(sigma >= 0.0 && sigma <= kSigmaMax)) {
    range_error("sigma", sigma, 0.0, kSigmaMax);
  }

  std::array<double, kNodes> v{};
  for (std::size_t j = 0; j < kNodes; ++j) v[j] = panel.nodes[j].chi.eval_unchecked(sigma);
  EvalAnswer ans;
  ans.chi = interpolate(panel, v, q.gamma);
  std::size_t lookups = kNodes;
  if (q.want_derivatives) {
    const cheb::PiecewiseChebModel NodeExpansionSet::*models[3] = {
        &NodeExpansionSet::d1, &NodeExpansionSet::d2, &NodeExpansionSet::d3};
    double* outs[3] = {&ans.psi1, &ans.psi2, &ans.psi3};
    for (int i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < kNodes; ++j) v[j] = (panel.nodes[j].*models[i]).eval_unchecked(sigma);
      *outs[i] = q.gamma * interpolate(panel, v, q.gamma);
    }
    ans.has_derivatives = true;
    lookups += 3 * kNodes;
  }
  if (counters != nullptr) {
    counters->panels += 1;
    counters->model_lookups += lookups;
    counters->term_evaluations += lookups * table.meta.k;
    counters->barycentric_steps += q.want_derivatives ? 4 : 1;
  }
  return ans;
}

std::vector<std::uint8_t> serialize(const ChiTable& table) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(table.meta.k));
  w.u32(static_cast<std::uint32_t>(table.panels.size()));
  w.u32(kFlagDerivatives);
  for (const GammaPanel& panel : table.panels) {
    w.u32(static_cast<std::uint32_t>(panel.l));
    w.f64(panel.a);
    w.f64(panel.b);
    for (const NodeExpansionSet& node : panel.nodes) {
      w.f64(node.gamma);
      write_model(w, node.chi);
      write_model(w, node.d1);
      write_model(w, node.d2);
      write_model(w, node.d3);
    }
  }
  return w.take();
}

ChiTable deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (!r.magic()) fail(ErrorCode::bad_format, "not a CHITBL01 file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    std::ostringstream os;
    os << "table format version " << version << ", expected " << kFormatVersion;
    fail(ErrorCode::version_mismatch, os.str());
  }
  const std::uint32_t k = r.u32();
  const std::uint32_t panels = r.u32();
  const std::uint32_t flags = r.u32();
  if (k != kNodes) {
    std::ostringstream os;
    os << "unsupported term count k = " << k;
    fail(ErrorCode::bad_format, os.str());
  }
  if (panels < 1 || panels > static_cast<std::uint32_t>(kMaxPanel)) {
    fail(ErrorCode::bad_format, "panel count out of range");
  }
  if (flags != kFlagDerivatives) fail(ErrorCode::bad_format, "unknown flags");

  ChiTable table;
  table.meta.k = k;
  for (std::uint32_t p = 0; p < panels; ++p) {
    GammaPanel panel;
    panel.l = static_cast<int>(r.u32());
    panel.a = r.f64();
    panel.b = r.f64();
    if (panel.l < 1 || panel.l > kMaxPanel) invariant("panel index out of range");
    if (panel.a != panel_lower(panel.l) || panel.b != panel_upper(panel.l)) {
      invariant("panel interval does not match its index");
    }
    if (p > 0 && panel.l != table.panels.back().l + 1) invariant("panels do not tile");
    panel.nodes.resize(k);
    for (std::uint32_t j = 0; j < k; ++j) {
      NodeExpansionSet& node = panel.nodes[j];
      node.gamma = r.f64();
      node.chi = read_model(r, k);
      node.d1 = read_model(r, k);
      node.d2 = read_model(r, k);
      node.d3 = read_model(r, k);
      if (j > 0 && !(node.gamma > panel.nodes[j - 1].gamma)) invariant("gamma nodes not increasing");
    }
    if (panel.nodes.front().gamma != panel.a || panel.nodes.back().gamma != panel.b) {
      invariant("gamma nodes do not span the panel");
    }
    table.panels.push_back(std::move(panel));
  }
  if (r.remaining() != 0) {
    std::ostringstream os;
    os << r.remaining() << " trailing bytes after the last panel";
    fail(ErrorCode::bad_format, os.str());
  }
  return table;
}

void save_table(const ChiTable& table, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize(table);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) fail(ErrorCode::io, "write to " + path.string() + " failed");
}

ChiTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::io, "read from " + path.string() + " failed");
  return deserialize(bytes);
}

}  // namespace chitbl::table
