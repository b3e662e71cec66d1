#include "chitbl/tablegen.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "chitbl/error.hpp"
#include "chitbl/legendre_eig.hpp"
#include "chitbl/phasekit.hpp"

namespace chitbl::table {

namespace {

// Probe outputs carry ~1e-14 relative noise, far above eps0; the derivative
// models aim at ~1e-12 instead.
constexpr double kDerivativeTailFactor = 1e8;

// One adaptive expansion per [anchors[i], anchors[i+1]], joined into a model.
cheb::PiecewiseChebModel expand_between(const cheb::BatchFunction& f,
                                        const std::vector<double>& anchors,
                                        const cheb::AdaptiveOptions& opts = {}) {
  std::vector<double> bps{anchors.front()};
  std::vector<double> coeffs;
  for (std::size_t i = 0; i + 1 < anchors.size(); ++i) {
    const cheb::PiecewiseChebModel part =
        cheb::adaptive_expand_batch(f, anchors[i], anchors[i + 1], kNodes, opts);
    const auto pb = part.breakpoints();
    bps.insert(bps.end(), pb.begin() + 1, pb.end());
    const auto pc = part.coeffs();
    coeffs.insert(coeffs.end(), pc.begin(), pc.end());
  }
  return cheb::PiecewiseChebModel(std::move(bps), std::move(coeffs), kNodes);
}

// 0, 1/gamma, 2/gamma, 4/gamma, ..., 1.1. chi roughly doubles across each of
// the low intervals, so relative accuracy holds down to sigma = 0.
std::vector<double> sigma_anchors(double gamma) {
  std::vector<double> a{0.0};
  for (double n = 1.0; n / gamma < 0.25; n *= 2.0) a.push_back(n / gamma);
  a.push_back(kSigmaMax);
  return a;
}

}  // namespace

double panel_lower(int l) { return std::ldexp(1.0, 2 * (2 + l)); }
double panel_upper(int l) { return std::ldexp(1.0, 2 * (3 + l)); }

std::size_t GammaPanel::piece_count() const noexcept {
  std::size_t n = 0;
  for (const auto& node : nodes) n += node.piece_count();
  return n;
}

std::vector<double> panel_nodes(int l) {
  if (l < 1 || l > kMaxPanel) fail(ErrorCode::invalid_argument, "panel index out of range");
  return cheb::extrema_grid(panel_lower(l), panel_upper(l), kNodes).nodes;
}

GModel build_g_model(double gamma) {
  if (!(gamma >= panel_lower(1)) || !std::isfinite(gamma)) {
    std::ostringstream os;
    os.precision(17);
    os << "g model needs gamma >= 64 (gamma = " << gamma << ")";
    fail(ErrorCode::invalid_argument, os.str());
  }
  GModel g;
  g.m = static_cast<int>(std::ceil(kSigmaMax * gamma));
  g.chi_lo = oxr::chi_integer(0, gamma).chi;
  g.chi_hi = oxr::chi_integer(g.m, gamma).chi;

  auto sampler = [&](std::span<const double> chis) {
    std::vector<double> xi(chis.size());
    for (std::size_t j = 0; j < chis.size(); ++j) {
      xi[j] = phase::xi_of_chi(chis[j], gamma);
      ++g.probes;
      if (j > 0 && !(xi[j] > xi[j - 1])) {
        std::ostringstream os;
        os.precision(17);
        os << "g is not increasing between chi = " << chis[j - 1] << " and " << chis[j]
           << " (gamma = " << gamma << ")";
        fail(ErrorCode::invariant_violation, os.str());
      }
    }
    return xi;
  };

  // Split at chi_n for n = 1, 2, 4, 8, ... so the absolute error of every piece
  // scales with its xi values.
  std::vector<double> anchors{g.chi_lo};
  for (int n = 1; n < g.m; n *= 2) anchors.push_back(oxr::chi_integer(n, gamma).chi);
  anchors.push_back(g.chi_hi);

  g.model = expand_between(sampler, anchors);
  return g;
}

double invert_at(const GModel& g, double xi) {
  const auto& model = g.model;
  if (xi == 0.0) return g.chi_lo;
  const double g_hi = model.eval_unchecked(g.chi_hi);
  if (!(xi > 0.0) || xi > g_hi) {
    std::ostringstream os;
    os.precision(17);
    os << "xi = " << xi << " outside the built range [0, " << g_hi << "]";
    fail(ErrorCode::out_of_range, os.str());
  }
  // Piece whose end values bracket xi, then bisection inside it.
  const auto bps = model.breakpoints();
  std::size_t lo_i = 0;
  std::size_t hi_i = model.piece_count();
  while (hi_i - lo_i > 1) {
    const std::size_t mid = (lo_i + hi_i) / 2;
    if (model.piece(mid).eval_unchecked(bps[mid]) <= xi) {
      lo_i = mid;
    } else {
      hi_i = mid;
    }
  }
  const cheb::ChebExpansion piece = model.piece(lo_i);
  double lo = bps[lo_i];
  double hi = bps[lo_i + 1];
  const double tol = 10.0 * cheb::kEps0;
  while (hi - lo > tol * std::fabs(lo)) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (piece.eval_unchecked(mid) < xi) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

cheb::PiecewiseChebModel invert_to_f(double gamma, const GModel& g) {
  auto sampler = [&](std::span<const double> sigmas) {
    std::vector<double> chi(sigmas.size());
    for (std::size_t j = 0; j < sigmas.size(); ++j) chi[j] = invert_at(g, gamma * sigmas[j]);
    return chi;
  };
  cheb::PiecewiseChebModel f = expand_between(sampler, sigma_anchors(gamma));

  constexpr int kChecks = 1000;
  double prev = f(0.0);
  for (int j = 1; j <= kChecks; ++j) {
    const double v = f(kSigmaMax * j / kChecks);
    if (!(v > prev)) {
      std::ostringstream os;
      os.precision(17);
      os << "chi model is not increasing near sigma = " << kSigmaMax * j / kChecks
         << " (gamma = " << gamma << ")";
      fail(ErrorCode::invariant_violation, os.str());
    }
    prev = v;
  }
  return f;
}

NodeExpansionSet build_node_set(double gamma, NodeStats* stats) {
  const auto t0 = std::chrono::steady_clock::now();
  NodeExpansionSet set;
  set.gamma = gamma;
  const GModel g = build_g_model(gamma);
  set.chi = invert_to_f(gamma, g);

  std::map<double, phase::PhaseProbe> memo;
  auto probe_at = [&](double sigma) -> const phase::PhaseProbe& {
    auto it = memo.find(sigma);
    if (it == memo.end()) {
      it = memo.emplace(sigma, phase::riccati_probe(set.chi(sigma), gamma)).first;
    }
    return it->second;
  };
  auto derivative_model = [&](phase::xreal phase::PhaseProbe::*field) {
    auto sampler = [&](std::span<const double> sigmas) {
      std::vector<double> v(sigmas.size());
      for (std::size_t j = 0; j < sigmas.size(); ++j) {
        v[j] = static_cast<double>(probe_at(sigmas[j]).*field / gamma);
      }
      return v;
    };
    cheb::AdaptiveOptions opts;
    opts.absolute_floor = true;
    opts.tail_factor = kDerivativeTailFactor;
    return cheb::adaptive_expand_batch(sampler, 0.0, kSigmaMax, kNodes, opts);
  };
  set.d1 = derivative_model(&phase::PhaseProbe::psi1);
  set.d2 = derivative_model(&phase::PhaseProbe::psi2);
  set.d3 = derivative_model(&phase::PhaseProbe::psi3);

  if (stats != nullptr) {
    stats->g_probes = g.probes;
    stats->d_probes = memo.size();
    stats->seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return set;
}

ChiTable build_table(int l_min, int l_max, int jobs, const ProgressFn& progress) {
  if (l_min < 1 || l_max > kMaxPanel || l_min > l_max) {
    std::ostringstream os;
    os << "panel range must satisfy 1 <= l_min <= l_max <= " << kMaxPanel << " (got " << l_min
       << ".." << l_max << ")";
    fail(ErrorCode::invalid_argument, os.str());
  }
  if (jobs < 1) fail(ErrorCode::invalid_argument, "jobs must be at least 1");

  struct Task {
    int l;
    std::size_t i;
    double gamma;
  };
  ChiTable table;
  std::vector<Task> tasks;
  for (int l = l_min; l <= l_max; ++l) {
    GammaPanel panel;
    panel.l = l;
    panel.a = panel_lower(l);
    panel.b = panel_upper(l);
    panel.nodes.resize(kNodes);
    const std::vector<double> gammas = panel_nodes(l);
    for (std::size_t i = 0; i < kNodes; ++i) tasks.push_back({l, i, gammas[i]});
    table.panels.push_back(std::move(panel));
  }
  // Most expensive nodes first; results are keyed by (l, i), not by order.
  std::vector<std::size_t> order(tasks.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = order.size() - 1 - j;

  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex report;

  auto worker = [&]() {
    for (;;) {
      if (abort.load()) return;
      const std::size_t j = next.fetch_add(1);
      if (j >= order.size()) return;
      const Task& task = tasks[order[j]];
      try {
        NodeStats stats;
        NodeExpansionSet set = build_node_set(task.gamma, &stats);
        table.panels[static_cast<std::size_t>(task.l - l_min)].nodes[task.i] = std::move(set);
        if (progress) {
          std::lock_guard<std::mutex> lock(report);
          progress({task.l, task.i, task.gamma, stats});
        }
      } catch (...) {
        errors[order[j]] = std::current_exception();
        abort.store(true);
      }
    }
  };

  const auto width = static_cast<std::size_t>(jobs);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(width, tasks.size()); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t j = 0; j < tasks.size(); ++j) {
    if (!errors[j]) continue;
    std::ostringstream os;
    os.precision(17);
    os << "node build failed (l = " << tasks[j].l << ", i = " << tasks[j].i
       << ", gamma = " << tasks[j].gamma << "): ";
    try {
      std::rethrow_exception(errors[j]);
    } catch (const Error& e) {
      os << e.what();
      fail(e.code(), os.str());
    } catch (const std::exception& e) {
      os << e.what();
      fail(ErrorCode::numerical_failure, os.str());
    }
  }
  return table;
}

}  // namespace chitbl::table
