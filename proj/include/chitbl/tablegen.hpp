#pragma once

// Construction of the chi table: for each gamma panel I_l = [4^(2+l), 4^(3+l)]
// and each of its 30 gamma nodes, piecewise Chebyshev models in sigma of
// chi_sigma(gamma) and of psi'(0)/gamma, psi''(0)/gamma, psi'''(0)/gamma.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "chitbl/chebkit.hpp"

namespace chitbl::table {

inline constexpr std::size_t kNodes = 30;
inline constexpr double kSigmaMax = 1.1;
inline constexpr int kMaxPanel = 7;

/// [4^(2+l), 4^(3+l)].
double panel_lower(int l);
double panel_upper(int l);

struct NodeExpansionSet {
  double gamma = 0.0;
  cheb::PiecewiseChebModel chi;  // chi as a function of sigma on [0, 1.1]
  cheb::PiecewiseChebModel d1;   // psi'(0)/gamma
  cheb::PiecewiseChebModel d2;   // psi''(0)/gamma
  cheb::PiecewiseChebModel d3;   // psi'''(0)/gamma

  std::size_t piece_count() const noexcept {
    return chi.piece_count() + d1.piece_count() + d2.piece_count() + d3.piece_count();
  }
};

struct GammaPanel {
  int l = 0;
  double a = 0.0;
  double b = 0.0;
  std::vector<NodeExpansionSet> nodes;  // ascending gamma, extrema grid on [a, b]

  std::size_t piece_count() const noexcept;
};

struct BuildMeta {
  double eps0 = cheb::kEps0;
  std::size_t k = kNodes;
  double tail_factor = 100.0;
  /// Relative bracket width at which the sigma-node inversion stops.
  double inversion_tol = 10.0 * cheb::kEps0;
  double sigma_max = kSigmaMax;
};

struct ChiTable {
  std::vector<GammaPanel> panels;  // consecutive l, tiling [gamma_min, gamma_max]
  BuildMeta meta;

  double gamma_min() const { return panels.front().a; }
  double gamma_max() const { return panels.back().b; }
};

/// Gamma nodes of panel l (extrema grid, 30 points).
std::vector<double> panel_nodes(int l);

/// g(chi) = -(2/pi) Psi_chi(0; gamma) - 1 over [chi_0(gamma), chi_m(gamma)],
/// m = ceil(1.1 gamma).
struct GModel {
  cheb::PiecewiseChebModel model;
  double chi_lo = 0.0;
  double chi_hi = 0.0;
  int m = 0;
  std::size_t probes = 0;
};

GModel build_g_model(double gamma);

/// chi as a function of sigma on [0, 1.1], solving g(chi) = gamma sigma on the
/// g model for every sigma node.
cheb::PiecewiseChebModel invert_to_f(double gamma, const GModel& g);

/// Solution of g(chi) = xi on the g model by bisection.
double invert_at(const GModel& g, double xi);

struct NodeStats {
  std::size_t g_probes = 0;
  std::size_t d_probes = 0;
  double seconds = 0.0;
};

NodeExpansionSet build_node_set(double gamma, NodeStats* stats = nullptr);

struct BuildProgress {
  int l;
  std::size_t index;
  double gamma;
  NodeStats stats;
};

using ProgressFn = std::function<void(const BuildProgress&)>;

/// Builds panels l_min..l_max with `jobs` worker threads. The result does not
/// depend on `jobs` or on scheduling.
ChiTable build_table(int l_min, int l_max, int jobs, const ProgressFn& progress = {});

}  // namespace chitbl::table
