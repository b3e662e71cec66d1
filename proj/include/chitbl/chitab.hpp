#pragma once

// O(1) evaluation of chi_n(gamma) and psi^(i)(0) from a built table, and the
// CHITBL01 binary format.
//
// CHITBL01 (little-endian):
//   "CHITBL01"
//   u32 version, u32 k, u32 panel count, u32 flags
//   per panel:  u32 l, f64 a, f64 b, then k nodes
//   per node:   f64 gamma, then 4 models (chi, d1, d2, d3)
//   per model:  u32 m, (m+1) f64 breakpoints, m*k f64 coefficients

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "chitbl/tablegen.hpp"

namespace chitbl::table {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint32_t kFlagDerivatives = 1u;

struct EvalQuery {
  double gamma = 0.0;
  bool by_index = true;
  long long n = 0;     // used when by_index
  double sigma = 0.0;  // used otherwise
  bool want_derivatives = false;

  static EvalQuery index(double gamma, long long n, bool derivs = false) {
    return {gamma, true, n, 0.0, derivs};
  }
  static EvalQuery at_sigma(double gamma, double sigma, bool derivs = false) {
    return {gamma, false, 0, sigma, derivs};
  }
};

struct EvalAnswer {
  double chi = 0.0;
  bool has_derivatives = false;
  double psi1 = 0.0, psi2 = 0.0, psi3 = 0.0;  // derivatives of Psi at z = 0
};

/// Work done by one evaluation.
struct EvalCounters {
  std::size_t panels = 0;
  std::size_t model_lookups = 0;
  std::size_t term_evaluations = 0;
  std::size_t barycentric_steps = 0;
};

/// Index of the panel holding gamma (a boundary gamma goes to the lower panel).
std::size_t find_panel(const ChiTable& table, double gamma);

EvalAnswer chi_eval(const ChiTable& table, const EvalQuery& q, EvalCounters* counters = nullptr);

std::vector<std::uint8_t> serialize(const ChiTable& table);
ChiTable deserialize(std::span<const std::uint8_t> bytes);

void save_table(const ChiTable& table, const std::filesystem::path& path);
ChiTable load_table(const std::filesystem::path& path);

}  // namespace chitbl::table
