#include "chitbl/chitbl.h"

#include <atomic>
#include <climits>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "chitbl/chitab.hpp"
#include "chitbl/error.hpp"
#include "chitbl/legendre_eig.hpp"
#include "chitbl/phasekit.hpp"

struct chitbl_table {
  chitbl::table::ChiTable table;
  mutable std::atomic<unsigned long long> evals{0};
};

namespace {

thread_local std::string g_last_error;

int set_error(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <class F>
int guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return CHITBL_OK;
  } catch (const chitbl::Error& e) {
    return set_error(static_cast<int>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(CHITBL_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(CHITBL_E_INTERNAL, e.what());
  } catch (...) {
    return set_error(CHITBL_E_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) chitbl::fail(chitbl::ErrorCode::invalid_argument, what);
}

int eval(const chitbl_table* t, const chitbl::table::EvalQuery& q, chitbl_answer* out) {
  return guarded([&] {
    require(t != nullptr && out != nullptr, "null argument");
    const auto a = chitbl::table::chi_eval(t->table, q);
    out->chi = a.chi;
    out->has_derivatives = a.has_derivatives ? 1 : 0;
    out->psi1 = a.psi1;
    out->psi2 = a.psi2;
    out->psi3 = a.psi3;
    t->evals.fetch_add(1, std::memory_order_relaxed);
  });
}

}  // namespace

extern "C" {

const char* chitbl_last_error(void) { return g_last_error.c_str(); }

const char* chitbl_status_name(int status) {
  if (status == CHITBL_E_INTERNAL) return "internal";
  if (status < 0 || status > CHITBL_E_INTERNAL) return "unknown";
  return chitbl::to_string(static_cast<chitbl::ErrorCode>(status));
}

int chitbl_build(int l_min, int l_max, int jobs, chitbl_progress_fn progress, void* user,
                 chitbl_table** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = nullptr;
    chitbl::table::ProgressFn fn;
    if (progress != nullptr) {
      fn = [progress, user](const chitbl::table::BuildProgress& p) {
        progress(p.l, static_cast<int>(p.index), p.gamma, p.stats.seconds, user);
      };
    }
    auto* t = new chitbl_table;
    try {
      t->table = chitbl::table::build_table(l_min, l_max, jobs, fn);
    } catch (...) {
      delete t;
      throw;
    }
    *out = t;
  });
}

int chitbl_load(const char* path, chitbl_table** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    auto* t = new chitbl_table;
    try {
      t->table = chitbl::table::load_table(path);
    } catch (...) {
      delete t;
      throw;
    }
    *out = t;
  });
}

int chitbl_load_bytes(const void* data, size_t size, chitbl_table** out) {
  return guarded([&] {
    require((data != nullptr || size == 0) && out != nullptr, "null argument");
    *out = nullptr;
    auto* t = new chitbl_table;
    try {
      t->table = chitbl::table::deserialize(
          std::span<const std::uint8_t>(static_cast<const std::uint8_t*>(data), size));
    } catch (...) {
      delete t;
      throw;
    }
    *out = t;
  });
}

int chitbl_save(const chitbl_table* table, const char* path) {
  return guarded([&] {
    require(table != nullptr && path != nullptr, "null argument");
    chitbl::table::save_table(table->table, path);
  });
}

int chitbl_serialize(const chitbl_table* table, void* buf, size_t* size) {
  return guarded([&] {
    require(table != nullptr && size != nullptr, "null argument");
    const auto bytes = chitbl::table::serialize(table->table);
    if (buf != nullptr) {
      require(*size >= bytes.size(), "buffer too small");
      std::memcpy(buf, bytes.data(), bytes.size());
    }
    *size = bytes.size();
  });
}

void chitbl_free(chitbl_table* table) { delete table; }

int chitbl_range(const chitbl_table* table, double* gamma_min, double* gamma_max,
                 double* sigma_max) {
  return guarded([&] {
    require(table != nullptr, "null table");
    if (gamma_min != nullptr) *gamma_min = table->table.gamma_min();
    if (gamma_max != nullptr) *gamma_max = table->table.gamma_max();
    if (sigma_max != nullptr) *sigma_max = chitbl::table::kSigmaMax;
  });
}

int chitbl_panel_count(const chitbl_table* table, size_t* count) {
  return guarded([&] {
    require(table != nullptr && count != nullptr, "null argument");
    *count = table->table.panels.size();
  });
}

int chitbl_panel(const chitbl_table* table, size_t index, chitbl_panel_info* info) {
  return guarded([&] {
    require(table != nullptr && info != nullptr, "null argument");
    if (index >= table->table.panels.size()) {
      chitbl::fail(chitbl::ErrorCode::out_of_range, "panel index out of range");
    }
    const auto& p = table->table.panels[index];
    info->l = p.l;
    info->a = p.a;
    info->b = p.b;
    info->nodes = p.nodes.size();
    info->chi_pieces = 0;
    info->deriv_pieces = 0;
    for (const auto& n : p.nodes) {
      info->chi_pieces += n.chi.piece_count();
      info->deriv_pieces += n.d1.piece_count() + n.d2.piece_count() + n.d3.piece_count();
    }
  });
}

int chitbl_eval_n(const chitbl_table* table, double gamma, long long n, int want_derivatives,
                  chitbl_answer* out) {
  return eval(table, chitbl::table::EvalQuery::index(gamma, n, want_derivatives != 0), out);
}

int chitbl_eval_sigma(const chitbl_table* table, double gamma, double sigma, int want_derivatives,
                      chitbl_answer* out) {
  return eval(table, chitbl::table::EvalQuery::at_sigma(gamma, sigma, want_derivatives != 0), out);
}

int chitbl_eval_count(const chitbl_table* table, unsigned long long* count) {
  return guarded([&] {
    require(table != nullptr && count != nullptr, "null argument");
    *count = table->evals.load(std::memory_order_relaxed);
  });
}

int chitbl_chi_integer(long long n, double gamma, double* chi) {
  return guarded([&] {
    require(chi != nullptr, "null argument");
    if (n < 0 || n > INT_MAX) chitbl::fail(chitbl::ErrorCode::invalid_argument, "n out of range");
    *chi = chitbl::oxr::chi_integer(static_cast<int>(n), gamma).chi;
  });
}

int chitbl_xi_of_chi(double chi, double gamma, double* xi) {
  return guarded([&] {
    require(xi != nullptr, "null argument");
    *xi = chitbl::phase::xi_of_chi(chi, gamma);
  });
}

int chitbl_probe(double chi, double gamma, double* psi1, double* psi2, double* psi3) {
  return guarded([&] {
    const auto p = chitbl::phase::riccati_probe(chi, gamma);
    if (psi1 != nullptr) *psi1 = static_cast<double>(p.psi1);
    if (psi2 != nullptr) *psi2 = static_cast<double>(p.psi2);
    if (psi3 != nullptr) *psi3 = static_cast<double>(p.psi3);
  });
}

}  // extern "C"
