// Command-line front end: build, eval, verify, bench.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "chitbl/chitbl.h"

namespace {

enum Exit : int { kOk = 0, kUsage = 2, kRange = 3, kVerify = 4, kIo = 5, kOther = 1 };

int exit_for(int status) {
  switch (status) {
    case CHITBL_OK:
      return kOk;
    case CHITBL_E_INVALID_ARGUMENT:
    case CHITBL_E_OUT_OF_RANGE:
      return kRange;
    case CHITBL_E_IO:
    case CHITBL_E_BAD_FORMAT:
    case CHITBL_E_VERSION:
    case CHITBL_E_TRUNCATED:
    case CHITBL_E_INVARIANT:
      return kIo;
    default:
      return kOther;
  }
}

struct Failure {
  int code;
};

void check(int status, const char* what) {
  if (status == CHITBL_OK) return;
  std::fprintf(stderr, "chitbl: %s: %s (%s)\n", what, chitbl_last_error(),
               chitbl_status_name(status));
  throw Failure{exit_for(status)};
}

using TablePtr = std::unique_ptr<chitbl_table, decltype(&chitbl_free)>;

TablePtr open_table(std::string path) {
  if (path.empty()) {
    const char* env = std::getenv("CHITBL_PATH");
    if (env == nullptr || *env == '\0') {
      std::fprintf(stderr, "chitbl: no table given (use --table or set CHITBL_PATH)\n");
      throw Failure{kUsage};
    }
    path = env;
  }
  chitbl_table* t = nullptr;
  check(chitbl_load(path.c_str(), &t), ("loading " + path).c_str());
  return TablePtr(t, &chitbl_free);
}

struct PanelRange {
  int l;
  double a, b;
};

std::vector<PanelRange> panels_of(const chitbl_table* t) {
  size_t count = 0;
  check(chitbl_panel_count(t, &count), "reading panels");
  std::vector<PanelRange> out;
  for (size_t i = 0; i < count; ++i) {
    chitbl_panel_info info{};
    check(chitbl_panel(t, i, &info), "reading panels");
    out.push_back({info.l, info.a, info.b});
  }
  return out;
}

// (gamma, n) samples for one panel and sigma quartile q: n/gamma in
// [q/4, (q+1)/4].
struct Sample {
  double gamma;
  long long n;
};

std::vector<Sample> cell_samples(std::mt19937_64& rng, const PanelRange& p, int q, int n_gamma,
                                 int n_index) {
  std::uniform_real_distribution<double> ug(p.a, p.b);
  std::vector<Sample> out;
  for (int i = 0; i < n_gamma; ++i) {
    const double g = ug(rng);
    const auto lo = static_cast<long long>(std::ceil(0.25 * q * g));
    const auto hi = static_cast<long long>(std::floor(0.25 * (q + 1) * g));
    std::uniform_int_distribution<long long> un(lo, std::max(lo, hi));
    for (int j = 0; j < n_index; ++j) out.push_back({g, un(rng)});
  }
  return out;
}

// ---------------------------------------------------------------------------

struct BuildArgs {
  int lmin = 1;
  int lmax = 3;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string out;
  bool quiet = false;
};

void on_node(int l, int node, double gamma, double seconds, void* user) {
  if (*static_cast<bool*>(user)) return;
  std::fprintf(stderr, "  l=%d node %2d gamma=%-12.6g %.1fs\n", l, node, gamma, seconds);
}

int cmd_build(BuildArgs& a) {
  if (a.lmin < 1 || a.lmax > 7 || a.lmin > a.lmax) {
    std::fprintf(stderr, "chitbl build: need 1 <= --lmin <= --lmax <= 7\n");
    return kUsage;
  }
  if (a.jobs < 1) {
    std::fprintf(stderr, "chitbl build: --jobs must be positive\n");
    return kUsage;
  }
  const auto t0 = std::chrono::steady_clock::now();
  chitbl_table* raw = nullptr;
  check(chitbl_build(a.lmin, a.lmax, a.jobs, &on_node, &a.quiet, &raw), "build");
  TablePtr t(raw, &chitbl_free);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  check(chitbl_save(t.get(), a.out.c_str()), ("writing " + a.out).c_str());

  size_t count = 0;
  check(chitbl_panel_count(t.get(), &count), "reading panels");
  std::printf("%-4s %-22s %10s %12s\n", "l", "gamma range", "chi pieces", "deriv pieces");
  for (size_t i = 0; i < count; ++i) {
    chitbl_panel_info p{};
    check(chitbl_panel(t.get(), i, &p), "reading panels");
    std::printf("%-4d [%8g, %8g]     %10zu %12zu\n", p.l, p.a, p.b, p.chi_pieces, p.deriv_pieces);
  }
  const auto bytes = std::filesystem::file_size(a.out);
  std::printf("build time %.1f s, jobs %d\n", secs, a.jobs);
  std::printf("file %s: %ju bytes (%.4f MB, %.4f MB per panel)\n", a.out.c_str(),
              static_cast<std::uintmax_t>(bytes), bytes / 1e6, bytes / 1e6 / count);
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string table;
  double gamma = 0.0;
  long long n = -1;
  double sigma = -1.0;
  bool derivs = false;
};

int cmd_eval(const EvalArgs& a, bool have_n) {
  TablePtr t = open_table(a.table);
  chitbl_answer ans{};
  const int st = have_n ? chitbl_eval_n(t.get(), a.gamma, a.n, a.derivs, &ans)
                        : chitbl_eval_sigma(t.get(), a.gamma, a.sigma, a.derivs, &ans);
  check(st, "eval");
  std::printf("chi %.17g\n", ans.chi);
  if (ans.has_derivatives) {
    std::printf("psi1 %.17g\npsi2 %.17g\npsi3 %.17g\n", ans.psi1, ans.psi2, ans.psi3);
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string table;
  int samples = 100;
  int xi_samples = 100;
  unsigned long long seed = 1;
  int jobs = 1;
  double tol = 1e-13;
  double xi_tol = 1e-9;
  std::string csv;
};

template <class F>
void parallel_for(std::size_t count, int jobs, F&& f) {
  const auto width = static_cast<std::size_t>(std::max(1, jobs));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < width; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += width) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

int cmd_verify(const VerifyArgs& a) {
  if (a.samples < 1 || a.xi_samples < 0 || a.jobs < 1) {
    std::fprintf(stderr, "chitbl verify: --samples and --jobs must be positive\n");
    return kUsage;
  }
  TablePtr t = open_table(a.table);
  const auto panels = panels_of(t.get());
  std::mt19937_64 rng(a.seed);

  std::FILE* csv = nullptr;
  if (!a.csv.empty()) {
    csv = std::fopen(a.csv.c_str(), "w");
    if (csv == nullptr) {
      std::fprintf(stderr, "chitbl verify: cannot write %s\n", a.csv.c_str());
      return kIo;
    }
    std::fprintf(csv, "l,quartile,max_rel_err\n");
  }

  bool ok = true;
  std::printf("max relative error of table vs eigensolver (%d gammas x %d indices per cell)\n",
              a.samples, a.samples);
  std::printf("%-22s %12s %12s %12s %12s\n", "gamma range", "0-0.25", "0.25-0.5", "0.5-0.75",
              "0.75-1");
  for (const auto& p : panels) {
    std::printf("[%8g, %8g]  ", p.a, p.b);
    for (int q = 0; q < 4; ++q) {
      const auto s = cell_samples(rng, p, q, a.samples, a.samples);
      std::vector<double> err(s.size(), 0.0);
      std::vector<int> status(s.size(), CHITBL_OK);
      parallel_for(s.size(), a.jobs, [&](std::size_t i) {
        double ref = 0.0;
        chitbl_answer ans{};
        status[i] = chitbl_chi_integer(s[i].n, s[i].gamma, &ref);
        if (status[i] == CHITBL_OK) status[i] = chitbl_eval_n(t.get(), s[i].gamma, s[i].n, 0, &ans);
        if (status[i] == CHITBL_OK) err[i] = std::fabs(ans.chi - ref) / std::fabs(ref);
      });
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (status[i] != CHITBL_OK) {
          std::fprintf(stderr, "\nchitbl verify: failed at gamma=%.17g n=%lld (%s)\n", s[i].gamma,
                       s[i].n, chitbl_status_name(status[i]));
          return exit_for(status[i]);
        }
      }
      const double worst = *std::max_element(err.begin(), err.end());
      ok = ok && worst <= a.tol;
      std::printf(" %12.3e", worst);
      if (csv != nullptr) std::fprintf(csv, "%d,%d,%.6e\n", p.l, q, worst);
    }
    std::printf("\n");
  }

  if (a.xi_samples > 0) {
    std::vector<Sample> s;
    std::uniform_int_distribution<std::size_t> up(0, panels.size() - 1);
    for (int i = 0; i < a.xi_samples; ++i) {
      const auto& p = panels[up(rng)];
      const double g = std::uniform_real_distribution<double>(p.a, p.b)(rng);
      const auto top = static_cast<long long>(std::floor(1.1 * g));
      s.push_back({g, std::uniform_int_distribution<long long>(0, top)(rng)});
    }
    std::vector<double> err(s.size(), 0.0);
    std::vector<int> status(s.size(), CHITBL_OK);
    parallel_for(s.size(), a.jobs, [&](std::size_t i) {
      double chi = 0.0;
      double xi = 0.0;
      status[i] = chitbl_chi_integer(s[i].n, s[i].gamma, &chi);
      if (status[i] == CHITBL_OK) status[i] = chitbl_xi_of_chi(chi, s[i].gamma, &xi);
      if (status[i] == CHITBL_OK) err[i] = std::fabs(xi - static_cast<double>(s[i].n));
    });
    double worst = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (status[i] != CHITBL_OK) {
        std::fprintf(stderr, "chitbl verify: phase check failed at gamma=%.17g n=%lld (%s)\n",
                     s[i].gamma, s[i].n, chitbl_status_name(status[i]));
        return exit_for(status[i]);
      }
      worst = std::max(worst, err[i]);
    }
    ok = ok && worst <= a.xi_tol;
    std::printf("xi identity: max |xi(chi_n) - n| = %.3e over %d samples\n", worst, a.xi_samples);
  }
  if (csv != nullptr) std::fclose(csv);
  std::printf("%s (thresholds: %.0e relative, %.0e on xi)\n", ok ? "PASS" : "FAIL", a.tol,
              a.xi_tol);
  return ok ? kOk : kVerify;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string table;
  int reps = 100;
  int samples = 100;
  bool oxr = false;
  int oxr_samples = 3;
  unsigned long long seed = 1;
  std::string csv;
};

int cmd_bench(const BenchArgs& a) {
  if (a.reps < 1 || a.samples < 1 || a.oxr_samples < 1) {
    std::fprintf(stderr, "chitbl bench: --reps and --samples must be positive\n");
    return kUsage;
  }
  TablePtr t = open_table(a.table);
  const auto panels = panels_of(t.get());
  std::mt19937_64 rng(a.seed);
  using clock = std::chrono::steady_clock;

  // Loop overhead with an empty body, per iteration.
  double overhead = 0.0;
  {
    volatile double sink = 0.0;
    const auto t0 = clock::now();
    for (int i = 0; i < a.samples * a.reps; ++i) sink = sink + 1.0;
    overhead = std::chrono::duration<double>(clock::now() - t0).count() / (a.samples * a.reps);
  }

  unsigned long long before = 0;
  check(chitbl_eval_count(t.get(), &before), "bench");
  std::vector<std::vector<double>> table_mean(panels.size(), std::vector<double>(4));
  std::vector<std::vector<double>> oxr_mean(panels.size(), std::vector<double>(4));
  volatile double sink = 0.0;
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    for (int q = 0; q < 4; ++q) {
      const auto s = cell_samples(rng, panels[pi], q, a.samples, 1);
      const auto t0 = clock::now();
      for (const auto& x : s) {
        for (int r = 0; r < a.reps; ++r) {
          chitbl_answer ans{};
          check(chitbl_eval_n(t.get(), x.gamma, x.n, 0, &ans), "bench");
          sink = ans.chi;
        }
      }
      const double total = std::chrono::duration<double>(clock::now() - t0).count();
      table_mean[pi][q] = std::max(0.0, total / (s.size() * a.reps) - overhead);
      if (a.oxr) {
        const auto so = cell_samples(rng, panels[pi], q, a.oxr_samples, 1);
        const auto t1 = clock::now();
        for (const auto& x : so) {
          for (int r = 0; r < a.reps; ++r) {
            double chi = 0.0;
            check(chitbl_chi_integer(x.n, x.gamma, &chi), "bench");
            sink = chi;
          }
        }
        oxr_mean[pi][q] =
            std::chrono::duration<double>(clock::now() - t1).count() / (so.size() * a.reps);
      }
    }
  }
  unsigned long long after = 0;
  check(chitbl_eval_count(t.get(), &after), "bench");
  (void)sink;

  std::printf("mean seconds per evaluation (%d samples x %d reps per cell)\n", a.samples, a.reps);
  std::printf("%-22s %-6s %12s %12s %12s %12s\n", "gamma range", "method", "0-0.25", "0.25-0.5",
              "0.5-0.75", "0.75-1");
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    std::printf("[%8g, %8g]   table ", panels[pi].a, panels[pi].b);
    for (int q = 0; q < 4; ++q) std::printf(" %12.3e", table_mean[pi][q]);
    std::printf("\n");
    if (a.oxr) {
      std::printf("%-22s oxr   ", "");
      for (int q = 0; q < 4; ++q) std::printf(" %12.3e", oxr_mean[pi][q]);
      std::printf("\n");
    }
  }
  const unsigned long long expected = static_cast<unsigned long long>(panels.size()) * 4ull *
                                      static_cast<unsigned long long>(a.samples) *
                                      static_cast<unsigned long long>(a.reps);
  std::printf("table evaluations: %llu (expected %llu): %s\n", after - before, expected,
              after - before == expected ? "ok" : "MISMATCH");
  if (!a.csv.empty()) {
    std::FILE* csv = std::fopen(a.csv.c_str(), "w");
    if (csv == nullptr) {
      std::fprintf(stderr, "chitbl bench: cannot write %s\n", a.csv.c_str());
      return kIo;
    }
    std::fprintf(csv, "l,quartile,table_s,oxr_s\n");
    for (std::size_t pi = 0; pi < panels.size(); ++pi) {
      for (int q = 0; q < 4; ++q) {
        std::fprintf(csv, "%d,%d,%.6e,%.6e\n", panels[pi].l, q, table_mean[pi][q],
                     a.oxr ? oxr_mean[pi][q] : 0.0);
      }
    }
    std::fclose(csv);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prolate spheroidal eigenvalue tables: build, eval, verify, bench"};
  app.require_subcommand(1);

  BuildArgs build;
  auto* b = app.add_subcommand("build", "Build a table and write it to a file");
  b->add_option("--lmin", build.lmin, "First gamma panel (1..7)");
  b->add_option("--lmax", build.lmax, "Last gamma panel (1..7)");
  b->add_option("--jobs", build.jobs, "Worker threads");
  b->add_option("--out", build.out, "Output file")->required();
  b->add_flag("--quiet", build.quiet, "No per-node progress");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate chi (and derivatives) from a table");
  e->add_option("--table", ev.table, "Table file (default: $CHITBL_PATH)");
  e->add_option("--gamma", ev.gamma, "Bandlimit")->required();
  auto* on = e->add_option("--n", ev.n, "Integer index, 0 <= n <= 1.1 gamma");
  auto* os = e->add_option("--sigma", ev.sigma, "sigma in [0, 1.1]");
  on->excludes(os);
  e->add_flag("--derivs", ev.derivs, "Also print psi'(0), psi''(0), psi'''(0)");

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "Compare a table with the eigensolver");
  v->add_option("--table", ver.table, "Table file (default: $CHITBL_PATH)");
  v->add_option("--samples", ver.samples, "Gammas per cell and indices per gamma");
  v->add_option("--xi-samples", ver.xi_samples, "Samples for the phase identity check");
  v->add_option("--seed", ver.seed, "Random seed");
  v->add_option("--jobs", ver.jobs, "Worker threads for sampling");
  v->add_option("--csv", ver.csv, "Write the per-cell errors as CSV");

  BenchArgs be;
  auto* bn = app.add_subcommand("bench", "Time table evaluation per cell");
  bn->add_option("--table", be.table, "Table file (default: $CHITBL_PATH)");
  bn->add_option("--reps", be.reps, "Repetitions of each evaluation");
  bn->add_option("--samples", be.samples, "Samples per cell");
  bn->add_flag("--oxr", be.oxr, "Also time the eigensolver");
  bn->add_option("--oxr-samples", be.oxr_samples, "Eigensolver samples per cell");
  bn->add_option("--seed", be.seed, "Random seed");
  bn->add_option("--csv", be.csv, "Write the per-cell timings as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*b) return cmd_build(build);
    if (*e) {
      if (on->count() == 0 && os->count() == 0) {
        std::fprintf(stderr, "chitbl eval: give --n or --sigma\n");
        return kUsage;
      }
      return cmd_eval(ev, on->count() > 0);
    }
    if (*v) return cmd_verify(ver);
    if (*bn) return cmd_bench(be);
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "chitbl: %s\n", ex.what());
    return kIo;
  }
  return kUsage;
}
