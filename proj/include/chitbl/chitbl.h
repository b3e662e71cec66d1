#ifndef CHITBL_H
#define CHITBL_H

/* O(1) evaluation of the prolate spheroidal Sturm-Liouville eigenvalues
 * chi_n(gamma) from a precomputed table, plus the reference solvers used to
 * build and check it.
 *
 * Every function returning int reports a chitbl_status; on failure a message
 * is available from chitbl_last_error() on the same thread. */

#include <stddef.h>

#if defined(_WIN32)
#if defined(CHITBL_BUILDING)
#define CHITBL_API __declspec(dllexport)
#else
#define CHITBL_API __declspec(dllimport)
#endif
#else
#define CHITBL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum chitbl_status {
  CHITBL_OK = 0,
  CHITBL_E_INVALID_ARGUMENT = 1,
  CHITBL_E_OUT_OF_RANGE = 2,
  CHITBL_E_NO_CONVERGENCE = 3,
  CHITBL_E_NUMERICAL = 4,
  CHITBL_E_IO = 5,
  CHITBL_E_BAD_FORMAT = 6,
  CHITBL_E_VERSION = 7,
  CHITBL_E_TRUNCATED = 8,
  CHITBL_E_INVARIANT = 9,
  CHITBL_E_INTERNAL = 10
} chitbl_status;

typedef struct chitbl_table chitbl_table;

typedef struct chitbl_answer {
  double chi;
  int has_derivatives;
  double psi1, psi2, psi3; /* psi'(0), psi''(0), psi'''(0) */
} chitbl_answer;

typedef struct chitbl_panel_info {
  int l;
  double a, b;
  size_t nodes;
  size_t chi_pieces;   /* summed over the panel's nodes */
  size_t deriv_pieces; /* d1 + d2 + d3, summed over nodes */
} chitbl_panel_info;

/* Called after each finished node during a build. */
typedef void (*chitbl_progress_fn)(int l, int node, double gamma, double seconds,
                                   void* user);

CHITBL_API const char* chitbl_last_error(void);
CHITBL_API const char* chitbl_status_name(int status);

CHITBL_API int chitbl_build(int l_min, int l_max, int jobs, chitbl_progress_fn progress,
                            void* user, chitbl_table** out);
CHITBL_API int chitbl_load(const char* path, chitbl_table** out);
CHITBL_API int chitbl_load_bytes(const void* data, size_t size, chitbl_table** out);
CHITBL_API int chitbl_save(const chitbl_table* table, const char* path);
/* Serialized form. With buf == NULL only *size is set. */
CHITBL_API int chitbl_serialize(const chitbl_table* table, void* buf, size_t* size);
CHITBL_API void chitbl_free(chitbl_table* table);

CHITBL_API int chitbl_range(const chitbl_table* table, double* gamma_min, double* gamma_max,
                            double* sigma_max);
CHITBL_API int chitbl_panel_count(const chitbl_table* table, size_t* count);
CHITBL_API int chitbl_panel(const chitbl_table* table, size_t index, chitbl_panel_info* info);

/* chi at sigma = n / gamma; 0 <= n <= 1.1 gamma. */
CHITBL_API int chitbl_eval_n(const chitbl_table* table, double gamma, long long n,
                             int want_derivatives, chitbl_answer* out);
/* chi at 0 <= sigma <= 1.1. */
CHITBL_API int chitbl_eval_sigma(const chitbl_table* table, double gamma, double sigma,
                                 int want_derivatives, chitbl_answer* out);
/* Number of successful evaluations made through this handle. */
CHITBL_API int chitbl_eval_count(const chitbl_table* table, unsigned long long* count);

/* Reference solvers. */
CHITBL_API int chitbl_chi_integer(long long n, double gamma, double* chi);
CHITBL_API int chitbl_xi_of_chi(double chi, double gamma, double* xi);
CHITBL_API int chitbl_probe(double chi, double gamma, double* psi1, double* psi2, double* psi3);

#ifdef __cplusplus
}
#endif

#endif
