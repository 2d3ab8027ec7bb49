#pragma once

#include <cstddef>

// Backend entry points; raw pointers because these are the ABI between
// separately compiled translation units (kernels_avx2.cpp is built with
// -mavx2 and must not be inlined into generic code).
namespace cvar_mlmc::kernels::detail {

struct Table {
  void (*accumulate_phi)(const double* theta, std::size_t n, double weight, double q_fine,
                         bool has_coarse, double q_coarse, double denom, double* out);
  void (*accumulate_psi)(const double* theta, std::size_t n, double weight, double q_fine,
                         double g_fine, bool has_coarse, double q_coarse, double g_coarse,
                         double denom, double* out);
  double (*fourth_difference_sup)(const double* values, std::size_t n, double inv_h4);
  double (*max_abs_diff)(const double* a, const double* b, std::size_t n);
};

extern const Table scalar_table;
#if defined(CVAR_MLMC_HAVE_AVX2)
extern const Table avx2_table;
#endif
#if defined(CVAR_MLMC_HAVE_NEON)
extern const Table neon_table;
#endif

// Scalar element operations shared by the SIMD tails.
inline double phi_term(double theta, double q, double denom) {
  const double d = q - theta;
  return theta + (d > 0.0 ? d : 0.0) / denom;
}

inline double psi_term(double theta, double q, double g, double denom) {
  const double d = q - theta;
  return -((d > 0.0 ? d : 0.0) * g) / denom;
}

inline double fourth_difference(const double* f) {
  return (((f[0] - 4.0 * f[1]) + 6.0 * f[2]) - 4.0 * f[3]) + f[4];
}

}  // namespace cvar_mlmc::kernels::detail
