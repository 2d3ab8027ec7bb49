#include <cmath>

#include "kernels_impl.hpp"

namespace cvar_mlmc::kernels::detail {
namespace {

void accumulate_phi(const double* theta, std::size_t n, double weight, double q_fine,
                    bool has_coarse, double q_coarse, double denom, double* out) {
  if (has_coarse) {
    for (std::size_t r = 0; r < n; ++r)
      out[r] += weight * (phi_term(theta[r], q_fine, denom) -
                          phi_term(theta[r], q_coarse, denom));
  } else {
    for (std::size_t r = 0; r < n; ++r) out[r] += weight * phi_term(theta[r], q_fine, denom);
  }
}

void accumulate_psi(const double* theta, std::size_t n, double weight, double q_fine,
                    double g_fine, bool has_coarse, double q_coarse, double g_coarse,
                    double denom, double* out) {
  if (has_coarse) {
    for (std::size_t r = 0; r < n; ++r)
      out[r] += weight * (psi_term(theta[r], q_fine, g_fine, denom) -
                          psi_term(theta[r], q_coarse, g_coarse, denom));
  } else {
    for (std::size_t r = 0; r < n; ++r)
      out[r] += weight * psi_term(theta[r], q_fine, g_fine, denom);
  }
}

double fourth_difference_sup(const double* values, std::size_t n, double inv_h4) {
  double best = 0.0;
  for (std::size_t i = 2; i + 2 < n; ++i) {
    const double v = std::fabs(fourth_difference(values + i - 2) * inv_h4);
    if (v > best) best = v;
  }
  return best;
}

double max_abs_diff(const double* a, const double* b, std::size_t n) {
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::fabs(a[i] - b[i]);
    if (v > best) best = v;
  }
  return best;
}

}  // namespace

const Table scalar_table = {accumulate_phi, accumulate_psi, fourth_difference_sup,
                            max_abs_diff};

}  // namespace cvar_mlmc::kernels::detail
