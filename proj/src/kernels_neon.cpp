#include <arm_neon.h>

#include "kernels_impl.hpp"

namespace cvar_mlmc::kernels::detail {
namespace {

// vmaxq_f64 propagates NaN, unlike the scalar select; use compare + select so
// that NaN and -0.0 map to +0.0 exactly as in phi_term/psi_term.
inline float64x2_t plus_part(float64x2_t d) {
  const uint64x2_t positive = vcgtq_f64(d, vdupq_n_f64(0.0));
  return vbslq_f64(positive, d, vdupq_n_f64(0.0));
}

inline float64x2_t keep_larger(float64x2_t v, float64x2_t best) {
  return vbslq_f64(vcgtq_f64(v, best), v, best);
}

inline double hmax(float64x2_t v) {
  const double a = vgetq_lane_f64(v, 0);
  const double b = vgetq_lane_f64(v, 1);
  return b > a ? b : a;
}

void accumulate_phi(const double* theta, std::size_t n, double weight, double q_fine,
                    bool has_coarse, double q_coarse, double denom, double* out) {
  const float64x2_t w = vdupq_n_f64(weight);
  const float64x2_t qf = vdupq_n_f64(q_fine);
  const float64x2_t qc = vdupq_n_f64(q_coarse);
  const float64x2_t dn = vdupq_n_f64(denom);
  std::size_t r = 0;
  for (; r + 2 <= n; r += 2) {
    const float64x2_t t = vld1q_f64(theta + r);
    float64x2_t term = vaddq_f64(t, vdivq_f64(plus_part(vsubq_f64(qf, t)), dn));
    if (has_coarse)
      term = vsubq_f64(term, vaddq_f64(t, vdivq_f64(plus_part(vsubq_f64(qc, t)), dn)));
    vst1q_f64(out + r, vaddq_f64(vld1q_f64(out + r), vmulq_f64(w, term)));
  }
  for (; r < n; ++r) {
    double term = phi_term(theta[r], q_fine, denom);
    if (has_coarse) term = term - phi_term(theta[r], q_coarse, denom);
    out[r] += weight * term;
  }
}

inline float64x2_t psi_vec(float64x2_t t, float64x2_t q, float64x2_t g, float64x2_t dn) {
  return vdivq_f64(vnegq_f64(vmulq_f64(plus_part(vsubq_f64(q, t)), g)), dn);
}

void accumulate_psi(const double* theta, std::size_t n, double weight, double q_fine,
                    double g_fine, bool has_coarse, double q_coarse, double g_coarse,
                    double denom, double* out) {
  const float64x2_t w = vdupq_n_f64(weight);
  const float64x2_t qf = vdupq_n_f64(q_fine);
  const float64x2_t gf = vdupq_n_f64(g_fine);
  const float64x2_t qc = vdupq_n_f64(q_coarse);
  const float64x2_t gc = vdupq_n_f64(g_coarse);
  const float64x2_t dn = vdupq_n_f64(denom);
  std::size_t r = 0;
  for (; r + 2 <= n; r += 2) {
    const float64x2_t t = vld1q_f64(theta + r);
    float64x2_t term = psi_vec(t, qf, gf, dn);
    if (has_coarse) term = vsubq_f64(term, psi_vec(t, qc, gc, dn));
    vst1q_f64(out + r, vaddq_f64(vld1q_f64(out + r), vmulq_f64(w, term)));
  }
  for (; r < n; ++r) {
    double term = psi_term(theta[r], q_fine, g_fine, denom);
    if (has_coarse) term = term - psi_term(theta[r], q_coarse, g_coarse, denom);
    out[r] += weight * term;
  }
}

double fourth_difference_sup(const double* f, std::size_t n, double inv_h4) {
  if (n < 5) return 0.0;
  const float64x2_t four = vdupq_n_f64(4.0);
  const float64x2_t six = vdupq_n_f64(6.0);
  const float64x2_t scale = vdupq_n_f64(inv_h4);
  float64x2_t best = vdupq_n_f64(0.0);
  std::size_t i = 2;
  for (; i + 2 + 2 <= n; i += 2) {
    float64x2_t s = vsubq_f64(vld1q_f64(f + i - 2), vmulq_f64(four, vld1q_f64(f + i - 1)));
    s = vaddq_f64(s, vmulq_f64(six, vld1q_f64(f + i)));
    s = vsubq_f64(s, vmulq_f64(four, vld1q_f64(f + i + 1)));
    s = vaddq_f64(s, vld1q_f64(f + i + 2));
    best = keep_larger(vabsq_f64(vmulq_f64(s, scale)), best);
  }
  double result = hmax(best);
  for (; i + 2 < n; ++i) {
    const double v = fourth_difference(f + i - 2) * inv_h4;
    const double a = v < 0.0 ? -v : v;
    if (a > result) result = a;
  }
  return result;
}

double max_abs_diff(const double* a, const double* b, std::size_t n) {
  float64x2_t best = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    best = keep_larger(vabsq_f64(vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i))), best);
  double result = hmax(best);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    const double v = d < 0.0 ? -d : d;
    if (v > result) result = v;
  }
  return result;
}

}  // namespace

const Table neon_table = {accumulate_phi, accumulate_psi, fourth_difference_sup, max_abs_diff};

}  // namespace cvar_mlmc::kernels::detail
