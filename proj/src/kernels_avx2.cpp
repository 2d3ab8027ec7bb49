#include <immintrin.h>

#include "kernels_impl.hpp"

namespace cvar_mlmc::kernels::detail {
namespace {

// _mm256_max_pd(a, b) returns b unless a > b, which matches the scalar
// `d > 0 ? d : 0` including for NaN and signed zero.
inline __m256d plus_part(__m256d d) { return _mm256_max_pd(d, _mm256_setzero_pd()); }

inline __m256d abs_pd(__m256d x) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), x);
}

inline double hmax(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  double best = 0.0;
  for (double x : lanes)
    if (x > best) best = x;
  return best;
}

void accumulate_phi(const double* theta, std::size_t n, double weight, double q_fine,
                    bool has_coarse, double q_coarse, double denom, double* out) {
  const __m256d w = _mm256_set1_pd(weight);
  const __m256d qf = _mm256_set1_pd(q_fine);
  const __m256d qc = _mm256_set1_pd(q_coarse);
  const __m256d dn = _mm256_set1_pd(denom);
  std::size_t r = 0;
  if (has_coarse) {
    for (; r + 4 <= n; r += 4) {
      const __m256d t = _mm256_loadu_pd(theta + r);
      const __m256d pf = _mm256_add_pd(t, _mm256_div_pd(plus_part(_mm256_sub_pd(qf, t)), dn));
      const __m256d pc = _mm256_add_pd(t, _mm256_div_pd(plus_part(_mm256_sub_pd(qc, t)), dn));
      const __m256d acc = _mm256_loadu_pd(out + r);
      _mm256_storeu_pd(out + r, _mm256_add_pd(acc, _mm256_mul_pd(w, _mm256_sub_pd(pf, pc))));
    }
    for (; r < n; ++r)
      out[r] += weight * (phi_term(theta[r], q_fine, denom) - phi_term(theta[r], q_coarse, denom));
  } else {
    for (; r + 4 <= n; r += 4) {
      const __m256d t = _mm256_loadu_pd(theta + r);
      const __m256d pf = _mm256_add_pd(t, _mm256_div_pd(plus_part(_mm256_sub_pd(qf, t)), dn));
      const __m256d acc = _mm256_loadu_pd(out + r);
      _mm256_storeu_pd(out + r, _mm256_add_pd(acc, _mm256_mul_pd(w, pf)));
    }
    for (; r < n; ++r) out[r] += weight * phi_term(theta[r], q_fine, denom);
  }
}

inline __m256d psi_vec(__m256d t, __m256d q, __m256d g, __m256d dn) {
  const __m256d prod = _mm256_mul_pd(plus_part(_mm256_sub_pd(q, t)), g);
  // -(x) / denom: flip the sign bit, then divide.
  return _mm256_div_pd(_mm256_xor_pd(prod, _mm256_set1_pd(-0.0)), dn);
}

void accumulate_psi(const double* theta, std::size_t n, double weight, double q_fine,
                    double g_fine, bool has_coarse, double q_coarse, double g_coarse,
                    double denom, double* out) {
  const __m256d w = _mm256_set1_pd(weight);
  const __m256d qf = _mm256_set1_pd(q_fine);
  const __m256d gf = _mm256_set1_pd(g_fine);
  const __m256d qc = _mm256_set1_pd(q_coarse);
  const __m256d gc = _mm256_set1_pd(g_coarse);
  const __m256d dn = _mm256_set1_pd(denom);
  std::size_t r = 0;
  if (has_coarse) {
    for (; r + 4 <= n; r += 4) {
      const __m256d t = _mm256_loadu_pd(theta + r);
      const __m256d diff = _mm256_sub_pd(psi_vec(t, qf, gf, dn), psi_vec(t, qc, gc, dn));
      const __m256d acc = _mm256_loadu_pd(out + r);
      _mm256_storeu_pd(out + r, _mm256_add_pd(acc, _mm256_mul_pd(w, diff)));
    }
    for (; r < n; ++r)
      out[r] += weight * (psi_term(theta[r], q_fine, g_fine, denom) -
                          psi_term(theta[r], q_coarse, g_coarse, denom));
  } else {
    for (; r + 4 <= n; r += 4) {
      const __m256d t = _mm256_loadu_pd(theta + r);
      const __m256d acc = _mm256_loadu_pd(out + r);
      _mm256_storeu_pd(out + r, _mm256_add_pd(acc, _mm256_mul_pd(w, psi_vec(t, qf, gf, dn))));
    }
    for (; r < n; ++r) out[r] += weight * psi_term(theta[r], q_fine, g_fine, denom);
  }
}

double fourth_difference_sup(const double* f, std::size_t n, double inv_h4) {
  if (n < 5) return 0.0;
  const __m256d four = _mm256_set1_pd(4.0);
  const __m256d six = _mm256_set1_pd(6.0);
  const __m256d scale = _mm256_set1_pd(inv_h4);
  __m256d best = _mm256_setzero_pd();
  std::size_t i = 2;
  for (; i + 2 + 4 <= n; i += 4) {
    const __m256d f0 = _mm256_loadu_pd(f + i - 2);
    const __m256d f1 = _mm256_loadu_pd(f + i - 1);
    const __m256d f2 = _mm256_loadu_pd(f + i);
    const __m256d f3 = _mm256_loadu_pd(f + i + 1);
    const __m256d f4 = _mm256_loadu_pd(f + i + 2);
    __m256d s = _mm256_sub_pd(f0, _mm256_mul_pd(four, f1));
    s = _mm256_add_pd(s, _mm256_mul_pd(six, f2));
    s = _mm256_sub_pd(s, _mm256_mul_pd(four, f3));
    s = _mm256_add_pd(s, f4);
    best = _mm256_max_pd(abs_pd(_mm256_mul_pd(s, scale)), best);
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
  __m256d best = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    best = _mm256_max_pd(abs_pd(_mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i))),
                         best);
  double result = hmax(best);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    const double v = d < 0.0 ? -d : d;
    if (v > result) result = v;
  }
  return result;
}

}  // namespace

const Table avx2_table = {accumulate_phi, accumulate_psi, fourth_difference_sup, max_abs_diff};

}  // namespace cvar_mlmc::kernels::detail
