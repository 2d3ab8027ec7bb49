#include "cvar_mlmc/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "cvar_mlmc/errors.hpp"
#include "kernels_impl.hpp"

namespace cvar_mlmc::kernels {
namespace {

Backend detect_best() {
#if defined(CVAR_MLMC_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2")) return Backend::avx2;
#endif
#if defined(CVAR_MLMC_HAVE_NEON)
  return Backend::neon;
#endif
  return Backend::scalar;
}

Backend initial_backend() {
  if (const char* env = std::getenv("CVAR_MLMC_KERNELS")) {
    const std::string want(env);
    for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon})
      if (want == backend_name(b) && backend_available(b)) return b;
  }
  return detect_best();
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

const detail::Table& table() {
  switch (current().load(std::memory_order_relaxed)) {
#if defined(CVAR_MLMC_HAVE_AVX2)
    case Backend::avx2:
      return detail::avx2_table;
#endif
#if defined(CVAR_MLMC_HAVE_NEON)
    case Backend::neon:
      return detail::neon_table;
#endif
    default:
      return detail::scalar_table;
  }
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

bool backend_available(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(CVAR_MLMC_HAVE_AVX2)
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Backend::neon:
#if defined(CVAR_MLMC_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend active_backend() { return current().load(); }

void force_backend(Backend b) {
  if (!backend_available(b))
    throw ParameterError("kernel backend not available: " + std::string(backend_name(b)));
  current().store(b);
}

void reset_backend() { current().store(detect_best()); }

void accumulate_phi(std::span<const double> theta, double weight, double q_fine,
                    bool has_coarse, double q_coarse, double denom, std::span<double> out) {
  if (out.size() != theta.size()) throw ParameterError("accumulate_phi: size mismatch");
  table().accumulate_phi(theta.data(), theta.size(), weight, q_fine, has_coarse, q_coarse, denom,
                         out.data());
}

void accumulate_psi(std::span<const double> theta, double weight, double q_fine,
                    double g_fine, bool has_coarse, double q_coarse, double g_coarse,
                    double denom, std::span<double> out) {
  if (out.size() != theta.size()) throw ParameterError("accumulate_psi: size mismatch");
  table().accumulate_psi(theta.data(), theta.size(), weight, q_fine, g_fine, has_coarse,
                         q_coarse, g_coarse, denom, out.data());
}

double fourth_difference_sup(std::span<const double> values, double h) {
  if (!(h > 0.0)) throw ParameterError("fourth_difference_sup: h must be positive");
  const double h2 = h * h;
  return table().fourth_difference_sup(values.data(), values.size(), 1.0 / (h2 * h2));
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ParameterError("max_abs_diff: size mismatch");
  return table().max_abs_diff(a.data(), b.data(), a.size());
}

}  // namespace cvar_mlmc::kernels
