#pragma once

#include <span>
#include <string_view>

namespace cvar_mlmc::kernels {

/// Inner loops over the θ grid. Every backend performs the same IEEE
/// operations in the same order per element, so results are bit-identical
/// across backends (see tests/test_kernels.cpp).
enum class Backend { scalar, avx2, neon };

std::string_view backend_name(Backend b);
bool backend_available(Backend b);
/// Best backend supported by the running CPU, unless overridden by
/// force_backend() or the CVAR_MLMC_KERNELS environment variable.
Backend active_backend();
void force_backend(Backend b);
void reset_backend();

/// One sample's contribution to the pointwise Φ estimate, scaled by
/// `weight`:  out[r] += weight * (φ(θ_r, q_fine) - φ(θ_r, q_coarse)),
/// with φ(θ, q) = θ + (q - θ)⁺ / denom. The coarse term is dropped when
/// `has_coarse` is false.
void accumulate_phi(std::span<const double> theta, double weight, double q_fine,
                    bool has_coarse, double q_coarse, double denom, std::span<double> out);

/// Same for ψ(θ, q, g) = -((q - θ)⁺ · g) / denom.
void accumulate_psi(std::span<const double> theta, double weight, double q_fine,
                    double g_fine, bool has_coarse, double q_coarse, double g_coarse,
                    double denom, std::span<double> out);

/// max_i |f[i-2] - 4f[i-1] + 6f[i] - 4f[i+1] + f[i+2]| / h⁴ over interior i.
double fourth_difference_sup(std::span<const double> values, double h);

/// max_i |a[i] - b[i]|.
double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace cvar_mlmc::kernels
