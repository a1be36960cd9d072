#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops used by scoring, back-propagation and the
// whole-data loss. Every kernel has a scalar reference in simd_scalar.cpp;
// vectorized variants live in their own translation units and are picked at
// runtime from the CPU feature flags. Set CHCF_ISA=scalar to force the
// reference path.
namespace chcf::simd {

enum class Isa { Scalar, Avx2 };

/// Shape of the per-item term summed over a user's unobserved items.
/// With x = score - lower_scale * item_factor:
///   LinearHinge    -> (x)+
///   SquareHinge    -> (x)+^2
///   ExpM1Hinge     -> exp((x)+) - 1, argument clamped at 700
///   SquareResidual -> x^2 (no clamp; regression losses)
enum class NegForm { LinearHinge = 0, SquareHinge = 1, ExpM1Hinge = 2, SquareResidual = 3 };
inline constexpr std::size_t kNegForms = 4;

struct NegTermArgs {
  const double* scores;
  const double* item_factor;
  std::size_t n;
  double lower_scale;
  double weight;
  double* d_scores;       // += weight * g'(x)
  double* d_item_factor;  // -= weight * g'(x) * lower_scale
};

struct NegTermSums {
  double loss = 0.0;         // sum of weight * g(x)
  double factor_grad = 0.0;  // sum of weight * g'(x) * item_factor
};

struct KernelTable {
  Isa isa;
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// out = a * b * c element-wise
  void (*mul3)(const double* a, const double* b, const double* c, double* out, std::size_t n);
  NegTermSums (*negative_terms[kNegForms])(const NegTermArgs& args);
};

const KernelTable& scalar_kernels();

/// Null when the binary was built without the AVX2 translation unit.
const KernelTable* avx2_kernels();

bool cpu_supports(Isa isa);

/// The table every hot loop in the library goes through.
const KernelTable& kernels();

/// Override the runtime choice. Throws ConfigError if the CPU lacks the ISA.
void set_isa(Isa isa);
Isa active_isa();

}  // namespace chcf::simd
