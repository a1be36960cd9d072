// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "chcf/simd.hpp"

namespace chcf::simd {
namespace {

constexpr std::size_t kLanes = 4;

inline double reduce_add(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + kLanes), _mm256_loadu_pd(b + i + kLanes), acc1);
  }
  for (; i + kLanes <= n; i += kLanes) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double sum = reduce_add(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul3(const double* a, const double* b, const double* c, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(ab, _mm256_loadu_pd(c + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i] * c[i];
}

// Shared body of the polynomial forms. The tail falls back to the scalar
// reference so both paths agree on the element-level formula.
template <NegForm Form>
NegTermSums negative_terms(const NegTermArgs& args) {
  const __m256d scale = _mm256_set1_pd(args.lower_scale);
  const __m256d weight = _mm256_set1_pd(args.weight);
  const __m256d two_weight = _mm256_set1_pd(2.0 * args.weight);
  const __m256d zero = _mm256_setzero_pd();
  __m256d loss = _mm256_setzero_pd();
  __m256d factor_grad = _mm256_setzero_pd();

  std::size_t v = 0;
  for (; v + kLanes <= args.n; v += kLanes) {
    const __m256d f = _mm256_loadu_pd(args.item_factor + v);
    const __m256d diff = _mm256_fnmadd_pd(scale, f, _mm256_loadu_pd(args.scores + v));
    __m256d g;
    if constexpr (Form == NegForm::LinearHinge) {
      const __m256d active = _mm256_cmp_pd(diff, zero, _CMP_GT_OQ);
      loss = _mm256_add_pd(loss, _mm256_mul_pd(weight, _mm256_and_pd(active, diff)));
      g = _mm256_and_pd(active, weight);
    } else {
      __m256d x = diff;
      if constexpr (Form == NegForm::SquareHinge) {
        x = _mm256_and_pd(_mm256_cmp_pd(diff, zero, _CMP_GT_OQ), diff);
      }
      loss = _mm256_fmadd_pd(_mm256_mul_pd(weight, x), x, loss);
      g = _mm256_mul_pd(two_weight, x);
    }
    factor_grad = _mm256_fmadd_pd(g, f, factor_grad);
    _mm256_storeu_pd(args.d_scores + v, _mm256_add_pd(_mm256_loadu_pd(args.d_scores + v), g));
    _mm256_storeu_pd(args.d_item_factor + v,
                     _mm256_fnmadd_pd(g, scale, _mm256_loadu_pd(args.d_item_factor + v)));
  }

  NegTermSums sums{reduce_add(loss), reduce_add(factor_grad)};
  if (v < args.n) {
    NegTermArgs tail = args;
    tail.scores += v;
    tail.item_factor += v;
    tail.d_scores += v;
    tail.d_item_factor += v;
    tail.n -= v;
    const NegTermSums rest = scalar_kernels().negative_terms[static_cast<std::size_t>(Form)](tail);
    sums.loss += rest.loss;
    sums.factor_grad += rest.factor_grad;
  }
  return sums;
}

NegTermSums expm1_terms(const NegTermArgs& args) {
  // No vector exp in the intrinsic set; keep the reference path.
  return scalar_kernels().negative_terms[static_cast<std::size_t>(NegForm::ExpM1Hinge)](args);
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{
      Isa::Avx2,
      "avx2",
      &dot,
      &axpy,
      &mul3,
      {&negative_terms<NegForm::LinearHinge>, &negative_terms<NegForm::SquareHinge>, &expm1_terms,
       &negative_terms<NegForm::SquareResidual>},
  };
  return &table;
}

}  // namespace chcf::simd
