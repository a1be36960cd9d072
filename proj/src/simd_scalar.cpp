#include <algorithm>
#include <cmath>

#include "chcf/simd.hpp"

namespace chcf::simd {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void mul3(const double* a, const double* b, const double* c, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i] * c[i];
}

template <NegForm Form>
NegTermSums negative_terms(const NegTermArgs& args) {
  NegTermSums sums;
  for (std::size_t v = 0; v < args.n; ++v) {
    const double diff = args.scores[v] - args.lower_scale * args.item_factor[v];
    double value = 0.0;
    double slope = 0.0;
    if constexpr (Form == NegForm::SquareResidual) {
      value = diff * diff;
      slope = 2.0 * diff;
    } else {
      if (!(diff > 0.0)) continue;
      if constexpr (Form == NegForm::LinearHinge) {
        value = diff;
        slope = 1.0;
      } else if constexpr (Form == NegForm::SquareHinge) {
        value = diff * diff;
        slope = 2.0 * diff;
      } else {
        const double e = std::exp(std::min(diff, 700.0));
        value = e - 1.0;
        slope = e;
      }
    }
    const double g = args.weight * slope;
    sums.loss += args.weight * value;
    sums.factor_grad += g * args.item_factor[v];
    args.d_scores[v] += g;
    args.d_item_factor[v] -= g * args.lower_scale;
  }
  return sums;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      Isa::Scalar,
      "scalar",
      &dot,
      &axpy,
      &mul3,
      {&negative_terms<NegForm::LinearHinge>, &negative_terms<NegForm::SquareHinge>,
       &negative_terms<NegForm::ExpM1Hinge>, &negative_terms<NegForm::SquareResidual>},
  };
  return table;
}

}  // namespace chcf::simd
