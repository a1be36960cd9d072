#include <atomic>
#include <cstdlib>
#include <string>

#include "chcf/error.hpp"
#include "chcf/simd.hpp"

namespace chcf::simd {

#ifndef CHCF_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(__i386__)
      return avx2_kernels() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

namespace {

const KernelTable* select_default() {
  if (const char* env = std::getenv("CHCF_ISA"); env != nullptr && std::string(env) == "scalar") {
    return &scalar_kernels();
  }
  if (cpu_supports(Isa::Avx2)) return avx2_kernels();
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{select_default()};
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active_table().load(std::memory_order_acquire); }

void set_isa(Isa isa) {
  if (!cpu_supports(isa)) throw ConfigError("requested SIMD level is not supported on this CPU");
  active_table().store(isa == Isa::Avx2 ? avx2_kernels() : &scalar_kernels(),
                       std::memory_order_release);
}

Isa active_isa() { return kernels().isa; }

}  // namespace chcf::simd
