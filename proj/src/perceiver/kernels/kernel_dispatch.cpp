// Backend selection: cpuid probe at first use, PERCEIVER_KERNELS env override,
// set_backend() for the equivalence tests.

#include "perceiver/kernels/kernel_table.hpp"

#include "perceiver/common.hpp"

#include <cstdlib>
#include <cstring>
#include <string>

namespace perceiver::kern {
namespace {

const KernelTable* lookup(const char* name) {
  if (std::strcmp(name, "scalar") == 0) return &scalar_table();
#if defined(PERCEIVER_HAVE_AVX2)
  if (std::strcmp(name, "avx2") == 0) {
    if (!avx2_available())
      throw config_error("kernel backend 'avx2' requested but the CPU lacks avx2+fma");
    return &avx2_table();
  }
#endif
  throw config_error(std::string("unknown kernel backend '") + name +
                     "' (available: scalar" +
#if defined(PERCEIVER_HAVE_AVX2)
                     ", avx2" +
#endif
                     ")");
}

const KernelTable* select_default() {
  if (const char* env = std::getenv("PERCEIVER_KERNELS")) return lookup(env);
#if defined(PERCEIVER_HAVE_AVX2)
  if (avx2_available()) return &avx2_table();
#endif
  return &scalar_table();
}

const KernelTable*& slot() {
  static const KernelTable* table = select_default();
  return table;
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& active() { return *slot(); }

void set_backend(const char* name) { slot() = lookup(name); }

}  // namespace perceiver::kern
