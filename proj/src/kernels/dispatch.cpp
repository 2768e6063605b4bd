#include <cstdlib>
#include <string_view>

#include "diffden/kernels.hpp"

namespace diffden::kernels {

const KernelTable* avx2_table_unchecked() noexcept;

namespace {

bool cpu_supports_avx2() noexcept {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& resolve() noexcept {
  const KernelTable* avx2 = avx2_table();
  const char* env = std::getenv("DIFFDEN_KERNELS");
  const std::string_view choice = env ? env : "auto";
  if (choice == "scalar") return scalar_table();
  return avx2 ? *avx2 : scalar_table();
}

}  // namespace

const KernelTable* avx2_table() noexcept {
  static const KernelTable* table = cpu_supports_avx2() ? avx2_table_unchecked() : nullptr;
  return table;
}

const KernelTable& active() noexcept {
  static const KernelTable& table = resolve();
  return table;
}

}  // namespace diffden::kernels
