#include "feddtg/simd/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace feddtg::simd {

const KernelTable* avx2_kernels_impl();

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable& select_kernels() {
    const KernelTable* avx2 = avx2_kernels();
    if (const char* forced = std::getenv("FEDDTG_KERNELS")) {
        const std::string_view want(forced);
        if (want == "scalar") return scalar_kernels();
        if (want == "avx2" && avx2 != nullptr) return *avx2;
    }
    return avx2 != nullptr ? *avx2 : scalar_kernels();
}

}  // namespace

const KernelTable* avx2_kernels() {
    static const KernelTable* table = cpu_has_avx2_fma() ? avx2_kernels_impl() : nullptr;
    return table;
}

const KernelTable& active_kernels() {
    static const KernelTable& table = select_kernels();
    return table;
}

}  // namespace feddtg::simd
