#include <atomic>
#include <cstdlib>
#include <string_view>
#include <vector>

#include "rheston/simd/kernels.hpp"
#include "simd/kernels_internal.hpp"

namespace rheston::simd {
namespace {

#if defined(RHESTON_HAVE_AVX2)
const KernelSet& avx2_kernels() {
    static const KernelSet set{"avx2",        avx2::dot,  avx2::axpy,      avx2::sum, avx2::sum_sq_dev,
                               avx2::scale_shift, avx2::relu, avx2::relu_mask};
    return set;
}

bool cpu_has_avx2() {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

#if defined(RHESTON_HAVE_NEON)
const KernelSet& neon_kernels() {
    static const KernelSet set{"neon",        neon::dot,  neon::axpy,      neon::sum, neon::sum_sq_dev,
                               neon::scale_shift, neon::relu, neon::relu_mask};
    return set;
}
#endif

const std::vector<const KernelSet*>& registry() {
    static const std::vector<const KernelSet*> sets = [] {
        std::vector<const KernelSet*> v{&scalar_kernels()};
#if defined(RHESTON_HAVE_AVX2)
        if (cpu_has_avx2()) v.push_back(&avx2_kernels());
#endif
#if defined(RHESTON_HAVE_NEON)
        v.push_back(&neon_kernels());
#endif
        return v;
    }();
    return sets;
}

const KernelSet* find(std::string_view name) {
    for (const KernelSet* k : registry()) {
        if (k->name == name) return k;
    }
    return nullptr;
}

const KernelSet* initial_choice() {
    if (const char* env = std::getenv("RHESTON_SIMD")) {
        if (const KernelSet* k = find(env)) return k;
    }
    return registry().back();
}

std::atomic<const KernelSet*>& active() {
    static std::atomic<const KernelSet*> current{initial_choice()};
    return current;
}

}  // namespace

std::span<const KernelSet* const> available_kernels() { return registry(); }

const KernelSet& kernels() { return *active().load(std::memory_order_relaxed); }

bool select_kernels(std::string_view name) {
    const KernelSet* k = find(name);
    if (k == nullptr) return false;
    active().store(k, std::memory_order_relaxed);
    return true;
}

}  // namespace rheston::simd
