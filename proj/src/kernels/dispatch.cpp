#include "rffsei/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace rffsei::kernels {

#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops_impl();
#endif

bool backend_available(Backend b) {
    switch (b) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
    }
    return false;
}

const Ops& backend_ops(Backend b) {
    if (!backend_available(b)) {
        throw std::runtime_error("kernel backend not available on this host: " + backend_name(b));
    }
    if (b == Backend::scalar) return scalar_ops();
#if defined(__x86_64__) || defined(_M_X64)
    return avx2_ops_impl();
#else
    return scalar_ops();
#endif
}

std::string backend_name(Backend b) {
    return b == Backend::scalar ? "scalar" : "avx2";
}

namespace {

Backend detect_default() {
    if (const char* env = std::getenv("RFFSEI_KERNELS")) {
        const std::string v(env);
        if (v == "scalar") return Backend::scalar;
        if (v == "avx2" && backend_available(Backend::avx2)) return Backend::avx2;
        // "auto" or anything else falls through to detection
    }
    return backend_available(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& active_slot() {
    static std::atomic<Backend> slot{detect_default()};
    return slot;
}

}  // namespace

Backend active_backend() {
    return active_slot().load(std::memory_order_relaxed);
}

void force_backend(Backend b) {
    if (!backend_available(b)) {
        throw std::runtime_error("kernel backend not available on this host: " + backend_name(b));
    }
    active_slot().store(b, std::memory_order_relaxed);
}

const Ops& ops() {
    return backend_ops(active_backend());
}

}  // namespace rffsei::kernels
