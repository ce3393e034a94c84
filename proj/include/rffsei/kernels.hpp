#pragma once

#include <cstddef>
#include <string>

namespace rffsei::kernels {

// Dense f64 inner loops used by the tensor engine and the signal synthesis
// path. Every entry has a scalar reference implementation and, on x86-64
// with AVX2, a vectorized variant selected once at startup.
//
// Aliasing: `out` may equal `a` (or `b`) for the elementwise entries.
// Elementwise entries produce bit-identical results across backends; the
// reductions (`dot`, `sum`) may differ in the last bits because the lanes
// accumulate in a different order.
struct Ops {
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*scale)(const double* a, double c, double* out, std::size_t n);
    // out[i] += c * a[i]
    void (*axpy)(double c, const double* a, double* out, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* a, std::size_t n);
    void (*relu)(const double* a, double* out, std::size_t n);
    // out[i] = x[i] > 0 ? g[i] : 0
    void (*relu_mask)(const double* g, const double* x, double* out, std::size_t n);
    void (*abs)(const double* a, double* out, std::size_t n);
};

enum class Backend { scalar, avx2 };

const Ops& scalar_ops();
bool backend_available(Backend b);
const Ops& backend_ops(Backend b);  // throws if unavailable
std::string backend_name(Backend b);

// Active table. Defaults to the best available backend; the RFFSEI_KERNELS
// environment variable (scalar|avx2) or force_backend() override it.
const Ops& ops();
Backend active_backend();
void force_backend(Backend b);

}  // namespace rffsei::kernels
