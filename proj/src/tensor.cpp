#include "rffsei/tensor.hpp"

#include <cmath>
#include <stdexcept>

#include "rffsei/kernels.hpp"

namespace rffsei {

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape)) {
        throw std::invalid_argument("tensor data length does not match shape");
    }
}

std::size_t Tensor::numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

bool all_finite(const Tensor& t) {
    for (double v : t.data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void mm_nn_acc(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    const auto& kr = kernels::ops();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            if (arow[p] != 0.0) kr.axpy(arow[p], b + p * n, crow, n);
        }
    }
}

void mm_nt_acc(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    const auto& kr = kernels::ops();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            crow[j] += kr.dot(arow, b + j * k, k);
        }
    }
}

void mm_tn_acc(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    const auto& kr = kernels::ops();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            if (arow[p] != 0.0) kr.axpy(arow[p], brow, c + p * n, n);
        }
    }
}

}  // namespace rffsei
