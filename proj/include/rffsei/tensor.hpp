#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace rffsei {

// Dense row-major tensor of 64-bit reals.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), 0.0);
    }
    Tensor(std::vector<std::size_t> s, std::vector<double> d);

    static Tensor scalar(double v) {
        Tensor t({1});
        t.data[0] = v;
        return t;
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s);
    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

bool all_finite(const Tensor& t);

// C (m,n) += A (m,k) * B (k,n)
void mm_nn_acc(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
// C (m,n) += A (m,k) * B^T, B stored (n,k)
void mm_nt_acc(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
// C (k,n) += A^T * B, A stored (m,k), B (m,n)
void mm_tn_acc(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

}  // namespace rffsei
