#pragma once

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rffsei/tensor.hpp"

namespace rffsei::ad {

// A named trainable tensor with its gradient accumulator.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense tensors. Ops append nodes in topological
// order; backward() walks them once in reverse. Node storage is a deque so
// references returned by val() stay valid while further ops are recorded.
// A tape is confined to one thread for the duration of a training step.
class Tape {
public:
    // Leaves
    Var input(Tensor value);
    Var param(Parameter& p);  // cached: same Parameter yields the same Var

    // Elementwise (same shape)
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var relu(Var x);
    Var abs(Var x);
    Var sigmoid(Var x);
    Var log(Var x);
    Var scale(Var x, double c);
    Var affine(Var x, double a, double b);  // a*x + b
    Var clamp_max(Var x, double hi);

    // Broadcast helpers (the only broadcasting supported)
    Var add_bias(Var x, Var bias);       // (B,O)+(O) or (B,C,L)+(C)
    Var channel_scale(Var x, Var s);     // (B,C)*(C)

    // Linear algebra / conv
    Var matmul(Var a, Var b);                           // (m,k)x(k,n)
    Var conv1d(Var x, Var w, int stride, int padding);  // x (B,C,L), w (O,C,K)

    // Reductions / structure
    Var global_average_pool(Var x);  // (B,C,L)->(B,C)
    Var reduce_mean(Var x);          // -> scalar {1}
    Var gather_class(Var x, const std::vector<int>& idx);  // (B,K)->(B)

    // Nonlinear building blocks
    Var soft_threshold(Var x, Var tau);  // tau: scalar, (B,C) vs x (B,C,L), or same shape
    Var softmax(Var z, int axis = -1);   // last axis only

    // Gradient reversal: identity forward, -beta * upstream gradient backward.
    Var grl(Var x, double beta);

    const Tensor& val(Var v) const;

    // Accumulates d(loss)/d(param) into every reachable Parameter's grad.
    void backward(Var loss);

    // Finite-value guard after every op ("non-finite output"). On by default.
    void set_finite_checks(bool on) { finite_checks_ = on; }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor adj;  // allocated lazily during backward
        std::function<void(Tape&, const Node&)> backprop;
        Parameter* parameter = nullptr;
    };

    Var push(Tensor value, std::function<void(Tape&, const Node&)> backprop);
    Tensor& adj_of(Var v);
    const Tensor& check_finite(const Tensor& t, const char* op) const;

    std::deque<Node> nodes_;
    std::unordered_map<Parameter*, Var> param_cache_;
    bool finite_checks_ = true;
};

}  // namespace rffsei::ad
