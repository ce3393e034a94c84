#include "rffsei/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace rffsei::ad {

AdamState::AdamState(const std::vector<Parameter*>& params, AdamConfig cfg) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Parameter* p : params) {
        m_.emplace_back(p->value.shape);
        v_.emplace_back(p->value.shape);
    }
}

void AdamState::step(const std::vector<Parameter*>& params) {
    if (params.size() != m_.size()) {
        throw std::invalid_argument("adam: parameter list does not match state");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t j = 0; j < p.value.numel(); ++j) {
            const double g = p.grad.data[j];
            m.data[j] = cfg_.beta1 * m.data[j] + (1.0 - cfg_.beta1) * g;
            v.data[j] = cfg_.beta2 * v.data[j] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m.data[j] / bc1;
            const double vhat = v.data[j] / bc2;
            p.value.data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        p.zero_grad();
    }
}

}  // namespace rffsei::ad
