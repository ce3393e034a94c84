#pragma once

#include <cstdint>
#include <vector>

#include "rffsei/tape.hpp"

namespace rffsei::ad {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction. One state covers a fixed parameter
// list; moment slots are matched to parameters by position.
class AdamState {
public:
    AdamState() = default;
    AdamState(const std::vector<Parameter*>& params, AdamConfig cfg);

    // Applies one update from the parameters' accumulated gradients and
    // zeroes the gradients afterwards.
    void step(const std::vector<Parameter*>& params);

    std::uint64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    void set_config(AdamConfig cfg) { cfg_ = cfg; }

    // Checkpoint plumbing.
    std::vector<Tensor>& moments_m() { return m_; }
    std::vector<Tensor>& moments_v() { return v_; }
    const std::vector<Tensor>& moments_m() const { return m_; }
    const std::vector<Tensor>& moments_v() const { return v_; }
    void set_step_count(std::uint64_t t) { t_ = t; }

private:
    AdamConfig cfg_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::uint64_t t_ = 0;
};

}  // namespace rffsei::ad
