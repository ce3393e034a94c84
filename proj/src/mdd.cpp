#include "rffsei/mdd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rffsei::mdd {

namespace {
constexpr double kProbCeiling = 1.0 - 1e-12;
}

void MddConfig::validate() const {
    if (!(gamma >= 1.0)) throw std::invalid_argument("mdd: gamma must be >= 1");
    if (!(lambda >= 0.0)) throw std::invalid_argument("mdd: lambda must be >= 0");
    if (!std::isfinite(grl_beta)) throw std::invalid_argument("mdd: grl_beta must be finite");
}

double MddConfig::rho() const { return std::log(gamma); }

double margin(std::span<const double> logits, std::size_t y) {
    if (logits.size() < 2) throw std::invalid_argument("margin: need at least 2 classes");
    if (y >= logits.size()) throw std::out_of_range("margin: label out of range");
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (i != y) best_other = std::max(best_other, logits[i]);
    }
    return 0.5 * (logits[y] - best_other);
}

double margin_loss(double x, double rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("margin_loss: rho must be positive");
    if (x >= rho) return 0.0;
    if (x <= 0.0) return 1.0;
    return 1.0 - x / rho;
}

std::vector<int> argmax_rows(const Tensor& logits) {
    if (logits.rank() != 2) throw std::invalid_argument("argmax_rows: logits must be (batch, classes)");
    const std::size_t k = logits.shape[1];
    std::vector<int> out(logits.shape[0]);
    for (std::size_t r = 0; r < logits.shape[0]; ++r) {
        const double* row = logits.data.data() + r * k;
        out[r] = static_cast<int>(std::max_element(row, row + k) - row);
    }
    return out;
}

double margin_disparity(const Tensor& f_logits, const Tensor& fprime_logits, double rho) {
    if (!f_logits.same_shape(fprime_logits)) {
        throw std::invalid_argument("margin_disparity: shape mismatch");
    }
    const auto hf = argmax_rows(f_logits);
    const std::size_t k = f_logits.shape[1];
    double total = 0.0;
    for (std::size_t r = 0; r < hf.size(); ++r) {
        const std::span<const double> row(fprime_logits.data.data() + r * k, k);
        total += margin_loss(margin(row, static_cast<std::size_t>(hf[r])), rho);
    }
    return total / static_cast<double>(hf.size());
}

ad::Var source_disparity(ad::Tape& tape, ad::Var f_logits_s, ad::Var fprime_logits_s) {
    if (!tape.val(f_logits_s).same_shape(tape.val(fprime_logits_s))) {
        throw std::invalid_argument("source_disparity: shape mismatch");
    }
    const auto hf = argmax_rows(tape.val(f_logits_s));
    ad::Var p = tape.gather_class(tape.softmax(fprime_logits_s), hf);
    return tape.scale(tape.reduce_mean(tape.log(p)), -1.0);
}

ad::Var target_disparity(ad::Tape& tape, ad::Var f_logits_t, ad::Var fprime_logits_t) {
    if (!tape.val(f_logits_t).same_shape(tape.val(fprime_logits_t))) {
        throw std::invalid_argument("target_disparity: shape mismatch");
    }
    const auto hf = argmax_rows(tape.val(f_logits_t));
    ad::Var p = tape.gather_class(tape.softmax(fprime_logits_t), hf);
    p = tape.clamp_max(p, kProbCeiling);
    return tape.reduce_mean(tape.log(tape.affine(p, -1.0, 1.0)));
}

ad::Var mdd_loss(ad::Tape& tape, const DisparityBatch& batch, const MddConfig& cfg) {
    cfg.validate();
    if (tape.val(batch.f_logits_s).shape[0] != tape.val(batch.f_logits_t).shape[0]) {
        throw std::invalid_argument("mdd_loss: source and target batch sizes must match");
    }
    ad::Var src = source_disparity(tape, batch.f_logits_s, batch.fprime_logits_s);
    ad::Var tgt = target_disparity(tape, batch.f_logits_t, batch.fprime_logits_t);
    return tape.sub(src, tape.scale(tgt, cfg.gamma));
}

ad::Var cross_entropy(ad::Tape& tape, ad::Var logits, const std::vector<int>& labels) {
    ad::Var p = tape.gather_class(tape.softmax(logits), labels);
    return tape.scale(tape.reduce_mean(tape.log(p)), -1.0);
}

Objective total_objective(ad::Tape& tape, const DisparityBatch& batch, const MddConfig& cfg) {
    cfg.validate();
    Objective out;
    out.ce = cross_entropy(tape, batch.f_logits_s, batch.source_labels);
    out.src_disp = source_disparity(tape, batch.f_logits_s, batch.fprime_logits_s);
    out.tgt_disp = target_disparity(tape, batch.f_logits_t, batch.fprime_logits_t);
    out.mdd = tape.sub(out.src_disp, tape.scale(out.tgt_disp, cfg.gamma));
    // The fprime branch already carries the gradient reversal, so the term
    // enters the minimized scalar negated; see the header note.
    out.loss = tape.sub(out.ce, tape.scale(out.mdd, cfg.lambda));
    out.objective = tape.val(out.ce).data[0] + cfg.lambda * tape.val(out.mdd).data[0];
    return out;
}

}  // namespace rffsei::mdd
