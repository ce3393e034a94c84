#pragma once

#include <span>
#include <vector>

#include "rffsei/tape.hpp"

namespace rffsei::mdd {

// gamma = e^rho weights the target term of the discrepancy; lambda trades
// the source error off against the discrepancy in the combined objective.
struct MddConfig {
    double gamma = 4.0;
    double lambda = 1.0;
    double grl_beta = 1.0;

    void validate() const;
    double rho() const;  // ln(gamma)
};

// Margin of a classifier at one labeled sample:
//   1/2 * (score[y] - max_{y' != y} score[y'])
double margin(std::span<const double> logits, std::size_t y);

// Piecewise-linear margin loss: 0 for x >= rho, 1 - x/rho on [0, rho], 1 below 0.
double margin_loss(double x, double rho);

// Diagnostic margin disparity: mean margin loss of f' at the labels h_f
// induced by f. Not used for training (the CE surrogates below are).
double margin_disparity(const Tensor& f_logits, const Tensor& fprime_logits, double rho);

std::vector<int> argmax_rows(const Tensor& logits);

// The four logits of one adversarial step (Algorithm step 2's
// y^s, y'^s, y^t, y'^t) plus the source labels. The fprime logits are
// expected to be computed from grl(embeddings) so that minimizing the
// combined loss trains f' against the rest of the network.
struct DisparityBatch {
    ad::Var f_logits_s;
    ad::Var fprime_logits_s;
    ad::Var f_logits_t;
    ad::Var fprime_logits_t;
    std::vector<int> source_labels;
};

// Modified source CE: mean over the batch of -log softmax(f')[h_f], where
// h_f = argmax of f's logits, treated as a constant (no gradient into f).
ad::Var source_disparity(ad::Tape& tape, ad::Var f_logits_s, ad::Var fprime_logits_s);

// Modified target CE: mean of log(1 - softmax(f')[h_f]), probability clamped
// to 1 - 1e-12 before the log. Always <= 0.
ad::Var target_disparity(ad::Tape& tape, ad::Var f_logits_t, ad::Var fprime_logits_t);

// source_disparity - gamma * target_disparity.
ad::Var mdd_loss(ad::Tape& tape, const DisparityBatch& batch, const MddConfig& cfg);

// Mean of -log softmax(logits)[label] over the batch.
ad::Var cross_entropy(ad::Tape& tape, ad::Var logits, const std::vector<int>& labels);

// The combined objective. Minimizing `loss` makes the extractor and f descend
// cross_entropy + lambda * mdd while f' ascends the mdd term: the batch's
// fprime logits must sit behind a gradient-reversal layer on the embeddings,
// so the minimized scalar carries the mdd term with a flipped sign and every
// branch moves in its minimax direction. `objective` is the reported
// cross_entropy + lambda * mdd value of the combined objective itself.
struct Objective {
    ad::Var loss;  // node to minimize
    ad::Var ce;
    ad::Var src_disp;
    ad::Var tgt_disp;
    ad::Var mdd;
    double objective = 0.0;
};

Objective total_objective(ad::Tape& tape, const DisparityBatch& batch, const MddConfig& cfg);

}  // namespace rffsei::mdd
