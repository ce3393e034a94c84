#include <doctest.h>

#include <cmath>
#include <vector>

#include "rffsei/mdd.hpp"
#include "rffsei/model.hpp"
#include "rffsei/rng.hpp"

using namespace rffsei;
using ad::Tape;
using ad::Var;

namespace {

// Logits whose softmax puts probability p on class `cls` (two classes).
Tensor two_class_logits(std::size_t rows, double p, int cls) {
    Tensor t({rows, 2});
    const double gap = std::log(p / (1.0 - p));
    for (std::size_t r = 0; r < rows; ++r) {
        t.at(r, static_cast<std::size_t>(cls)) = gap;
        t.at(r, 1 - static_cast<std::size_t>(cls)) = 0.0;
    }
    return t;
}

// f logits that decide class `cls` confidently.
Tensor decided_logits(std::size_t rows, int cls, std::size_t k = 2) {
    Tensor t({rows, k});
    for (std::size_t r = 0; r < rows; ++r) t.at(r, static_cast<std::size_t>(cls)) = 5.0;
    return t;
}

}  // namespace

TEST_CASE("margin: direct evaluations") {
    const std::vector<double> a{2.0, 1.0, 0.0};
    CHECK(mdd::margin(a, 0) == doctest::Approx(0.5));
    const std::vector<double> equal{1.3, 1.3, 1.3, 1.3};
    for (std::size_t y = 0; y < 4; ++y) CHECK(mdd::margin(equal, y) == doctest::Approx(0.0));
    const std::vector<double> b{0.0, 3.0};
    CHECK(mdd::margin(b, 0) == doctest::Approx(-1.5));
    CHECK_THROWS_AS(mdd::margin(b, 2), std::out_of_range);
}

TEST_CASE("margin properties: constant shift invariant, doubling doubles") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> logits(5);
        for (auto& v : logits) v = rng.uniform(-3.0, 3.0);
        const std::size_t y = rng.next_below(5);
        const double base = mdd::margin(logits, y);
        auto shifted = logits;
        for (auto& v : shifted) v += 2.7;
        CHECK(mdd::margin(shifted, y) == doctest::Approx(base).epsilon(1e-12));
        auto doubled = logits;
        for (auto& v : doubled) v *= 2.0;
        CHECK(mdd::margin(doubled, y) == doctest::Approx(2.0 * base).epsilon(1e-12));
    }
}

TEST_CASE("margin_loss: boundary and midpoint values") {
    const double rho = 1.3863;  // ln 4
    CHECK(mdd::margin_loss(rho, rho) == 0.0);
    CHECK(mdd::margin_loss(0.0, rho) == 1.0);
    CHECK(mdd::margin_loss(rho / 2.0, rho) == doctest::Approx(0.5));
    CHECK_THROWS_AS(mdd::margin_loss(0.5, 0.0), std::invalid_argument);
}

TEST_CASE("margin_loss properties: non-increasing, bounded, kinks at 0 and rho") {
    const double rho = 0.9;
    double prev = 2.0;
    for (double x = -1.0; x <= 2.0; x += 0.01) {
        const double v = mdd::margin_loss(x, rho);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
    // piecewise-linear: slope is -1/rho strictly inside (0, rho), 0 outside
    auto slope = [&](double x) {
        return (mdd::margin_loss(x + 1e-6, rho) - mdd::margin_loss(x - 1e-6, rho)) / 2e-6;
    };
    CHECK(slope(-0.5) == doctest::Approx(0.0));
    CHECK(slope(rho / 2) == doctest::Approx(-1.0 / rho).epsilon(1e-6));
    CHECK(slope(rho + 0.5) == doctest::Approx(0.0));
}

TEST_CASE("source_disparity: ln 2 at probability one half, 0 at certainty") {
    Tape tape;
    Var f = tape.input(decided_logits(2, 1));
    SUBCASE("probability 1 gives 0") {
        Tensor sure({2, 2});
        sure.at(0, 1) = 60.0;
        sure.at(1, 1) = 60.0;
        Var fp = tape.input(sure);
        CHECK(tape.val(mdd::source_disparity(tape, f, fp)).data[0] ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("probability 0.5 gives ln 2") {
        Var fp = tape.input(two_class_logits(2, 0.5, 1));
        CHECK(tape.val(mdd::source_disparity(tape, f, fp)).data[0] ==
              doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("two-sample batch averages the per-sample losses") {
        Tensor mixed({2, 2});
        // sample 0: p(class 1) = 0.5 -> ln 2 ; sample 1: p = 0.8 -> -ln 0.8
        mixed.at(0, 1) = std::log(0.5 / 0.5);
        mixed.at(1, 1) = std::log(0.8 / 0.2);
        Var fp = tape.input(mixed);
        const double expect = 0.5 * (std::log(2.0) - std::log(0.8));
        CHECK(tape.val(mdd::source_disparity(tape, f, fp)).data[0] ==
              doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("target_disparity: ln(1-p) with the documented clamp") {
    Tape tape;
    Var f = tape.input(decided_logits(2, 0));
    SUBCASE("probability 0.5 gives ln 0.5") {
        Var fp = tape.input(two_class_logits(2, 0.5, 0));
        CHECK(tape.val(mdd::target_disparity(tape, f, fp)).data[0] ==
              doctest::Approx(std::log(0.5)).epsilon(1e-12));
    }
    SUBCASE("probability -> 0 gives loss -> 0") {
        Var fp = tape.input(two_class_logits(2, 1e-9, 0));
        CHECK(std::fabs(tape.val(mdd::target_disparity(tape, f, fp)).data[0]) < 1e-8);
    }
    SUBCASE("probability -> 1 stays finite via the clamp") {
        Tensor sure({2, 2});
        sure.at(0, 0) = 200.0;
        sure.at(1, 0) = 200.0;
        Var fp = tape.input(sure);
        const double v = tape.val(mdd::target_disparity(tape, f, fp)).data[0];
        CHECK(std::isfinite(v));
        CHECK(v == doctest::Approx(std::log(1e-12)).epsilon(1e-6));
    }
}

TEST_CASE("disparity signs: source >= 0, target <= 0 on random logits") {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        Tape tape;
        Tensor fl({5, 4}), fpl({5, 4});
        for (auto& v : fl.data) v = rng.uniform(-4.0, 4.0);
        for (auto& v : fpl.data) v = rng.uniform(-4.0, 4.0);
        Var f = tape.input(fl);
        Var fp = tape.input(fpl);
        CHECK(tape.val(mdd::source_disparity(tape, f, fp)).data[0] >= 0.0);
        CHECK(tape.val(mdd::target_disparity(tape, f, fp)).data[0] <= 0.0);
    }
}

TEST_CASE("mdd_loss: linear combination and linearity in gamma") {
    // pick logits whose disparities are source = ln 2 and target = ln 0.5
    auto build = [&](Tape& tape, double gamma) {
        mdd::DisparityBatch batch;
        batch.f_logits_s = tape.input(decided_logits(2, 1));
        batch.fprime_logits_s = tape.input(two_class_logits(2, 0.5, 1));
        batch.f_logits_t = tape.input(decided_logits(2, 0));
        batch.fprime_logits_t = tape.input(two_class_logits(2, 0.5, 0));
        mdd::MddConfig cfg;
        cfg.gamma = gamma;
        return tape.val(mdd::mdd_loss(tape, batch, cfg)).data[0];
    };
    Tape t1;
    // 0.7 - 4 * (-0.7) = 3.5 with ln2 ~ 0.693 standing in for 0.7 exactly:
    const double ln2 = std::log(2.0);
    CHECK(build(t1, 4.0) == doctest::Approx(ln2 + 4.0 * ln2).epsilon(1e-12));
    // linearity in gamma: L(g2) - L(g1) proportional to (g2 - g1)
    Tape t2, t3, t4;
    const double l1 = build(t2, 1.0), l2 = build(t3, 2.0), l3 = build(t4, 3.0);
    CHECK(l3 - l2 == doctest::Approx(l2 - l1).epsilon(1e-12));
}

TEST_CASE("mdd config defaults match the experiment table: gamma 4, lambda 1") {
    mdd::MddConfig cfg;
    CHECK(cfg.gamma == 4.0);
    CHECK(cfg.lambda == 1.0);
    CHECK(cfg.rho() == doctest::Approx(std::log(4.0)));
    cfg.gamma = 0.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("identical confident classifiers: source term near 0, target strongly negative") {
    Tape tape;
    Tensor logits({4, 3});
    Rng rng(6);
    for (std::size_t r = 0; r < 4; ++r) {
        const std::size_t cls = rng.next_below(3);
        for (std::size_t k = 0; k < 3; ++k) logits.at(r, k) = k == cls ? 12.0 : -12.0;
    }
    mdd::DisparityBatch batch;
    batch.f_logits_s = tape.input(logits);
    batch.fprime_logits_s = tape.input(logits);
    batch.f_logits_t = tape.input(logits);
    batch.fprime_logits_t = tape.input(logits);
    const double src = tape.val(mdd::source_disparity(tape, batch.f_logits_s, batch.fprime_logits_s)).data[0];
    const double tgt = tape.val(mdd::target_disparity(tape, batch.f_logits_t, batch.fprime_logits_t)).data[0];
    CHECK(src < 1e-9);
    CHECK(tgt < -9.0);
    mdd::MddConfig cfg;
    CHECK(tape.val(mdd::mdd_loss(tape, batch, cfg)).data[0] > 36.0);
}

TEST_CASE("margin disparity diagnostic uses the margin loss") {
    // f decides class 1; f' has margin exactly rho/2 at class 1 -> loss 0.5
    const double rho = std::log(4.0);
    Tensor f({1, 2}), fp({1, 2});
    f.at(0, 1) = 3.0;
    fp.at(0, 1) = rho;  // margin = (rho - 0)/2 = rho/2
    CHECK(mdd::margin_disparity(f, fp, rho) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("cross_entropy: confident-correct is 0, uniform over 7 is ln 7") {
    Tape tape;
    Tensor confident({2, 7});
    confident.at(0, 3) = 80.0;
    confident.at(1, 5) = 80.0;
    CHECK(tape.val(mdd::cross_entropy(tape, tape.input(confident), {3, 5})).data[0] ==
          doctest::Approx(0.0).epsilon(1e-12));
    Tensor uniform({3, 7});
    CHECK(tape.val(mdd::cross_entropy(tape, tape.input(uniform), {0, 1, 6})).data[0] ==
          doctest::Approx(std::log(7.0)).epsilon(1e-12));
    CHECK_THROWS(mdd::cross_entropy(tape, tape.input(uniform), {0, 1, 7}));
}

namespace {

struct TinySetup {
    model::ModelBundle bundle;
    Tensor src;
    Tensor tgt;
    std::vector<int> labels;
};

TinySetup tiny_setup(std::uint64_t seed) {
    model::ModelConfig cfg;
    cfg.input_length = 12;
    cfg.block_channels = {3};
    cfg.embedding_dim = 4;
    cfg.class_count = 3;
    cfg.hidden_width = 5;
    TinySetup s{model::build_model(cfg, seed), Tensor({2, 2, 12}), Tensor({2, 2, 12}), {0, 2}};
    Rng rng(derive_seed(seed, "data"));
    for (auto& v : s.src.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : s.tgt.data) v = rng.uniform(-1.0, 1.0);
    return s;
}

// Builds the combined objective graph exactly as the training loop does.
mdd::Objective build_objective(Tape& tape, TinySetup& s, const mdd::MddConfig& cfg) {
    Var emb_s = model::extract(tape, s.bundle, s.src);
    Var emb_t = model::extract(tape, s.bundle, s.tgt);
    mdd::DisparityBatch batch;
    batch.f_logits_s = model::classify(tape, s.bundle, emb_s, model::Head::main);
    batch.f_logits_t = model::classify(tape, s.bundle, emb_t, model::Head::main);
    batch.fprime_logits_s =
        model::classify(tape, s.bundle, tape.grl(emb_s, cfg.grl_beta), model::Head::adversarial);
    batch.fprime_logits_t =
        model::classify(tape, s.bundle, tape.grl(emb_t, cfg.grl_beta), model::Head::adversarial);
    batch.source_labels = s.labels;
    return mdd::total_objective(tape, batch, cfg);
}

// The raw mdd term on a clean tape (no grl anywhere).
Var build_plain_mdd(Tape& tape, TinySetup& s, const mdd::MddConfig& cfg) {
    Var emb_s = model::extract(tape, s.bundle, s.src);
    Var emb_t = model::extract(tape, s.bundle, s.tgt);
    mdd::DisparityBatch batch;
    batch.f_logits_s = model::classify(tape, s.bundle, emb_s, model::Head::main);
    batch.f_logits_t = model::classify(tape, s.bundle, emb_t, model::Head::main);
    batch.fprime_logits_s = model::classify(tape, s.bundle, emb_s, model::Head::adversarial);
    batch.fprime_logits_t = model::classify(tape, s.bundle, emb_t, model::Head::adversarial);
    batch.source_labels = s.labels;
    return mdd::mdd_loss(tape, batch, cfg);
}

}  // namespace

TEST_CASE("grl contract: f-prime gradient under the combined objective is -lambda "
          "times its gradient under the unwrapped mdd term") {
    for (double lambda : {1.0, 0.7}) {
        TinySetup s = tiny_setup(31);
        mdd::MddConfig cfg;
        cfg.lambda = lambda;

        Tape combined;
        const mdd::Objective obj = build_objective(combined, s, cfg);
        for (auto* p : s.bundle.all_params()) p->zero_grad();
        combined.backward(obj.loss);
        std::vector<std::vector<double>> combined_grads;
        for (auto* p : s.bundle.params_of(model::Head::adversarial)) {
            combined_grads.push_back(p->grad.data);
        }

        Tape plain;
        Var raw = build_plain_mdd(plain, s, cfg);
        for (auto* p : s.bundle.all_params()) p->zero_grad();
        plain.backward(raw);
        std::size_t i = 0;
        for (auto* p : s.bundle.params_of(model::Head::adversarial)) {
            for (std::size_t j = 0; j < p->grad.numel(); ++j) {
                const double want = -lambda * p->grad.data[j];
                const double got = combined_grads[i][j];
                CHECK(std::fabs(got - want) <=
                      1e-12 * std::max({1.0, std::fabs(got), std::fabs(want)}));
            }
            ++i;
        }
    }
}

TEST_CASE("lambda = 0 reduces the combined objective to plain source CE") {
    TinySetup s = tiny_setup(37);
    mdd::MddConfig cfg;
    cfg.lambda = 0.0;
    Tape tape;
    const mdd::Objective obj = build_objective(tape, s, cfg);
    CHECK(tape.val(obj.loss).data[0] == doctest::Approx(tape.val(obj.ce).data[0]).epsilon(1e-15));

    // gradients of psi and f match a CE-only graph bit-for-bit
    for (auto* p : s.bundle.all_params()) p->zero_grad();
    tape.backward(obj.loss);
    std::vector<std::vector<double>> grads;
    for (auto& p : s.bundle.extractor) grads.push_back(p.grad.data);
    for (auto& p : s.bundle.classifier) grads.push_back(p.grad.data);
    for (auto& p : s.bundle.adversary) {
        for (double g : p.grad.data) CHECK(g == 0.0);
    }

    Tape ce_only;
    Var logits = model::classify(ce_only, s.bundle,
                                 model::extract(ce_only, s.bundle, s.src), model::Head::main);
    for (auto* p : s.bundle.all_params()) p->zero_grad();
    ce_only.backward(mdd::cross_entropy(ce_only, logits, s.labels));
    std::size_t i = 0;
    for (auto& p : s.bundle.extractor) CHECK(p.grad.data == grads[i++]);
    for (auto& p : s.bundle.classifier) CHECK(p.grad.data == grads[i++]);
}

TEST_CASE("extractor descends the mdd term while f-prime ascends it") {
    TinySetup s = tiny_setup(41);
    mdd::MddConfig cfg;

    // gradients of psi from the combined objective, CE contribution removed
    Tape combined;
    const mdd::Objective obj = build_objective(combined, s, cfg);
    for (auto* p : s.bundle.all_params()) p->zero_grad();
    combined.backward(obj.loss);
    std::vector<std::vector<double>> psi_combined;
    for (auto& p : s.bundle.extractor) psi_combined.push_back(p.grad.data);

    Tape ce_only;
    Var logits = model::classify(ce_only, s.bundle,
                                 model::extract(ce_only, s.bundle, s.src), model::Head::main);
    for (auto* p : s.bundle.all_params()) p->zero_grad();
    ce_only.backward(mdd::cross_entropy(ce_only, logits, s.labels));
    std::vector<std::vector<double>> psi_ce;
    for (auto& p : s.bundle.extractor) psi_ce.push_back(p.grad.data);

    Tape plain;
    Var raw = build_plain_mdd(plain, s, cfg);
    for (auto* p : s.bundle.all_params()) p->zero_grad();
    plain.backward(raw);
    std::size_t i = 0;
    for (auto& p : s.bundle.extractor) {
        // combined = ce + lambda * mdd for the extractor: it descends both
        for (std::size_t j = 0; j < p.grad.numel(); ++j) {
            const double want = psi_ce[i][j] + cfg.lambda * p.grad.data[j];
            const double got = psi_combined[i][j];
            CHECK(std::fabs(got - want) <= 1e-9 * std::max(1.0, std::fabs(want)));
        }
        ++i;
    }
}

TEST_CASE("total_objective gradients match finite differences on a tiny model") {
    // Finite differences run against the value of cross_entropy + lambda *
    // mdd (the combined objective). The extractor and f descend it, so their
    // gradients match +FD; f' ascends the mdd term through the reversal, so
    // its gradients match -FD (its CE derivative is identically zero).
    TinySetup s = tiny_setup(43);
    mdd::MddConfig cfg;

    auto objective_value = [&] {
        Tape tape;
        return build_objective(tape, s, cfg).objective;
    };

    Tape tape;
    const mdd::Objective obj = build_objective(tape, s, cfg);
    for (auto* p : s.bundle.all_params()) p->zero_grad();
    tape.backward(obj.loss);
    const auto params = s.bundle.all_params();
    std::vector<std::vector<double>> analytic;
    for (auto* p : params) analytic.push_back(p->grad.data);
    const std::size_t adversary_begin = s.bundle.extractor.size() + s.bundle.classifier.size();

    const double h = 1e-5;
    std::size_t checked = 0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const double sign = pi >= adversary_begin ? -1.0 : 1.0;
        for (std::size_t j = 0; j < params[pi]->value.numel(); ++j) {
            const double saved = params[pi]->value.data[j];
            params[pi]->value.data[j] = saved + h;
            const double up = objective_value();
            params[pi]->value.data[j] = saved - h;
            const double down = objective_value();
            params[pi]->value.data[j] = saved;
            const double fd = sign * (up - down) / (2.0 * h);
            const double g = analytic[pi][j];
            const double denom = std::max({std::fabs(g), std::fabs(fd), 1e-3});
            INFO("param ", params[pi]->name, " elem ", j);
            CHECK(std::fabs(g - fd) / denom < 1e-4);
            ++checked;
        }
    }
    CHECK(checked > 100);
}
