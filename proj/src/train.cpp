#include "rffsei/train.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "rffsei/rng.hpp"

namespace rffsei::train {

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = n; i > 1; --i) {  // Fisher-Yates
        std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.next_below(i))]);
    }
    return idx;
}

Tensor gather_batch(const std::vector<signal::IQFrame>& frames,
                    const std::vector<std::size_t>& order, std::size_t begin, std::size_t count,
                    std::vector<int>* labels, bool wrap) {
    const std::size_t len = frames.front().length();
    Tensor out({count, 2, len});
    if (labels) labels->resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t pos = wrap ? (begin + i) % order.size() : begin + i;
        const auto& f = frames[order[pos]];
        std::copy(f.data.data.begin(), f.data.data.end(), out.data.begin() + i * 2 * len);
        if (labels) (*labels)[i] = f.label.value_or(-1);
    }
    return out;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double epoch_accuracy(model::ModelBundle& bundle, const signal::DatasetManifest& ds) {
    const auto preds = predict(bundle, ds.frames);
    std::size_t correct = 0, total = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!ds.frames[i].label) continue;
        ++total;
        if (preds[i] == *ds.frames[i].label) ++correct;
    }
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

void check_labels_in_range(const signal::DatasetManifest& ds, std::size_t class_count) {
    for (const auto& f : ds.frames) {
        if (f.label && (*f.label < 0 || static_cast<std::size_t>(*f.label) >= class_count)) {
            throw std::invalid_argument("train: frame label out of range for the model");
        }
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 2) throw std::invalid_argument("train: batch_size must be >= 2");
    mdd.validate();
}

void MetricsLog::save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open metrics log for writing: " + path);
    os << "epoch,step,ce,source_disparity,target_disparity,mdd,total,train_acc,test_acc\n";
    auto opt = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); };
    for (const auto& r : rows) {
        os << r.epoch << ',' << r.step << ',' << fmt_double(r.ce) << ',' << opt(r.source_disparity)
           << ',' << opt(r.target_disparity) << ',' << opt(r.mdd) << ',' << fmt_double(r.total)
           << ',' << opt(r.train_acc) << ',' << opt(r.test_acc) << '\n';
    }
    if (!os) throw std::runtime_error("metrics log write failed: " + path);
}

void pretrain(model::ModelBundle& bundle, const signal::DatasetManifest& source,
              const TrainConfig& cfg, MetricsLog* log) {
    cfg.validate();
    if (source.frames.empty()) throw std::invalid_argument("pretrain: empty source dataset");
    for (const auto& f : source.frames) {
        if (!f.label) throw std::invalid_argument("pretrain: source frames must be labeled");
    }
    check_labels_in_range(source, bundle.config.class_count);

    bundle.adam.set_config(cfg.adam);
    const auto params = bundle.all_params();
    const std::size_t n = source.frames.size();
    const std::size_t steps = (n + cfg.batch_size - 1) / cfg.batch_size;
    for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        Rng shuffle_rng = derive_rng(cfg.seed, "src_shuffle", epoch);
        const auto order = shuffled_indices(n, shuffle_rng);
        for (std::size_t step = 0; step < steps; ++step) {
            const std::size_t begin = step * cfg.batch_size;
            const std::size_t take = std::min(cfg.batch_size, n - begin);
            std::vector<int> labels;
            Tensor batch = gather_batch(source.frames, order, begin, take, &labels, false);

            ad::Tape tape;
            ad::Var emb = model::extract(tape, bundle, batch);
            ad::Var logits = model::classify(tape, bundle, emb, model::Head::main);
            ad::Var loss = mdd::cross_entropy(tape, logits, labels);
            tape.backward(loss);
            bundle.adam.step(params);

            if (log) {
                MetricsRow row;
                row.epoch = epoch;
                row.step = step;
                row.ce = tape.val(loss).data[0];
                row.total = row.ce;
                if (step + 1 == steps) row.train_acc = epoch_accuracy(bundle, source);
                log->rows.push_back(row);
            }
        }
    }
    bundle.copy_classifier_to_adversary();
}

void train_mdd(model::ModelBundle& bundle, const signal::DatasetManifest& source,
               const signal::DatasetManifest& target_unlabeled, const TrainConfig& cfg,
               const signal::DatasetManifest* target_eval, MetricsLog* log) {
    cfg.validate();
    if (source.frames.empty() || target_unlabeled.frames.empty()) {
        throw std::invalid_argument("train_mdd: empty dataset");
    }
    if (target_unlabeled.any_labeled()) {
        throw std::invalid_argument(
            "train_mdd: target training split carries labels (leakage guard)");
    }
    for (const auto& f : source.frames) {
        if (!f.label) throw std::invalid_argument("train_mdd: source frames must be labeled");
    }
    check_labels_in_range(source, bundle.config.class_count);

    bundle.adam.set_config(cfg.adam);
    const auto params = bundle.all_params();
    const std::size_t ns = source.frames.size();
    const std::size_t nt = target_unlabeled.frames.size();
    const std::size_t steps = (ns + cfg.batch_size - 1) / cfg.batch_size;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng src_rng = derive_rng(cfg.seed, "src_shuffle", epoch);
        Rng tgt_rng = derive_rng(cfg.seed, "tgt_shuffle", epoch);
        const auto src_order = shuffled_indices(ns, src_rng);
        const auto tgt_order = shuffled_indices(nt, tgt_rng);
        std::size_t tgt_pos = 0;
        for (std::size_t step = 0; step < steps; ++step) {
            const std::size_t begin = step * cfg.batch_size;
            const std::size_t take = std::min(cfg.batch_size, ns - begin);
            std::vector<int> labels;
            Tensor src_batch = gather_batch(source.frames, src_order, begin, take, &labels, false);
            Tensor tgt_batch =
                gather_batch(target_unlabeled.frames, tgt_order, tgt_pos, take, nullptr, true);
            tgt_pos = (tgt_pos + take) % nt;

            ad::Tape tape;
            ad::Var emb_s = model::extract(tape, bundle, src_batch);
            ad::Var emb_t = model::extract(tape, bundle, tgt_batch);
            mdd::DisparityBatch batch;
            batch.f_logits_s = model::classify(tape, bundle, emb_s, model::Head::main);
            batch.f_logits_t = model::classify(tape, bundle, emb_t, model::Head::main);
            batch.fprime_logits_s = model::classify(tape, bundle, tape.grl(emb_s, cfg.mdd.grl_beta),
                                                    model::Head::adversarial);
            batch.fprime_logits_t = model::classify(tape, bundle, tape.grl(emb_t, cfg.mdd.grl_beta),
                                                    model::Head::adversarial);
            batch.source_labels = labels;
            const mdd::Objective obj = mdd::total_objective(tape, batch, cfg.mdd);
            tape.backward(obj.loss);
            bundle.adam.step(params);

            if (log) {
                MetricsRow row;
                row.epoch = epoch;
                row.step = step;
                row.ce = tape.val(obj.ce).data[0];
                row.source_disparity = tape.val(obj.src_disp).data[0];
                row.target_disparity = tape.val(obj.tgt_disp).data[0];
                row.mdd = tape.val(obj.mdd).data[0];
                row.total = obj.objective;
                if (step + 1 == steps) {
                    row.train_acc = epoch_accuracy(bundle, source);
                    if (target_eval) row.test_acc = epoch_accuracy(bundle, *target_eval);
                }
                log->rows.push_back(row);
            }
        }
    }
}

std::vector<int> predict(model::ModelBundle& bundle, const std::vector<signal::IQFrame>& frames,
                         std::size_t batch_size) {
    std::vector<int> out;
    out.reserve(frames.size());
    for (std::size_t at = 0; at < frames.size(); at += batch_size) {
        const std::size_t take = std::min(batch_size, frames.size() - at);
        ad::Tape tape;
        ad::Var emb = model::extract(tape, bundle, model::stack_frames(frames, at, take));
        ad::Var logits = model::classify(tape, bundle, emb, model::Head::main);
        for (int v : mdd::argmax_rows(tape.val(logits))) out.push_back(v);
    }
    return out;
}

}  // namespace rffsei::train
