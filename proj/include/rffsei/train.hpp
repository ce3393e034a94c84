#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rffsei/dataset.hpp"
#include "rffsei/mdd.hpp"
#include "rffsei/model.hpp"

namespace rffsei::train {

struct TrainConfig {
    std::size_t pretrain_epochs = 30;
    std::size_t epochs = 40;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    mdd::MddConfig mdd;
    ad::AdamConfig adam;

    void validate() const;
};

// Per-step loss components; accuracy columns are filled on the last step of
// each epoch when an evaluation set is available.
struct MetricsRow {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double ce = 0.0;
    std::optional<double> source_disparity;
    std::optional<double> target_disparity;
    std::optional<double> mdd;
    double total = 0.0;
    std::optional<double> train_acc;
    std::optional<double> test_acc;
};

struct MetricsLog {
    std::vector<MetricsRow> rows;

    void save(const std::string& path) const;  // comma-separated text
};

// Source-only supervised pretraining (CE over shuffled source batches).
// Afterwards the adversarial classifier is reset to a copy of f so that
// adversarial training starts from agreement.
void pretrain(model::ModelBundle& bundle, const signal::DatasetManifest& source,
              const TrainConfig& cfg, MetricsLog* log = nullptr);

// Joint adversarial training: per step one source and one target batch of
// equal size (the shorter stream cycles), combined objective, one Adam step
// over all parameters with f' receiving reversed gradients. Rejects target
// splits that carry labels. `target_eval`, when given, is only used to log
// held-out accuracy once per epoch.
void train_mdd(model::ModelBundle& bundle, const signal::DatasetManifest& source,
               const signal::DatasetManifest& target_unlabeled, const TrainConfig& cfg,
               const signal::DatasetManifest* target_eval = nullptr, MetricsLog* log = nullptr);

// argmax of f's logits per frame; f' is never consulted.
std::vector<int> predict(model::ModelBundle& bundle, const std::vector<signal::IQFrame>& frames,
                         std::size_t batch_size = 64);

}  // namespace rffsei::train
