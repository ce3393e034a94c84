#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rffsei/adam.hpp"
#include "rffsei/signal.hpp"
#include "rffsei/tape.hpp"

namespace rffsei::model {

struct ModelConfig {
    std::size_t in_channels = 2;
    std::size_t input_length = 200;
    std::vector<std::size_t> block_channels{8, 16, 32, 32};
    std::size_t block_stride = 2;  // first conv of each block downsamples
    std::size_t embedding_dim = 64;
    std::size_t class_count = 7;
    std::size_t hidden_width = 128;

    void validate() const;
};

enum class Head { main, adversarial };

// The three networks: extractor, classifier f and adversarial classifier f'
// (identical architecture to f), plus one Adam state over all parameters.
//
// Each extractor block is a residual shrinkage unit: conv -> relu -> conv,
// then a channel-wise soft threshold tau_c = mean(|h_c|) * sigmoid(s_c) with
// a learned scale s_c, plus the (projected) skip connection.
struct ModelBundle {
    ModelConfig config;
    std::vector<ad::Parameter> extractor;
    std::vector<ad::Parameter> classifier;
    std::vector<ad::Parameter> adversary;
    ad::AdamState adam;

    std::vector<ad::Parameter*> all_params();
    std::vector<ad::Parameter*> params_of(Head which);
    void copy_classifier_to_adversary();
};

ModelBundle build_model(const ModelConfig& config, std::uint64_t seed);

// Builds the extractor graph on the tape: frames (B, 2, L) -> embeddings (B, E).
ad::Var extract(ad::Tape& tape, ModelBundle& bundle, const Tensor& frames);
ad::Var extract(ad::Tape& tape, ModelBundle& bundle, ad::Var frames);

// Builds one classifier head: embeddings (B, E) -> raw logits (B, K).
ad::Var classify(ad::Tape& tape, ModelBundle& bundle, ad::Var embeddings, Head which);

// Forward-only embedding pass over a batch of frames.
Tensor embed_frames(ModelBundle& bundle, const std::vector<signal::IQFrame>& frames);

// Stacks frames into a (B, 2, L) batch tensor.
Tensor stack_frames(const std::vector<signal::IQFrame>& frames, std::size_t begin,
                    std::size_t count);

// Checkpoint round trips (model parameters + Adam state under reserved names).
void save_bundle(const ModelBundle& bundle, const std::string& path);
void load_bundle(ModelBundle& bundle, const std::string& path);

}  // namespace rffsei::model
