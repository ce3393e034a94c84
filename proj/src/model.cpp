#include "rffsei/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rffsei/checkpoint.hpp"
#include "rffsei/rng.hpp"

namespace rffsei::model {

namespace {

// Fan-in-scaled uniform init, variance 2/fan_in (keeps relu stacks at unit scale).
Tensor uniform_fan_in(Rng& rng, std::vector<std::size_t> shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

bool block_needs_projection(const ModelConfig& cfg, std::size_t in_ch, std::size_t /*out_ch*/,
                            std::size_t out_ch2) {
    return in_ch != out_ch2 || cfg.block_stride != 1;
}

std::vector<ad::Parameter> make_classifier(const ModelConfig& cfg, Rng& rng,
                                           const std::string& prefix) {
    std::vector<ad::Parameter> p;
    p.emplace_back(prefix + "/fc1/weight",
                   uniform_fan_in(rng, {cfg.embedding_dim, cfg.hidden_width}, cfg.embedding_dim));
    p.emplace_back(prefix + "/fc1/bias", Tensor({cfg.hidden_width}));
    p.emplace_back(prefix + "/fc2/weight",
                   uniform_fan_in(rng, {cfg.hidden_width, cfg.class_count}, cfg.hidden_width));
    p.emplace_back(prefix + "/fc2/bias", Tensor({cfg.class_count}));
    return p;
}

ad::Var classifier_graph(ad::Tape& t, std::vector<ad::Parameter>& p, ad::Var x) {
    ad::Var h = t.relu(t.add_bias(t.matmul(x, t.param(p[0])), t.param(p[1])));
    return t.add_bias(t.matmul(h, t.param(p[2])), t.param(p[3]));
}

}  // namespace

void ModelConfig::validate() const {
    if (in_channels == 0 || input_length == 0) {
        throw std::invalid_argument("model: input shape must be nonzero");
    }
    if (embedding_dim == 0 || class_count < 2 || hidden_width == 0 || block_stride == 0) {
        throw std::invalid_argument("model: dimensions must be positive (and class_count >= 2)");
    }
    for (std::size_t c : block_channels) {
        if (c == 0) throw std::invalid_argument("model: block channel counts must be positive");
    }
}

ModelBundle build_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ModelBundle b;
    b.config = config;
    Rng rng = derive_rng(seed, "model_init");

    std::size_t in_ch = config.in_channels;
    for (std::size_t i = 0; i < config.block_channels.size(); ++i) {
        const std::size_t out_ch = config.block_channels[i];
        const std::string prefix = "extractor/block" + std::to_string(i);
        b.extractor.emplace_back(prefix + "/conv1/weight",
                                 uniform_fan_in(rng, {out_ch, in_ch, 3}, in_ch * 3));
        b.extractor.emplace_back(prefix + "/conv1/bias", Tensor({out_ch}));
        b.extractor.emplace_back(prefix + "/conv2/weight",
                                 uniform_fan_in(rng, {out_ch, out_ch, 3}, out_ch * 3));
        b.extractor.emplace_back(prefix + "/conv2/bias", Tensor({out_ch}));
        b.extractor.emplace_back(prefix + "/shrink/scale", Tensor({out_ch}));
        if (block_needs_projection(config, in_ch, out_ch, out_ch)) {
            b.extractor.emplace_back(prefix + "/skip/weight",
                                     uniform_fan_in(rng, {out_ch, in_ch, 1}, in_ch));
        }
        in_ch = out_ch;
    }
    b.extractor.emplace_back("extractor/proj/weight",
                             uniform_fan_in(rng, {in_ch, config.embedding_dim}, in_ch));
    b.extractor.emplace_back("extractor/proj/bias", Tensor({config.embedding_dim}));

    // f and f' share the hypothesis space and start from identical draws.
    Rng head_rng = derive_rng(seed, "head_init");
    Rng head_rng_copy = head_rng;
    b.classifier = make_classifier(config, head_rng, "classifier");
    b.adversary = make_classifier(config, head_rng_copy, "adversary");
    b.adam = ad::AdamState(b.all_params(), ad::AdamConfig{});
    return b;
}

std::vector<ad::Parameter*> ModelBundle::all_params() {
    std::vector<ad::Parameter*> out;
    for (auto& p : extractor) out.push_back(&p);
    for (auto& p : classifier) out.push_back(&p);
    for (auto& p : adversary) out.push_back(&p);
    return out;
}

std::vector<ad::Parameter*> ModelBundle::params_of(Head which) {
    auto& vec = which == Head::main ? classifier : adversary;
    std::vector<ad::Parameter*> out;
    for (auto& p : vec) out.push_back(&p);
    return out;
}

void ModelBundle::copy_classifier_to_adversary() {
    if (classifier.size() != adversary.size()) {
        throw std::logic_error("bundle: classifier/adversary parameter lists diverged");
    }
    for (std::size_t i = 0; i < classifier.size(); ++i) {
        adversary[i].value = classifier[i].value;
        adversary[i].zero_grad();
    }
}

ad::Var extract(ad::Tape& tape, ModelBundle& bundle, const Tensor& frames) {
    return extract(tape, bundle, tape.input(frames));
}

ad::Var extract(ad::Tape& tape, ModelBundle& bundle, ad::Var frames) {
    const ModelConfig& cfg = bundle.config;
    const Tensor& tf = tape.val(frames);
    if (tf.rank() != 3 || tf.shape[1] != cfg.in_channels || tf.shape[2] != cfg.input_length) {
        throw std::invalid_argument("extract: frames do not match the configured input shape");
    }
    ad::Var x = frames;
    std::size_t pi = 0;  // index into bundle.extractor
    std::size_t in_ch = cfg.in_channels;
    const int stride = static_cast<int>(cfg.block_stride);
    for (std::size_t i = 0; i < cfg.block_channels.size(); ++i) {
        const std::size_t out_ch = cfg.block_channels[i];
        ad::Var w1 = tape.param(bundle.extractor[pi++]);
        ad::Var b1 = tape.param(bundle.extractor[pi++]);
        ad::Var w2 = tape.param(bundle.extractor[pi++]);
        ad::Var b2 = tape.param(bundle.extractor[pi++]);
        ad::Var sc = tape.param(bundle.extractor[pi++]);

        ad::Var h = tape.add_bias(tape.conv1d(x, w1, stride, 1), b1);
        h = tape.relu(h);
        h = tape.add_bias(tape.conv1d(h, w2, 1, 1), b2);

        // channel-wise threshold: tau = mean(|h|) over length, gated by sigmoid(scale)
        ad::Var tau = tape.channel_scale(tape.global_average_pool(tape.abs(h)), tape.sigmoid(sc));
        h = tape.soft_threshold(h, tau);

        ad::Var skip = x;
        if (block_needs_projection(cfg, in_ch, out_ch, out_ch)) {
            ad::Var wp = tape.param(bundle.extractor[pi++]);
            skip = tape.conv1d(x, wp, stride, 0);
        }
        x = tape.add(h, skip);
        in_ch = out_ch;
    }
    ad::Var pooled = tape.global_average_pool(x);  // (B, C)
    ad::Var wproj = tape.param(bundle.extractor[pi++]);
    ad::Var bproj = tape.param(bundle.extractor[pi++]);
    return tape.add_bias(tape.matmul(pooled, wproj), bproj);
}

ad::Var classify(ad::Tape& tape, ModelBundle& bundle, ad::Var embeddings, Head which) {
    const Tensor& te = tape.val(embeddings);
    if (te.rank() != 2 || te.shape[1] != bundle.config.embedding_dim) {
        throw std::invalid_argument("classify: embedding width does not match the model");
    }
    return classifier_graph(tape, which == Head::main ? bundle.classifier : bundle.adversary,
                            embeddings);
}

Tensor stack_frames(const std::vector<signal::IQFrame>& frames, std::size_t begin,
                    std::size_t count) {
    if (begin + count > frames.size()) throw std::out_of_range("stack_frames: range out of bounds");
    if (count == 0) throw std::invalid_argument("stack_frames: empty batch");
    const std::size_t len = frames[begin].length();
    Tensor out({count, 2, len});
    for (std::size_t i = 0; i < count; ++i) {
        const auto& f = frames[begin + i];
        if (f.length() != len) throw std::invalid_argument("stack_frames: mixed frame lengths");
        std::copy(f.data.data.begin(), f.data.data.end(), out.data.begin() + i * 2 * len);
    }
    return out;
}

Tensor embed_frames(ModelBundle& bundle, const std::vector<signal::IQFrame>& frames) {
    const std::size_t batch = 64;
    Tensor out({frames.size(), bundle.config.embedding_dim});
    for (std::size_t at = 0; at < frames.size(); at += batch) {
        const std::size_t take = std::min(batch, frames.size() - at);
        ad::Tape tape;
        ad::Var emb = extract(tape, bundle, stack_frames(frames, at, take));
        const Tensor& v = tape.val(emb);
        std::copy(v.data.begin(), v.data.end(),
                  out.data.begin() + at * bundle.config.embedding_dim);
    }
    return out;
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
    Checkpoint ck;
    std::vector<const ad::Parameter*> params;
    for (const auto& p : bundle.extractor) params.push_back(&p);
    for (const auto& p : bundle.classifier) params.push_back(&p);
    for (const auto& p : bundle.adversary) params.push_back(&p);
    const auto& m = bundle.adam.moments_m();
    const auto& v = bundle.adam.moments_v();
    for (std::size_t i = 0; i < params.size(); ++i) {
        ck.tensors.emplace(params[i]->name, params[i]->value);
        ck.tensors.emplace("/adam/m/" + params[i]->name, m[i]);
        ck.tensors.emplace("/adam/v/" + params[i]->name, v[i]);
    }
    ck.tensors.emplace("/adam/step", Tensor::scalar(static_cast<double>(bundle.adam.step_count())));
    ck.save(path);
}

void load_bundle(ModelBundle& bundle, const std::string& path) {
    const Checkpoint ck = Checkpoint::load(path);
    auto fetch = [&](const std::string& name, const Tensor& like) -> const Tensor& {
        auto it = ck.tensors.find(name);
        if (it == ck.tensors.end()) {
            throw std::runtime_error("checkpoint is missing tensor '" + name + "': " + path);
        }
        if (it->second.shape != like.shape) {
            throw std::runtime_error("checkpoint tensor '" + name +
                                     "' does not match the configured model: " + path);
        }
        return it->second;
    };
    const auto params = bundle.all_params();
    for (auto* p : params) {
        p->value = fetch(p->name, p->value);
        p->zero_grad();
    }
    auto& m = bundle.adam.moments_m();
    auto& v = bundle.adam.moments_v();
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = fetch("/adam/m/" + params[i]->name, m[i]);
        v[i] = fetch("/adam/v/" + params[i]->name, v[i]);
    }
    bundle.adam.set_step_count(
        static_cast<std::uint64_t>(fetch("/adam/step", Tensor::scalar(0)).data[0]));
}

}  // namespace rffsei::model
