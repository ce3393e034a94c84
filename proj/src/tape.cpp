#include "rffsei/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rffsei/kernels.hpp"

namespace rffsei::ad {

namespace {

void require(bool cond, const char* op, const char* what) {
    if (!cond) throw std::invalid_argument(std::string(op) + ": " + what);
}

// M ((C*K) x Lout) <- x (C x L) unrolled for a strided, padded conv window.
void im2row(const double* x, std::size_t C, std::size_t L, std::size_t K,
            int stride, int pad, std::size_t lout, double* m) {
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t k = 0; k < K; ++k) {
            double* row = m + (c * K + k) * lout;
            const double* src = x + c * L;
            for (std::size_t t = 0; t < lout; ++t) {
                const long j = static_cast<long>(t) * stride + static_cast<long>(k) - pad;
                row[t] = (j >= 0 && j < static_cast<long>(L)) ? src[j] : 0.0;
            }
        }
    }
}

void row2im_acc(const double* m, std::size_t C, std::size_t L, std::size_t K,
                int stride, int pad, std::size_t lout, double* dx) {
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t k = 0; k < K; ++k) {
            const double* row = m + (c * K + k) * lout;
            double* dst = dx + c * L;
            for (std::size_t t = 0; t < lout; ++t) {
                const long j = static_cast<long>(t) * stride + static_cast<long>(k) - pad;
                if (j >= 0 && j < static_cast<long>(L)) dst[j] += row[t];
            }
        }
    }
}

}  // namespace

Var Tape::push(Tensor value, std::function<void(Tape&, const Node&)> backprop) {
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(backprop), nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::val(Var v) const {
    return nodes_.at(static_cast<std::size_t>(v.id)).value;
}

Tensor& Tape::adj_of(Var v) {
    Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    if (n.adj.data.empty()) n.adj = Tensor(n.value.shape);
    return n.adj;
}

const Tensor& Tape::check_finite(const Tensor& t, const char* op) const {
    if (finite_checks_ && !all_finite(t)) {
        throw std::runtime_error(std::string("non-finite output in ") + op);
    }
    return t;
}

Var Tape::input(Tensor value) {
    return push(std::move(value), nullptr);
}

Var Tape::param(Parameter& p) {
    auto it = param_cache_.find(&p);
    if (it != param_cache_.end()) return it->second;
    Var v = push(p.value, nullptr);
    nodes_.back().parameter = &p;
    param_cache_.emplace(&p, v);
    return v;
}

Var Tape::add(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.same_shape(tb), "add", "shape mismatch");
    Tensor out(ta.shape);
    kernels::ops().add(ta.data.data(), tb.data.data(), out.data.data(), out.numel());
    check_finite(out, "add");
    return push(std::move(out), [a, b](Tape& t, const Node& self) {
        Tensor& ga = t.adj_of(a);
        Tensor& gb = t.adj_of(b);
        kernels::ops().add(ga.data.data(), self.adj.data.data(), ga.data.data(), ga.numel());
        kernels::ops().add(gb.data.data(), self.adj.data.data(), gb.data.data(), gb.numel());
    });
}

Var Tape::sub(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.same_shape(tb), "sub", "shape mismatch");
    Tensor out(ta.shape);
    kernels::ops().sub(ta.data.data(), tb.data.data(), out.data.data(), out.numel());
    check_finite(out, "sub");
    return push(std::move(out), [a, b](Tape& t, const Node& self) {
        Tensor& ga = t.adj_of(a);
        Tensor& gb = t.adj_of(b);
        kernels::ops().add(ga.data.data(), self.adj.data.data(), ga.data.data(), ga.numel());
        kernels::ops().axpy(-1.0, self.adj.data.data(), gb.data.data(), gb.numel());
    });
}

Var Tape::mul(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.same_shape(tb), "mul", "shape mismatch");
    Tensor out(ta.shape);
    kernels::ops().mul(ta.data.data(), tb.data.data(), out.data.data(), out.numel());
    check_finite(out, "mul");
    return push(std::move(out), [a, b](Tape& t, const Node& self) {
        const Tensor& va = t.val(a);
        const Tensor& vb = t.val(b);
        Tensor& ga = t.adj_of(a);
        Tensor& gb = t.adj_of(b);
        const double* g = self.adj.data.data();
        for (std::size_t i = 0; i < ga.numel(); ++i) {
            ga.data[i] += g[i] * vb.data[i];
            gb.data[i] += g[i] * va.data[i];
        }
    });
}

Var Tape::relu(Var x) {
    const Tensor& tx = val(x);
    Tensor out(tx.shape);
    kernels::ops().relu(tx.data.data(), out.data.data(), out.numel());
    return push(std::move(out), [x](Tape& t, const Node& self) {
        const Tensor& vx = t.val(x);
        Tensor& gx = t.adj_of(x);
        const double* g = self.adj.data.data();
        for (std::size_t i = 0; i < gx.numel(); ++i) {
            if (vx.data[i] > 0.0) gx.data[i] += g[i];
        }
    });
}

Var Tape::abs(Var x) {
    const Tensor& tx = val(x);
    Tensor out(tx.shape);
    kernels::ops().abs(tx.data.data(), out.data.data(), out.numel());
    return push(std::move(out), [x](Tape& t, const Node& self) {
        const Tensor& vx = t.val(x);
        Tensor& gx = t.adj_of(x);
        const double* g = self.adj.data.data();
        for (std::size_t i = 0; i < gx.numel(); ++i) {
            if (vx.data[i] > 0.0) gx.data[i] += g[i];
            else if (vx.data[i] < 0.0) gx.data[i] -= g[i];
        }
    });
}

Var Tape::sigmoid(Var x) {
    const Tensor& tx = val(x);
    Tensor out(tx.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double v = tx.data[i];
        if (v >= 0.0) {
            out.data[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            out.data[i] = e / (1.0 + e);
        }
    }
    check_finite(out, "sigmoid");
    return push(std::move(out), [x](Tape& t, const Node& self) {
        Tensor& gx = t.adj_of(x);
        const double* y = self.value.data.data();
        const double* g = self.adj.data.data();
        for (std::size_t i = 0; i < gx.numel(); ++i) {
            gx.data[i] += g[i] * y[i] * (1.0 - y[i]);
        }
    });
}

Var Tape::log(Var x) {
    const Tensor& tx = val(x);
    Tensor out(tx.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::log(tx.data[i]);
    check_finite(out, "log");
    return push(std::move(out), [x](Tape& t, const Node& self) {
        const Tensor& vx = t.val(x);
        Tensor& gx = t.adj_of(x);
        const double* g = self.adj.data.data();
        for (std::size_t i = 0; i < gx.numel(); ++i) gx.data[i] += g[i] / vx.data[i];
    });
}

Var Tape::scale(Var x, double c) {
    const Tensor& tx = val(x);
    Tensor out(tx.shape);
    kernels::ops().scale(tx.data.data(), c, out.data.data(), out.numel());
    check_finite(out, "scale");
    return push(std::move(out), [x, c](Tape& t, const Node& self) {
        Tensor& gx = t.adj_of(x);
        kernels::ops().axpy(c, self.adj.data.data(), gx.data.data(), gx.numel());
    });
}

Var Tape::affine(Var x, double a, double b) {
    const Tensor& tx = val(x);
    Tensor out(tx.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = a * tx.data[i] + b;
    check_finite(out, "affine");
    return push(std::move(out), [x, a](Tape& t, const Node& self) {
        Tensor& gx = t.adj_of(x);
        kernels::ops().axpy(a, self.adj.data.data(), gx.data.data(), gx.numel());
    });
}

Var Tape::clamp_max(Var x, double hi) {
    const Tensor& tx = val(x);
    Tensor out(tx.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::min(tx.data[i], hi);
    return push(std::move(out), [x, hi](Tape& t, const Node& self) {
        const Tensor& vx = t.val(x);
        Tensor& gx = t.adj_of(x);
        const double* g = self.adj.data.data();
        for (std::size_t i = 0; i < gx.numel(); ++i) {
            if (vx.data[i] < hi) gx.data[i] += g[i];
        }
    });
}

Var Tape::add_bias(Var x, Var bias) {
    const Tensor& tx = val(x);
    const Tensor& tb = val(bias);
    require(tb.rank() == 1, "add_bias", "bias must be rank 1");
    Tensor out = tx;
    if (tx.rank() == 2) {
        require(tx.shape[1] == tb.shape[0], "add_bias", "shape mismatch");
        for (std::size_t i = 0; i < tx.shape[0]; ++i) {
            kernels::ops().add(out.data.data() + i * tx.shape[1], tb.data.data(),
                               out.data.data() + i * tx.shape[1], tx.shape[1]);
        }
    } else if (tx.rank() == 3) {
        require(tx.shape[1] == tb.shape[0], "add_bias", "shape mismatch");
        const std::size_t L = tx.shape[2];
        for (std::size_t b = 0; b < tx.shape[0]; ++b) {
            for (std::size_t c = 0; c < tx.shape[1]; ++c) {
                double* row = out.data.data() + (b * tx.shape[1] + c) * L;
                const double v = tb.data[c];
                for (std::size_t l = 0; l < L; ++l) row[l] += v;
            }
        }
    } else {
        require(false, "add_bias", "x must be rank 2 or 3");
    }
    check_finite(out, "add_bias");
    return push(std::move(out), [x, bias](Tape& t, const Node& self) {
        const Tensor& vx = t.val(x);
        Tensor& gx = t.adj_of(x);
        Tensor& gb = t.adj_of(bias);
        kernels::ops().add(gx.data.data(), self.adj.data.data(), gx.data.data(), gx.numel());
        if (vx.rank() == 2) {
            for (std::size_t i = 0; i < vx.shape[0]; ++i) {
                kernels::ops().add(gb.data.data(), self.adj.data.data() + i * vx.shape[1],
                                   gb.data.data(), vx.shape[1]);
            }
        } else {
            const std::size_t L = vx.shape[2];
            for (std::size_t b = 0; b < vx.shape[0]; ++b) {
                for (std::size_t c = 0; c < vx.shape[1]; ++c) {
                    gb.data[c] += kernels::ops().sum(
                        self.adj.data.data() + (b * vx.shape[1] + c) * L, L);
                }
            }
        }
    });
}

Var Tape::channel_scale(Var x, Var s) {
    const Tensor& tx = val(x);
    const Tensor& ts = val(s);
    require(tx.rank() == 2 && ts.rank() == 1 && tx.shape[1] == ts.shape[0],
            "channel_scale", "shape mismatch");
    Tensor out(tx.shape);
    for (std::size_t b = 0; b < tx.shape[0]; ++b) {
        kernels::ops().mul(tx.data.data() + b * tx.shape[1], ts.data.data(),
                           out.data.data() + b * tx.shape[1], tx.shape[1]);
    }
    check_finite(out, "channel_scale");
    return push(std::move(out), [x, s](Tape& t, const Node& self) {
        const Tensor& vx = t.val(x);
        const Tensor& vs = t.val(s);
        Tensor& gx = t.adj_of(x);
        Tensor& gs = t.adj_of(s);
        const std::size_t C = vs.shape[0];
        const double* g = self.adj.data.data();
        for (std::size_t b = 0; b < vx.shape[0]; ++b) {
            for (std::size_t c = 0; c < C; ++c) {
                gx.data[b * C + c] += g[b * C + c] * vs.data[c];
                gs.data[c] += g[b * C + c] * vx.data[b * C + c];
            }
        }
    });
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.rank() == 2 && tb.rank() == 2, "matmul", "operands must be rank 2");
    require(ta.shape[1] == tb.shape[0], "matmul", "shape mismatch");
    const std::size_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
    Tensor out({m, n});
    mm_nn_acc(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);
    check_finite(out, "matmul");
    return push(std::move(out), [a, b, m, k, n](Tape& t, const Node& self) {
        const Tensor& va = t.val(a);
        const Tensor& vb = t.val(b);
        Tensor& ga = t.adj_of(a);
        Tensor& gb = t.adj_of(b);
        mm_nt_acc(self.adj.data.data(), vb.data.data(), ga.data.data(), m, n, k);
        mm_tn_acc(va.data.data(), self.adj.data.data(), gb.data.data(), m, k, n);
    });
}

Var Tape::conv1d(Var x, Var w, int stride, int padding) {
    const Tensor& tx = val(x);
    const Tensor& tw = val(w);
    require(tx.rank() == 3, "conv1d", "input must be (batch, channels, length)");
    require(tw.rank() == 3, "conv1d", "weight must be (out, in, kernel)");
    require(tx.shape[1] == tw.shape[1], "conv1d", "shape mismatch");
    require(stride >= 1 && padding >= 0, "conv1d", "bad stride/padding");
    const std::size_t B = tx.shape[0], C = tx.shape[1], L = tx.shape[2];
    const std::size_t O = tw.shape[0], K = tw.shape[2];
    require(L + 2 * static_cast<std::size_t>(padding) >= K, "conv1d", "kernel larger than padded input");
    const std::size_t lout = (L + 2 * padding - K) / stride + 1;

    Tensor out({B, O, lout});
    std::vector<double> scratch(C * K * lout);
    for (std::size_t b = 0; b < B; ++b) {
        im2row(tx.data.data() + b * C * L, C, L, K, stride, padding, lout, scratch.data());
        mm_nn_acc(tw.data.data(), scratch.data(), out.data.data() + b * O * lout,
                  O, C * K, lout);
    }
    check_finite(out, "conv1d");
    return push(std::move(out),
                [x, w, stride, padding, B, C, L, O, K, lout](Tape& t, const Node& self) {
        const Tensor& vx = t.val(x);
        const Tensor& vw = t.val(w);
        Tensor& gx = t.adj_of(x);
        Tensor& gw = t.adj_of(w);
        std::vector<double> scratch(C * K * lout);
        std::vector<double> dscratch(C * K * lout);
        for (std::size_t b = 0; b < B; ++b) {
            const double* g = self.adj.data.data() + b * O * lout;
            // dW += g_b * M_b^T
            im2row(vx.data.data() + b * C * L, C, L, K, stride, padding, lout, scratch.data());
            mm_nt_acc(g, scratch.data(), gw.data.data(), O, lout, C * K);
            // dM = W^T * g_b, scattered back onto dx
            std::fill(dscratch.begin(), dscratch.end(), 0.0);
            mm_tn_acc(vw.data.data(), g, dscratch.data(), O, C * K, lout);
            row2im_acc(dscratch.data(), C, L, K, stride, padding, lout,
                       gx.data.data() + b * C * L);
        }
    });
}

Var Tape::global_average_pool(Var x) {
    const Tensor& tx = val(x);
    require(tx.rank() == 3, "global_average_pool", "input must be (batch, channels, length)");
    const std::size_t B = tx.shape[0], C = tx.shape[1], L = tx.shape[2];
    require(L > 0, "global_average_pool", "empty length axis");
    Tensor out({B, C});
    for (std::size_t i = 0; i < B * C; ++i) {
        out.data[i] = kernels::ops().sum(tx.data.data() + i * L, L) / static_cast<double>(L);
    }
    check_finite(out, "global_average_pool");
    return push(std::move(out), [x, B, C, L](Tape& t, const Node& self) {
        Tensor& gx = t.adj_of(x);
        const double inv = 1.0 / static_cast<double>(L);
        for (std::size_t i = 0; i < B * C; ++i) {
            const double g = self.adj.data[i] * inv;
            double* row = gx.data.data() + i * L;
            for (std::size_t l = 0; l < L; ++l) row[l] += g;
        }
    });
}

Var Tape::reduce_mean(Var x) {
    const Tensor& tx = val(x);
    require(tx.numel() > 0, "reduce_mean", "empty tensor");
    Tensor out({1});
    out.data[0] = kernels::ops().sum(tx.data.data(), tx.numel()) / static_cast<double>(tx.numel());
    check_finite(out, "reduce_mean");
    return push(std::move(out), [x](Tape& t, const Node& self) {
        Tensor& gx = t.adj_of(x);
        const double g = self.adj.data[0] / static_cast<double>(gx.numel());
        for (double& v : gx.data) v += g;
    });
}

Var Tape::gather_class(Var x, const std::vector<int>& idx) {
    const Tensor& tx = val(x);
    require(tx.rank() == 2, "gather_class", "input must be (batch, classes)");
    require(idx.size() == tx.shape[0], "gather_class", "index count must match batch");
    const std::size_t K = tx.shape[1];
    Tensor out({tx.shape[0]});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= K) {
            throw std::out_of_range("gather_class: class index out of range");
        }
        out.data[i] = tx.at(i, static_cast<std::size_t>(idx[i]));
    }
    return push(std::move(out), [x, idx, K](Tape& t, const Node& self) {
        Tensor& gx = t.adj_of(x);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            gx.data[i * K + static_cast<std::size_t>(idx[i])] += self.adj.data[i];
        }
    });
}

Var Tape::softmax(Var z, int axis) {
    const Tensor& tz = val(z);
    require(tz.rank() >= 1, "softmax", "empty tensor");
    const int last = static_cast<int>(tz.rank()) - 1;
    require(axis == -1 || axis == last, "softmax", "only the last axis is supported");
    const std::size_t K = tz.shape.back();
    const std::size_t rows = tz.numel() / K;
    Tensor out(tz.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* zr = tz.data.data() + r * K;
        double* yr = out.data.data() + r * K;
        double zmax = zr[0];
        for (std::size_t j = 1; j < K; ++j) zmax = std::max(zmax, zr[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            yr[j] = std::exp(zr[j] - zmax);
            denom += yr[j];
        }
        for (std::size_t j = 0; j < K; ++j) yr[j] /= denom;
    }
    check_finite(out, "softmax");
    return push(std::move(out), [z, K, rows](Tape& t, const Node& self) {
        Tensor& gz = t.adj_of(z);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = self.value.data.data() + r * K;
            const double* g = self.adj.data.data() + r * K;
            const double gy = kernels::ops().dot(g, y, K);
            double* out = gz.data.data() + r * K;
            for (std::size_t j = 0; j < K; ++j) out[j] += y[j] * (g[j] - gy);
        }
    });
}

Var Tape::soft_threshold(Var x, Var tau) {
    const Tensor& tx = val(x);
    const Tensor& tt = val(tau);
    enum class Mode { full, channel, same } mode;
    if (tt.numel() == 1) {
        mode = Mode::full;
    } else if (tx.rank() == 3 && tt.rank() == 2 && tt.shape[0] == tx.shape[0] &&
               tt.shape[1] == tx.shape[1]) {
        mode = Mode::channel;
    } else if (tt.same_shape(tx)) {
        mode = Mode::same;
    } else {
        throw std::invalid_argument("soft_threshold: shape mismatch");
    }
    const std::size_t L = mode == Mode::channel ? tx.shape[2] : 1;
    auto tau_at = [&](std::size_t i) {
        switch (mode) {
            case Mode::full: return tt.data[0];
            case Mode::channel: return tt.data[i / L];
            default: return tt.data[i];
        }
    };
    Tensor out(tx.shape);
    for (std::size_t i = 0; i < tx.numel(); ++i) {
        const double v = tx.data[i];
        const double th = tau_at(i);
        const double mag = std::fabs(v) - th;
        out.data[i] = mag > 0.0 ? (v > 0.0 ? mag : -mag) : 0.0;
    }
    check_finite(out, "soft_threshold");
    return push(std::move(out), [x, tau, mode, L](Tape& t, const Node& self) {
        const Tensor& vx = t.val(x);
        const Tensor& vt = t.val(tau);
        Tensor& gx = t.adj_of(x);
        Tensor& gt = t.adj_of(tau);
        auto tau_index = [&](std::size_t i) {
            switch (mode) {
                case Mode::full: return std::size_t{0};
                case Mode::channel: return i / L;
                default: return i;
            }
        };
        const double* g = self.adj.data.data();
        for (std::size_t i = 0; i < vx.numel(); ++i) {
            const double v = vx.data[i];
            const std::size_t ti = tau_index(i);
            if (std::fabs(v) <= vt.data[ti]) continue;  // subgradient 0 at the kink
            gx.data[i] += g[i];
            gt.data[ti] += v > 0.0 ? -g[i] : g[i];
        }
    });
}

Var Tape::grl(Var x, double beta) {
    require(std::isfinite(beta), "grl", "beta must be finite");
    Tensor out = val(x);  // identity forward, bit-exact
    return push(std::move(out), [x, beta](Tape& t, const Node& self) {
        Tensor& gx = t.adj_of(x);
        kernels::ops().axpy(-beta, self.adj.data.data(), gx.data.data(), gx.numel());
    });
}

void Tape::backward(Var loss) {
    if (!loss.valid() || static_cast<std::size_t>(loss.id) >= nodes_.size()) {
        throw std::invalid_argument("backward: invalid loss node");
    }
    if (val(loss).numel() != 1) {
        throw std::invalid_argument("backward: loss must be a scalar");
    }
    adj_of(loss).data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.adj.data.empty()) continue;
        if (n.backprop) n.backprop(*this, n);
        if (n.parameter) {
            kernels::ops().add(n.parameter->grad.data.data(), n.adj.data.data(),
                               n.parameter->grad.data.data(), n.adj.numel());
        }
    }
}

}  // namespace rffsei::ad
