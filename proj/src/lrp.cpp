#include "lrpseg/lrp.hpp"

#include <algorithm>
#include <cmath>

#include "lrpseg/error.hpp"

namespace lrpseg {

namespace {

double stabilize(double d) {
    if (std::abs(d) < kStabilizer) d += d >= 0.0 ? kStabilizer : -kStabilizer;
    return d;
}

template <typename F>
Tensor4 transform(const Tensor4& t, F f) {
    Tensor4 out = t;
    for (float& v : out.values()) v = f(v);
    return out;
}

template <typename F>
Matrix transform(const Matrix& m, F f) {
    Matrix out = m;
    for (float& v : out.data) v = f(v);
    return out;
}

template <typename F>
std::vector<float> transform(const std::vector<float>& b, F f) {
    std::vector<float> out = b;
    for (float& v : out) v = f(v);
    return out;
}

float pos(float v) { return v > 0.0f ? v : 0.0f; }
float neg(float v) { return v < 0.0f ? v : 0.0f; }

struct ConvOp {
    std::size_t stride;
    std::size_t padding;
    Shape input_shape;

    Tensor4 forward(const Tensor4& a, const Tensor4& k, const std::vector<float>& b) const {
        return conv2d(a, ConvParams{k, b, stride, padding});
    }
    Tensor4 backward(const Tensor4& s, const Tensor4& k) const {
        return conv2d_backward_input(s, k, stride, padding, input_shape);
    }
};

struct LinearOp {
    Shape input_shape;

    Tensor4 forward(const Tensor4& a, const Matrix& w, const std::vector<float>& b) const {
        return Tensor4({1, w.rows, 1, 1}, linear(a.data(), w, b));
    }
    Tensor4 backward(const Tensor4& s, const Matrix& w) const {
        return Tensor4(input_shape, linear_backward_input(s.data(), w));
    }
};

Tensor4 hadamard(const Tensor4& a, const Tensor4& b) {
    Tensor4 out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

double population_std(const Tensor4& z) {
    if (z.size() == 0) return 0.0;
    double mean = 0.0;
    for (float v : z.values()) mean += v;
    mean /= static_cast<double>(z.size());
    double var = 0.0;
    for (float v : z.values()) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(z.size()));
}

template <typename Op, typename W>
Tensor4 propagate_rule(const Tensor4& a, const W& w, const std::vector<float>& b, const Tensor4& relevance,
                       const RuleConfig& cfg, const Op& op) {
    switch (cfg.rule) {
        case RuleKind::Zero:
        case RuleKind::Epsilon:
        case RuleKind::Gamma: {
            const double g = cfg.rule == RuleKind::Gamma ? cfg.gamma : 0.0;
            auto rho = [g](float v) { return static_cast<float>(v + g * std::max(v, 0.0f)); };
            const W rw = g != 0.0 ? transform(w, rho) : w;
            const std::vector<float> rb = g != 0.0 ? transform(b, rho) : b;
            const Tensor4 z = op.forward(a, rw, rb);
            if (z.shape() != relevance.shape()) {
                throw ShapeError("relevance " + relevance.shape().str() + " does not match layer output " +
                                 z.shape().str());
            }
            const double eps = cfg.rule == RuleKind::Epsilon ? cfg.epsilon_scale * population_std(z) : 0.0;
            Tensor4 s(z.shape());
            for (std::size_t j = 0; j < z.size(); ++j) {
                const double zj = z[j];
                const double denom = zj + (zj >= 0.0 ? eps : -eps);
                s[j] = static_cast<float>(relevance[j] / stabilize(denom));
            }
            return hadamard(a, op.backward(s, rw));
        }
        case RuleKind::AlphaBeta: {
            const Tensor4 ap = transform(a, pos);
            const Tensor4 an = transform(a, neg);
            const W wp = transform(w, pos);
            const W wn = transform(w, neg);
            const std::vector<float> bp = transform(b, pos);
            const std::vector<float> bn = transform(b, neg);
            const std::vector<float> none;

            Tensor4 zp = op.forward(ap, wp, bp);
            Tensor4 zn = op.forward(ap, wn, bn);
            {
                const Tensor4 zp2 = op.forward(an, wn, none);
                const Tensor4 zn2 = op.forward(an, wp, none);
                for (std::size_t j = 0; j < zp.size(); ++j) {
                    zp[j] += zp2[j];
                    zn[j] += zn2[j];
                }
            }
            if (zp.shape() != relevance.shape()) {
                throw ShapeError("relevance " + relevance.shape().str() + " does not match layer output " +
                                 zp.shape().str());
            }
            Tensor4 sp(zp.shape());
            Tensor4 sn(zn.shape());
            for (std::size_t j = 0; j < zp.size(); ++j) {
                const bool has_pos = std::abs(zp[j]) >= kStabilizer;
                const bool has_neg = std::abs(zn[j]) >= kStabilizer;
                double cp = cfg.alpha;
                double cn = -cfg.beta;
                if (has_pos && !has_neg) {
                    cp = cfg.alpha - cfg.beta;
                    cn = 0.0;
                } else if (!has_pos && has_neg) {
                    cp = 0.0;
                    cn = cfg.alpha - cfg.beta;
                }
                sp[j] = static_cast<float>(cp * relevance[j] / stabilize(zp[j]));
                sn[j] = static_cast<float>(cn * relevance[j] / stabilize(zn[j]));
            }
            Tensor4 from_pos = op.backward(sp, wp);
            Tensor4 from_neg = op.backward(sn, wn);
            Tensor4 out = hadamard(ap, from_pos);
            const Tensor4 out_neg_act = hadamard(an, op.backward(sp, wn));
            const Tensor4 out_pos_act_neg = hadamard(ap, from_neg);
            const Tensor4 out_neg_act_pos = hadamard(an, op.backward(sn, wp));
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] += out_neg_act[i] + out_pos_act_neg[i] + out_neg_act_pos[i];
            return out;
        }
        case RuleKind::ZB: throw ConfigError("zb rule applies to the pixel layer only");
    }
    throw ConfigError("unknown rule");
}

}  // namespace

Tensor4 init_relevance(const ForwardTrace& trace, std::size_t target) {
    if (trace.inputs.empty()) throw ShapeError("empty forward trace");
    const Tensor4& logits = trace.inputs.back();
    if (target >= logits.size()) {
        throw ConfigError("target class " + std::to_string(target) + " out of range for " +
                          std::to_string(logits.size()) + " outputs");
    }
    Tensor4 r(logits.shape());
    r[target] = logits[target];
    return r;
}

std::vector<float> lrp_linear(std::span<const float> activations, const Matrix& weights,
                              std::span<const float> bias, std::span<const float> relevance, const RuleConfig& cfg) {
    if (weights.cols != activations.size() || weights.rows != relevance.size()) {
        throw ShapeError("lrp_linear: weights " + std::to_string(weights.rows) + "x" + std::to_string(weights.cols) +
                         " vs " + std::to_string(activations.size()) + " inputs and " +
                         std::to_string(relevance.size()) + " relevances");
    }
    const Shape in{1, activations.size(), 1, 1};
    const Tensor4 a(in, std::vector<float>(activations.begin(), activations.end()));
    const Tensor4 r({1, relevance.size(), 1, 1}, std::vector<float>(relevance.begin(), relevance.end()));
    const std::vector<float> b(bias.begin(), bias.end());
    return propagate_rule(a, weights, b, r, cfg, LinearOp{in}).values();
}

Tensor4 lrp_conv(const Tensor4& activations, const ConvParams& params, const Tensor4& relevance,
                 const RuleConfig& cfg) {
    return propagate_rule(activations, params.kernel, params.bias, relevance, cfg,
                          ConvOp{params.stride, params.padding, activations.shape()});
}

Tensor4 lrp_pool(const PoolIndices& indices, const Tensor4& relevance) { return unpool(relevance, indices); }

Tensor4 lrp_zb(const Tensor4& input, const ConvParams& params, std::span<const std::pair<float, float>> bounds,
               const Tensor4& relevance) {
    const Shape& s = input.shape();
    if (bounds.size() != s.c) {
        throw ConfigError("zb rule needs bounds for " + std::to_string(s.c) + " channels, got " +
                          std::to_string(bounds.size()));
    }
    Tensor4 lo(s), hi(s);
    for (std::size_t c = 0; c < s.c; ++c) {
        if (!(bounds[c].first < bounds[c].second)) {
            throw ConfigError("zb bounds for channel " + std::to_string(c) + " violate lower < upper");
        }
        for (std::size_t n = 0; n < s.n; ++n) {
            std::fill_n(lo.data().begin() + static_cast<std::ptrdiff_t>(lo.offset(n, c, 0, 0)), s.plane(),
                        bounds[c].first);
            std::fill_n(hi.data().begin() + static_cast<std::ptrdiff_t>(hi.offset(n, c, 0, 0)), s.plane(),
                        bounds[c].second);
        }
    }
    const ConvOp op{params.stride, params.padding, s};
    const Tensor4& w = params.kernel;
    const Tensor4 wp = transform(w, pos);
    const Tensor4 wn = transform(w, neg);
    const std::vector<float> none;

    const Tensor4 zx = op.forward(input, w, none);
    const Tensor4 zl = op.forward(lo, wp, none);
    const Tensor4 zh = op.forward(hi, wn, none);
    if (zx.shape() != relevance.shape()) {
        throw ShapeError("relevance " + relevance.shape().str() + " does not match layer output " + zx.shape().str());
    }
    Tensor4 sr(zx.shape());
    for (std::size_t j = 0; j < zx.size(); ++j) {
        const double z = static_cast<double>(zx[j]) - zl[j] - zh[j];
        sr[j] = static_cast<float>(relevance[j] / stabilize(z));
    }
    const Tensor4 cx = op.backward(sr, w);
    const Tensor4 cl = op.backward(sr, wp);
    const Tensor4 ch = op.backward(sr, wn);
    Tensor4 out(s);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(input[i]) * cx[i] - static_cast<double>(lo[i]) * cl[i] -
                                    static_cast<double>(hi[i]) * ch[i]);
    }
    return out;
}

RelevanceTrace propagate_layers(const ForwardTrace& trace, const Network& net, const RuleAssignment& assignment,
                                std::size_t target) {
    const Architecture& arch = net.architecture();
    assignment.validate(arch);
    if (trace.inputs.size() != arch.layers.size() + 1) {
        throw ShapeError("trace has " + std::to_string(trace.inputs.size()) + " activations, architecture needs " +
                         std::to_string(arch.layers.size() + 1));
    }
    const std::size_t first = arch.first_conv();
    const auto bounds = net.normalized_bounds();

    RelevanceTrace out;
    out.relevance.resize(arch.layers.size() + 1);
    out.relevance.back() = init_relevance(trace, target);
    for (std::size_t i = arch.layers.size(); i-- > 0;) {
        const LayerSpec& l = arch.layers[i];
        const Tensor4& a = trace.inputs[i];
        const Tensor4& r = out.relevance[i + 1];
        Tensor4 next;
        switch (l.kind) {
            case LayerKind::Conv:
                next = i == first ? lrp_zb(a, net.params(i).conv, bounds, r)
                                  : lrp_conv(a, net.params(i).conv, r, assignment.at(l.name));
                break;
            case LayerKind::Relu: next = r; break;
            case LayerKind::MaxPool: next = lrp_pool(trace.pool_indices.at(i), r); break;
            case LayerKind::Flatten: next = r.reshaped(a.shape()); break;
            case LayerKind::Linear: {
                const LayerParams& p = net.params(i);
                next = propagate_rule(a, p.matrix, p.bias, r, assignment.at(l.name), LinearOp{a.shape()});
                break;
            }
        }
        out.relevance[i] = std::move(next);
    }

    const Tensor4& pixels = out.relevance.front();
    const Shape& s = pixels.shape();
    RelevanceMap map(s.h, s.w);
    map.target_class = target;
    for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t k = 0; k < s.plane(); ++k) map.values[k] += pixels[c * s.plane() + k];
    out.map = std::move(map);
    return out;
}

RelevanceMap propagate(const ForwardTrace& trace, const Network& net, const RuleAssignment& assignment,
                       std::size_t target) {
    return std::move(propagate_layers(trace, net, assignment, target).map);
}

}  // namespace lrpseg
