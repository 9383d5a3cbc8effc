#pragma once

// Brute-force reference implementations. They only share storage types with
// the library, never its kernels, so agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "lrpseg/network.hpp"
#include "lrpseg/tensor.hpp"

namespace oracle {

using lrpseg::Matrix;
using lrpseg::Shape;
using lrpseg::Tensor4;

inline Tensor4 random_tensor(Shape s, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> d(lo, hi);
    Tensor4 t(s);
    for (float& v : t.values()) v = d(rng);
    return t;
}

inline std::vector<float> random_vector(std::size_t n, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> d(lo, hi);
    std::vector<float> v(n);
    for (float& x : v) x = d(rng);
    return v;
}

// Seven nested loops straight from the definition.
inline Tensor4 conv_direct(const Tensor4& x, const Tensor4& k, const std::vector<float>& bias, std::size_t stride,
                           std::size_t pad) {
    const Shape& xs = x.shape();
    const Shape& ks = k.shape();
    const std::size_t oh = (xs.h + 2 * pad - ks.h) / stride + 1;
    const std::size_t ow = (xs.w + 2 * pad - ks.w) / stride + 1;
    Tensor4 out({xs.n, ks.n, oh, ow});
    for (std::size_t n = 0; n < xs.n; ++n)
        for (std::size_t o = 0; o < ks.n; ++o)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t xx = 0; xx < ow; ++xx) {
                    double acc = bias.empty() ? 0.0 : bias[o];
                    for (std::size_t c = 0; c < ks.c; ++c)
                        for (std::size_t i = 0; i < ks.h; ++i)
                            for (std::size_t j = 0; j < ks.w; ++j) {
                                const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                                const long ix = static_cast<long>(xx * stride + j) - static_cast<long>(pad);
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(xs.h) || ix >= static_cast<long>(xs.w))
                                    continue;
                                acc += static_cast<double>(x.at(n, c, iy, ix)) * k.at(o, c, i, j);
                            }
                    out.at(n, o, y, xx) = static_cast<float>(acc);
                }
    return out;
}

struct Pooled {
    Tensor4 values;
    std::vector<std::size_t> argmax;
};

// Scans each 2x2 window in row-major order and keeps the first strict maximum.
inline Pooled maxpool_window(const Tensor4& x) {
    const Shape& s = x.shape();
    Pooled p{Tensor4({s.n, s.c, s.h / 2, s.w / 2}), {}};
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t y = 0; y < s.h / 2; ++y)
                for (std::size_t xx = 0; xx < s.w / 2; ++xx) {
                    std::size_t best = x.offset(n, c, 2 * y, 2 * xx);
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const std::size_t o = x.offset(n, c, 2 * y + dy, 2 * xx + dx);
                            if (x[o] > x[best]) best = o;
                        }
                    p.values.at(n, c, y, xx) = x[best];
                    p.argmax.push_back(best);
                }
    return p;
}

inline std::vector<float> linear_loop(const std::vector<float>& x, const Matrix& w, const std::vector<float>& b) {
    std::vector<float> y(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
        double acc = b.empty() ? 0.0 : b[r];
        for (std::size_t c = 0; c < w.cols; ++c) acc += static_cast<double>(w(r, c)) * x[c];
        y[r] = static_cast<float>(acc);
    }
    return y;
}

// Dense matrix M with conv(x) = M * vec(x) (+ bias), batch 1.
inline Matrix conv_matrix(const Tensor4& k, const Shape& in, std::size_t stride, std::size_t pad) {
    const Shape& ks = k.shape();
    const std::size_t oh = (in.h + 2 * pad - ks.h) / stride + 1;
    const std::size_t ow = (in.w + 2 * pad - ks.w) / stride + 1;
    Matrix m(ks.n * oh * ow, in.c * in.h * in.w);
    for (std::size_t o = 0; o < ks.n; ++o)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x)
                for (std::size_t c = 0; c < ks.c; ++c)
                    for (std::size_t i = 0; i < ks.h; ++i)
                        for (std::size_t j = 0; j < ks.w; ++j) {
                            const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                            const long ix = static_cast<long>(x * stride + j) - static_cast<long>(pad);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.h) || ix >= static_cast<long>(in.w))
                                continue;
                            m((o * oh + y) * ow + x, (c * in.h + static_cast<std::size_t>(iy)) * in.w +
                                                         static_cast<std::size_t>(ix)) += k.at(o, c, i, j);
                        }
    return m;
}

// Bias repeated over every output position of each channel.
inline std::vector<float> conv_bias_vector(const std::vector<float>& bias, std::size_t positions) {
    std::vector<float> b;
    for (float v : bias) b.insert(b.end(), positions, v);
    return b;
}

// Isodata on sorted values with prefix sums in long double: the class split
// for a threshold is a partition point, so every iterate is computed from an
// exact index rather than by rescanning.
inline double isodata(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::vector<long double> prefix(v.size() + 1, 0.0L);
    for (std::size_t i = 0; i < v.size(); ++i) prefix[i + 1] = prefix[i] + v[i];
    long double t = prefix.back() / static_cast<long double>(v.size());
    for (int it = 0; it < 100; ++it) {
        const std::size_t k = static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), static_cast<double>(t)) - v.begin());
        if (k == 0 || k == v.size()) break;
        const long double lo = prefix[k] / static_cast<long double>(k);
        const long double hi = (prefix.back() - prefix[k]) / static_cast<long double>(v.size() - k);
        const long double next = 0.5L * (lo + hi);
        const long double d = std::fabs(next - t);
        t = next;
        if (d < 1e-6L) break;
    }
    return static_cast<double>(t);
}

struct Counts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts confusion_loop(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth) {
    Counts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && truth[i]) ++c.tp;
        else if (pred[i]) ++c.fp;
        else if (truth[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

// For every distinct pooled score t, the confusion of "score >= t" over all pixels.
inline std::map<float, Counts> pr_bruteforce(const std::vector<std::vector<float>>& scores,
                                             const std::vector<std::vector<std::uint8_t>>& truths) {
    std::set<float> thresholds;
    for (const auto& s : scores) thresholds.insert(s.begin(), s.end());
    std::map<float, Counts> out;
    for (float t : thresholds) {
        Counts c;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            std::vector<std::uint8_t> pred(scores[i].size());
            for (std::size_t j = 0; j < pred.size(); ++j) pred[j] = scores[i][j] >= t;
            const Counts ci = confusion_loop(pred, truths[i]);
            c.tp += ci.tp;
            c.fp += ci.fp;
            c.fn += ci.fn;
            c.tn += ci.tn;
        }
        out[t] = c;
    }
    return out;
}

// Forward pass of a bound network rebuilt from the oracle kernels above.
inline std::array<float, 2> forward_logits(const lrpseg::Network& net, const Tensor4& image) {
    const auto& m = net.manifest();
    Tensor4 x = image;
    const Shape& s = x.shape();
    for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t i = 0; i < s.plane(); ++i) {
            float& v = x[c * s.plane() + i];
            v = (v - m.mean[c]) / m.std[c];
        }
    const auto& layers = net.architecture().layers;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const auto& p = net.params(i);
        switch (l.kind) {
            case lrpseg::LayerKind::Conv: x = conv_direct(x, p.conv.kernel, p.conv.bias, l.stride, l.padding); break;
            case lrpseg::LayerKind::Relu:
                for (float& v : x.values()) v = v > 0.0f ? v : 0.0f;
                break;
            case lrpseg::LayerKind::MaxPool: x = maxpool_window(x).values; break;
            case lrpseg::LayerKind::Flatten: x = Tensor4({1, x.size(), 1, 1}, x.values()); break;
            case lrpseg::LayerKind::Linear: {
                const auto y = linear_loop(x.values(), p.matrix, p.bias);
                x = Tensor4({1, y.size(), 1, 1}, y);
                break;
            }
        }
    }
    return {x[0], x[1]};
}

}  // namespace oracle
