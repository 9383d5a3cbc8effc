#include "lrpseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lrpseg/error.hpp"
#include "lrpseg/parallel.hpp"

namespace lrpseg {

std::string Shape::str() const {
    std::ostringstream os;
    os << n << "x" << c << "x" << h << "x" << w;
    return os.str();
}

Tensor4::Tensor4(Shape shape, float fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor4::Tensor4(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
        throw ShapeError("tensor payload of " + std::to_string(data_.size()) + " values does not match dims " +
                         shape_.str());
    }
}

Tensor4 Tensor4::reshaped(Shape shape) const {
    if (shape.size() != shape_.size()) {
        throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
    }
    return Tensor4(shape, data_);
}

double Tensor4::sum() const {
    double s = 0.0;
    for (float v : data_) s += v;
    return s;
}

bool Tensor4::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

namespace {

// Range of output columns [lo, hi) whose input column ox*stride - pad + k lies in [0, in).
std::pair<std::size_t, std::size_t> valid_range(std::size_t out, std::size_t in, std::size_t k,
                                                std::size_t stride, std::size_t pad) {
    const long long offset = static_cast<long long>(k) - static_cast<long long>(pad);
    long long lo = 0;
    if (offset < 0) lo = (-offset + static_cast<long long>(stride) - 1) / static_cast<long long>(stride);
    long long hi = static_cast<long long>(out);
    // largest o with o*stride + offset <= in - 1
    const long long last = static_cast<long long>(in) - 1 - offset;
    if (last < 0) return {0, 0};
    hi = std::min(hi, last / static_cast<long long>(stride) + 1);
    if (lo >= hi) return {0, 0};
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

Shape conv_output_shape(const Shape& input, const Shape& kernel, std::size_t stride, std::size_t padding) {
    if (stride == 0) throw ShapeError("convolution stride must be positive");
    if (kernel.h == 0 || kernel.w == 0) throw ShapeError("convolution kernel " + kernel.str() + " is empty");
    if (input.c != kernel.c) {
        throw ShapeError("input " + input.str() + " has " + std::to_string(input.c) + " channels but kernel " +
                         kernel.str() + " expects " + std::to_string(kernel.c));
    }
    if (input.h + 2 * padding < kernel.h || input.w + 2 * padding < kernel.w) {
        throw ShapeError("input " + input.str() + " is smaller than kernel " + kernel.str() + " with padding " +
                         std::to_string(padding));
    }
    return {input.n, kernel.n, (input.h + 2 * padding - kernel.h) / stride + 1,
            (input.w + 2 * padding - kernel.w) / stride + 1};
}

Tensor4 conv2d(const Tensor4& input, const ConvParams& params) {
    const Shape& is = input.shape();
    const Shape& ks = params.kernel.shape();
    const Shape os = conv_output_shape(is, ks, params.stride, params.padding);
    if (!params.bias.empty() && params.bias.size() != ks.n) {
        throw ShapeError("bias of length " + std::to_string(params.bias.size()) + " does not match kernel " +
                         ks.str());
    }
    const std::size_t stride = params.stride;
    const std::size_t pad = params.padding;

    Tensor4 out(os);
    parallel_for(os.n * os.c, [&](std::size_t job) {
        const std::size_t n = job / os.c;
        const std::size_t oc = job % os.c;
        std::vector<double> acc(os.plane(), params.bias.empty() ? 0.0 : params.bias[oc]);
        for (std::size_t ic = 0; ic < is.c; ++ic) {
            const float* plane = &input[input.offset(n, ic, 0, 0)];
            for (std::size_t ky = 0; ky < ks.h; ++ky) {
                const auto [y0, y1] = valid_range(os.h, is.h, ky, stride, pad);
                for (std::size_t kx = 0; kx < ks.w; ++kx) {
                    const double w = params.kernel.at(oc, ic, ky, kx);
                    const auto [x0, x1] = valid_range(os.w, is.w, kx, stride, pad);
                    for (std::size_t oy = y0; oy < y1; ++oy) {
                        const float* row = plane + (oy * stride + ky - pad) * is.w;
                        double* dst = &acc[oy * os.w];
                        for (std::size_t ox = x0; ox < x1; ++ox) dst[ox] += w * row[ox * stride + kx - pad];
                    }
                }
            }
        }
        float* dst = &out[out.offset(n, oc, 0, 0)];
        for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<float>(acc[i]);
    });
    return out;
}

Tensor4 conv2d_backward_input(const Tensor4& upstream, const Tensor4& kernel, std::size_t stride,
                              std::size_t padding, const Shape& input_shape) {
    const Shape& ks = kernel.shape();
    const Shape expected = conv_output_shape(input_shape, ks, stride, padding);
    if (upstream.shape() != expected) {
        throw ShapeError("upstream " + upstream.shape().str() + " does not match conv output " + expected.str());
    }
    const Shape& os = expected;
    const Shape& is = input_shape;

    Tensor4 out(is);
    parallel_for(is.n * is.c, [&](std::size_t job) {
        const std::size_t n = job / is.c;
        const std::size_t ic = job % is.c;
        std::vector<double> acc(is.plane(), 0.0);
        for (std::size_t oc = 0; oc < os.c; ++oc) {
            const float* grad = &upstream[upstream.offset(n, oc, 0, 0)];
            for (std::size_t ky = 0; ky < ks.h; ++ky) {
                const auto [y0, y1] = valid_range(os.h, is.h, ky, stride, padding);
                for (std::size_t kx = 0; kx < ks.w; ++kx) {
                    const double w = kernel.at(oc, ic, ky, kx);
                    const auto [x0, x1] = valid_range(os.w, is.w, kx, stride, padding);
                    for (std::size_t oy = y0; oy < y1; ++oy) {
                        double* row = &acc[(oy * stride + ky - padding) * is.w];
                        const float* src = grad + oy * os.w;
                        for (std::size_t ox = x0; ox < x1; ++ox) row[ox * stride + kx - padding] += w * src[ox];
                    }
                }
            }
        }
        float* dst = &out[out.offset(n, ic, 0, 0)];
        for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<float>(acc[i]);
    });
    return out;
}

Tensor4 conv2d_backward_kernel(const Tensor4& input, const Tensor4& upstream, const Shape& kernel_shape,
                               std::size_t stride, std::size_t padding) {
    const Shape& is = input.shape();
    const Shape& ks = kernel_shape;
    const Shape os = conv_output_shape(is, ks, stride, padding);
    if (upstream.shape() != os) {
        throw ShapeError("upstream " + upstream.shape().str() + " does not match conv output " + os.str());
    }

    Tensor4 grad(ks);
    parallel_for(ks.n, [&](std::size_t oc) {
        for (std::size_t ic = 0; ic < ks.c; ++ic) {
            for (std::size_t ky = 0; ky < ks.h; ++ky) {
                const auto [y0, y1] = valid_range(os.h, is.h, ky, stride, padding);
                for (std::size_t kx = 0; kx < ks.w; ++kx) {
                    const auto [x0, x1] = valid_range(os.w, is.w, kx, stride, padding);
                    double acc = 0.0;
                    for (std::size_t n = 0; n < is.n; ++n) {
                        const float* g = &upstream[upstream.offset(n, oc, 0, 0)];
                        const float* in = &input[input.offset(n, ic, 0, 0)];
                        for (std::size_t oy = y0; oy < y1; ++oy) {
                            const float* row = in + (oy * stride + ky - padding) * is.w;
                            const float* grow = g + oy * os.w;
                            for (std::size_t ox = x0; ox < x1; ++ox)
                                acc += static_cast<double>(grow[ox]) * row[ox * stride + kx - padding];
                        }
                    }
                    grad.at(oc, ic, ky, kx) = static_cast<float>(acc);
                }
            }
        }
    });
    return grad;
}

PoolResult maxpool2x2(const Tensor4& input) {
    const Shape& is = input.shape();
    if (is.h % 2 != 0 || is.w % 2 != 0) {
        throw ShapeError("2x2 max-pool needs even spatial dims, got " + is.str());
    }
    const Shape os{is.n, is.c, is.h / 2, is.w / 2};
    PoolResult result{Tensor4(os), PoolIndices{is, os, std::vector<std::size_t>(os.size())}};
    for (std::size_t n = 0; n < os.n; ++n) {
        for (std::size_t c = 0; c < os.c; ++c) {
            for (std::size_t y = 0; y < os.h; ++y) {
                for (std::size_t x = 0; x < os.w; ++x) {
                    // Scan in flat-index order with strict '>' so ties keep the lowest index.
                    std::size_t best = input.offset(n, c, 2 * y, 2 * x);
                    for (std::size_t dy = 0; dy < 2; ++dy) {
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const std::size_t idx = input.offset(n, c, 2 * y + dy, 2 * x + dx);
                            if (input[idx] > input[best]) best = idx;
                        }
                    }
                    const std::size_t o = result.output.offset(n, c, y, x);
                    result.output[o] = input[best];
                    result.indices.argmax[o] = best;
                }
            }
        }
    }
    return result;
}

Tensor4 unpool(const Tensor4& pooled, const PoolIndices& indices) {
    if (pooled.shape() != indices.output_shape) {
        throw ShapeError("pooled tensor " + pooled.shape().str() + " does not match pool indices " +
                         indices.output_shape.str());
    }
    Tensor4 out(indices.input_shape);
    for (std::size_t i = 0; i < pooled.size(); ++i) out[indices.argmax[i]] += pooled[i];
    return out;
}

Tensor4 gather(const Tensor4& input, const PoolIndices& indices) {
    if (input.shape() != indices.input_shape) {
        throw ShapeError("input " + input.shape().str() + " does not match pool indices " +
                         indices.input_shape.str());
    }
    Tensor4 out(indices.output_shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = input[indices.argmax[i]];
    return out;
}

Tensor4 relu(const Tensor4& input) {
    Tensor4 out = input;
    for (float& v : out.values()) v = std::max(v, 0.0f);
    return out;
}

std::vector<float> linear(std::span<const float> input, const Matrix& weights, std::span<const float> bias) {
    if (weights.cols != input.size()) {
        throw ShapeError("linear layer expects " + std::to_string(weights.cols) + " inputs, got " +
                         std::to_string(input.size()));
    }
    if (!bias.empty() && bias.size() != weights.rows) {
        throw ShapeError("linear bias of length " + std::to_string(bias.size()) + " does not match " +
                         std::to_string(weights.rows) + " outputs");
    }
    std::vector<float> out(weights.rows);
    for (std::size_t r = 0; r < weights.rows; ++r) {
        double acc = bias.empty() ? 0.0 : bias[r];
        const float* row = &weights.data[r * weights.cols];
        for (std::size_t c = 0; c < weights.cols; ++c) acc += static_cast<double>(row[c]) * input[c];
        out[r] = static_cast<float>(acc);
    }
    return out;
}

std::vector<float> linear_backward_input(std::span<const float> upstream, const Matrix& weights) {
    if (upstream.size() != weights.rows) {
        throw ShapeError("upstream of length " + std::to_string(upstream.size()) + " does not match " +
                         std::to_string(weights.rows) + " outputs");
    }
    std::vector<double> acc(weights.cols, 0.0);
    for (std::size_t r = 0; r < weights.rows; ++r) {
        const double g = upstream[r];
        const float* row = &weights.data[r * weights.cols];
        for (std::size_t c = 0; c < weights.cols; ++c) acc[c] += g * row[c];
    }
    return {acc.begin(), acc.end()};
}

}  // namespace lrpseg
