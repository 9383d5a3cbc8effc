#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lrpseg {

struct Shape {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    std::size_t size() const { return n * c * h * w; }
    std::size_t plane() const { return h * w; }
    std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense batch x channel x row x column float array, row-major (NCHW).
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(Shape shape, float fill = 0.0f);
    Tensor4(Shape shape, std::vector<float> data);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    std::vector<float>& values() { return data_; }
    const std::vector<float>& values() const { return data_; }

    float& operator[](std::size_t i) { return data_[i]; }
    const float& operator[](std::size_t i) const { return data_[i]; }

    std::size_t offset(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
        return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }
    float& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) { return data_[offset(n, c, y, x)]; }
    float at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const { return data_[offset(n, c, y, x)]; }

    // Same payload, new dims; sizes must agree.
    Tensor4 reshaped(Shape shape) const;

    double sum() const;
    bool all_finite() const;

    friend bool operator==(const Tensor4&, const Tensor4&) = default;

private:
    Shape shape_;
    std::vector<float> data_;
};

// Row-major out x in weight matrix for fully connected layers.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

    float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct ConvParams {
    Tensor4 kernel;  // out_ch x in_ch x kh x kw
    std::vector<float> bias;  // empty means zero bias
    std::size_t stride = 1;
    std::size_t padding = 0;
};

// Flat offsets into the pre-pool tensor, one per pooled output element.
struct PoolIndices {
    Shape input_shape;
    Shape output_shape;
    std::vector<std::size_t> argmax;
};

struct PoolResult {
    Tensor4 output;
    PoolIndices indices;
};

Shape conv_output_shape(const Shape& input, const Shape& kernel, std::size_t stride, std::size_t padding);

Tensor4 conv2d(const Tensor4& input, const ConvParams& params);

// Gradient of conv2d with respect to its input: the transposed convolution of
// `upstream` with `kernel`, cropped to `input_shape`.
Tensor4 conv2d_backward_input(const Tensor4& upstream, const Tensor4& kernel, std::size_t stride,
                              std::size_t padding, const Shape& input_shape);

// Gradient of conv2d with respect to its kernel, summed over the batch.
Tensor4 conv2d_backward_kernel(const Tensor4& input, const Tensor4& upstream, const Shape& kernel_shape,
                               std::size_t stride, std::size_t padding);

PoolResult maxpool2x2(const Tensor4& input);

// Route every pooled value back to its recorded argmax; everything else is 0.
Tensor4 unpool(const Tensor4& pooled, const PoolIndices& indices);

// Reproduces the pooled tensor from the pre-pool input and recorded indices.
Tensor4 gather(const Tensor4& input, const PoolIndices& indices);

Tensor4 relu(const Tensor4& input);

std::vector<float> linear(std::span<const float> input, const Matrix& weights, std::span<const float> bias);

// W^T * upstream.
std::vector<float> linear_backward_input(std::span<const float> upstream, const Matrix& weights);

}  // namespace lrpseg
