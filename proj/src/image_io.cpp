#include "lrpseg/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "lrpseg/error.hpp"
#include "lrpseg/io_util.hpp"

namespace lrpseg {

namespace {

struct DecodedPng {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;
};

DecodedPng decode(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw FormatError("'" + path.string() + "' is not a readable PNG: " + image.message);
    }
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    DecodedPng out;
    out.height = image.height;
    out.width = image.width;
    out.channels = color ? 3 : 1;
    out.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw FormatError("failed decoding '" + path.string() + "': " + image.message);
    }
    return out;
}

void encode(const std::filesystem::path& path, std::size_t height, std::size_t width, std::uint32_t format,
            const std::vector<std::uint8_t>& pixels) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    if (pixels.size() != PNG_IMAGE_SIZE(image)) throw ShapeError("PNG pixel buffer does not match image dims");
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
        throw FormatError(std::string("PNG encoding failed: ") + image.message);
    }
    std::vector<std::uint8_t> buffer(size);
    if (!png_image_write_to_memory(&image, buffer.data(), &size, 0, pixels.data(), 0, nullptr)) {
        throw FormatError(std::string("PNG encoding failed: ") + image.message);
    }
    buffer.resize(size);
    write_file_atomic(path, buffer);
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

Tensor4 read_png(const std::filesystem::path& path) {
    const DecodedPng png = decode(path);
    Tensor4 t({1, 3, png.height, png.width});
    const std::size_t plane = png.height * png.width;
    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            const std::size_t src = png.channels == 3 ? i * 3 + c : i;
            t[c * plane + i] = static_cast<float>(png.pixels[src]) / 255.0f;
        }
    }
    return t;
}

std::vector<std::uint8_t> read_mask_png(const std::filesystem::path& path, std::size_t* height, std::size_t* width) {
    const DecodedPng png = decode(path);
    if (height) *height = png.height;
    if (width) *width = png.width;
    std::vector<std::uint8_t> mask(png.height * png.width);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = png.pixels[i * png.channels] != 0 ? 1 : 0;
    return mask;
}

void write_png_gray(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& pixels) {
    encode(path, height, width, PNG_FORMAT_GRAY, pixels);
}

void write_png_rgb(const std::filesystem::path& path, std::size_t height, std::size_t width,
                   const std::vector<std::uint8_t>& pixels) {
    encode(path, height, width, PNG_FORMAT_RGB, pixels);
}

void write_image_png(const std::filesystem::path& path, const Tensor4& image) {
    const Shape& s = image.shape();
    std::vector<std::uint8_t> px(s.plane());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = to_byte(image[i]);
    write_png_gray(path, s.h, s.w, px);
}

void write_mask_png(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& mask) {
    std::vector<std::uint8_t> px(mask.size());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = mask[i] ? 255 : 0;
    write_png_gray(path, height, width, px);
}

void write_heatmap_png(const std::filesystem::path& path, const RelevanceMap& map) {
    double scale = 0.0;
    for (float v : map.values) scale = std::max(scale, static_cast<double>(std::abs(v)));
    std::vector<std::uint8_t> px(map.size() * 3);
    for (std::size_t i = 0; i < map.size(); ++i) {
        const double t = scale > 0.0 ? map.values[i] / scale : 0.0;
        const double fade = 1.0 - std::abs(t);
        const double r = t >= 0.0 ? 1.0 : fade;
        const double b = t <= 0.0 ? 1.0 : fade;
        px[3 * i] = to_byte(r);
        px[3 * i + 1] = to_byte(fade);
        px[3 * i + 2] = to_byte(b);
    }
    write_png_rgb(path, map.height, map.width, px);
}

void write_score_png(const std::filesystem::path& path, const RelevanceMap& map) {
    std::vector<std::uint8_t> px(map.size());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = to_byte(map.values[i]);
    write_png_gray(path, map.height, map.width, px);
}

}  // namespace lrpseg
