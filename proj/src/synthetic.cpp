#include "lrpseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "lrpseg/error.hpp"
#include "lrpseg/image_io.hpp"
#include "lrpseg/io_util.hpp"

namespace lrpseg {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double cx = ax + t * dx - px, cy = ay + t * dy - py;
    return std::sqrt(cx * cx + cy * cy);
}

std::vector<double> background(const SceneSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    constexpr std::size_t G = 5;
    std::array<double, G * G> grid{};
    for (double& g : grid) g = unit(rng);
    const double angle = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    std::normal_distribution<double> noise(0.0, spec.pixel_noise);

    const std::size_t h = spec.height, w = spec.width;
    std::vector<double> img(h * w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double gy = static_cast<double>(y) / static_cast<double>(h - 1) * (G - 1);
            const double gx = static_cast<double>(x) / static_cast<double>(w - 1) * (G - 1);
            const auto y0 = std::min<std::size_t>(static_cast<std::size_t>(gy), G - 2);
            const auto x0 = std::min<std::size_t>(static_cast<std::size_t>(gx), G - 2);
            const double fy = gy - static_cast<double>(y0), fx = gx - static_cast<double>(x0);
            const double tex = (1 - fy) * ((1 - fx) * grid[y0 * G + x0] + fx * grid[y0 * G + x0 + 1]) +
                               fy * ((1 - fx) * grid[(y0 + 1) * G + x0] + fx * grid[(y0 + 1) * G + x0 + 1]);
            const double ramp = (static_cast<double>(x) / static_cast<double>(w) - 0.5) * std::cos(angle) +
                                (static_cast<double>(y) / static_cast<double>(h) - 0.5) * std::sin(angle);
            img[y * w + x] = spec.base_brightness + spec.texture_amplitude * tex + spec.gradient_strength * ramp +
                             noise(rng);
        }
    }
    return img;
}

struct Crack {
    std::vector<std::uint8_t> mask;
    double contrast = 0.0;
};

Crack draw_crack(const SceneSpec& spec, std::mt19937_64& rng) {
    const std::size_t h = spec.height, w = spec.width;
    const double size = static_cast<double>(std::min(h, w));
    const auto points = std::uniform_int_distribution<std::size_t>(spec.min_points, spec.max_points)(rng);
    const double width = std::uniform_real_distribution<double>(spec.min_width, spec.max_width)(rng);
    Crack crack;
    crack.contrast = std::uniform_real_distribution<double>(spec.min_contrast, spec.max_contrast)(rng);

    std::uniform_real_distribution<double> inner(0.15 * size, 0.85 * size);
    double heading = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    const double step = size * std::uniform_real_distribution<double>(0.5, 0.9)(rng) / static_cast<double>(points - 1);
    std::normal_distribution<double> wiggle(0.0, 0.45);
    std::vector<std::pair<double, double>> pts{{inner(rng), inner(rng)}};
    // Start half a crack length back so the crack straddles the start point.
    pts.front().first -= 0.5 * step * static_cast<double>(points - 1) * std::cos(heading);
    pts.front().second -= 0.5 * step * static_cast<double>(points - 1) * std::sin(heading);
    for (std::size_t k = 1; k < points; ++k) {
        heading += wiggle(rng);
        pts.emplace_back(pts.back().first + step * std::cos(heading), pts.back().second + step * std::sin(heading));
    }

    crack.mask.assign(h * w, 0);
    const double radius = 0.5 * width;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
            for (std::size_t k = 1; k < pts.size(); ++k) {
                if (segment_distance(px, py, pts[k - 1].first, pts[k - 1].second, pts[k].first, pts[k].second) <=
                    radius) {
                    crack.mask[y * w + x] = 1;
                    break;
                }
            }
        }
    }
    return crack;
}

Tensor4 to_image(const std::vector<double>& gray, std::size_t h, std::size_t w) {
    Tensor4 t({1, 3, h, w});
    for (std::size_t i = 0; i < gray.size(); ++i) {
        const float q = static_cast<float>(std::lround(std::clamp(gray[i], 0.0, 1.0) * 255.0)) / 255.0f;
        for (std::size_t c = 0; c < 3; ++c) t[c * h * w + i] = q;
    }
    return t;
}

std::string label_name(Label l) { return l == Label::Damage ? "damage" : "no_damage"; }

}  // namespace

Sample generate(const SceneSpec& spec) {
    if (spec.height < 8 || spec.width < 8) throw ConfigError("scene must be at least 8x8");
    if (spec.min_points < 2 || spec.min_points > spec.max_points) throw ConfigError("invalid crack point range");
    std::mt19937_64 rng(spec.seed);
    std::vector<double> img = background(spec, rng);

    Sample s;
    s.mask.assign(spec.height * spec.width, 0);
    if (spec.has_crack) {
        const double n = static_cast<double>(s.mask.size());
        bool ok = false;
        for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
            Crack crack = draw_crack(spec, rng);
            const double cov = static_cast<double>(std::count(crack.mask.begin(), crack.mask.end(), 1)) / n;
            if (cov < spec.min_coverage || cov > spec.max_coverage) continue;
            for (std::size_t i = 0; i < img.size(); ++i)
                if (crack.mask[i]) img[i] -= crack.contrast;
            s.mask = std::move(crack.mask);
            ok = true;
        }
        if (!ok) throw DataError("crack coverage out of bounds after 10 draws (seed " + std::to_string(spec.seed) + ")");
        s.label = Label::Damage;
    }
    s.image = to_image(img, spec.height, spec.width);
    return s;
}

Sample flipped(const Sample& s, bool horizontal) {
    const Shape& sh = s.image.shape();
    Sample out = s;
    out.id += horizontal ? "_hflip" : "_vflip";
    for (std::size_t c = 0; c < sh.c; ++c)
        for (std::size_t y = 0; y < sh.h; ++y)
            for (std::size_t x = 0; x < sh.w; ++x) {
                const std::size_t sy = horizontal ? y : sh.h - 1 - y;
                const std::size_t sx = horizontal ? sh.w - 1 - x : x;
                out.image.at(0, c, y, x) = s.image.at(0, c, sy, sx);
                if (c == 0) out.mask[y * sh.w + x] = s.mask[sy * sh.w + sx];
            }
    return out;
}

Dataset make_dataset(std::size_t n_pos, std::size_t n_neg, std::uint64_t seed, std::size_t size) {
    if (n_pos < 5 || n_neg < 5) throw ConfigError("need at least 5 images per class");
    Dataset d;
    std::mt19937_64 rng(mix_seed(seed, 0xfeed));
    auto make_class = [&](std::size_t count, bool crack, std::size_t id_offset) {
        std::vector<Sample> samples;
        for (std::size_t i = 0; i < count; ++i) {
            SceneSpec spec;
            spec.seed = mix_seed(seed, id_offset + i);
            spec.height = spec.width = size;
            spec.has_crack = crack;
            Sample s = generate(spec);
            char id[32];
            std::snprintf(id, sizeof id, "img%05zu", id_offset + i);
            s.id = id;
            samples.push_back(std::move(s));
        }
        std::shuffle(samples.begin(), samples.end(), rng);
        const std::size_t n_val = count / 5;
        const std::size_t n_test = count / 5;
        for (std::size_t i = 0; i < count; ++i) {
            if (i < n_val) {
                d.val.push_back(samples[i]);
                d.val.push_back(flipped(samples[i], true));
                d.val.push_back(flipped(samples[i], false));
            } else if (i < n_val + n_test) {
                d.test.push_back(samples[i]);
                d.test.push_back(flipped(samples[i], true));
                d.test.push_back(flipped(samples[i], false));
            } else {
                d.train.push_back(std::move(samples[i]));
            }
        }
    };
    make_class(n_pos, true, 0);
    make_class(n_neg, false, n_pos);
    return d;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "masks");
    std::ostringstream csv;
    csv << "id,path,label,split\n";
    auto emit = [&](const std::vector<Sample>& split, const char* name) {
        for (const auto& s : split) {
            const std::string rel = "images/" + s.id + ".png";
            write_image_png(dir / rel, s.image);
            write_mask_png(dir / "masks" / (s.id + ".png"), s.image.shape().h, s.image.shape().w, s.mask);
            csv << s.id << ',' << rel << ',' << label_name(s.label) << ',' << name << '\n';
        }
    };
    emit(data.train, "train");
    emit(data.val, "val");
    emit(data.test, "test");
    write_text_atomic(dir / "manifest.csv", csv.str());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) throw FormatError("cannot open dataset manifest '" + csv.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("id,path,label,split", 0) != 0) {
        throw FormatError("'" + csv.string() + "' lacks the header id,path,label,split");
    }
    std::vector<ManifestRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 4) throw FormatError("manifest line " + std::to_string(line_no) + " needs 4 fields");
        ManifestRow r{f[0], f[1], Label::NoDamage, f[3]};
        if (f[2] == "damage") r.label = Label::Damage;
        else if (f[2] != "no_damage") throw FormatError("manifest line " + std::to_string(line_no) + ": bad label '" + f[2] + "'");
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<Sample> read_split(const std::filesystem::path& dir, const std::string& split) {
    std::vector<Sample> out;
    for (const auto& row : read_manifest(dir / "manifest.csv")) {
        if (!split.empty() && row.split != split) continue;
        Sample s;
        s.id = row.id;
        s.label = row.label;
        s.image = read_png(dir / row.path);
        const auto mask_path = dir / "masks" / (row.id + ".png");
        if (std::filesystem::exists(mask_path)) s.mask = read_mask_png(mask_path);
        else s.mask.assign(s.image.shape().plane(), 0);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace lrpseg
