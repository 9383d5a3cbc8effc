#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <sstream>

#include "lrpseg/error.hpp"
#include "lrpseg/image_io.hpp"
#include "lrpseg/io_util.hpp"
#include "lrpseg/lrp.hpp"
#include "lrpseg/metrics.hpp"
#include "lrpseg/parallel.hpp"
#include "lrpseg/segmentation.hpp"
#include "lrpseg/synthetic.hpp"
#include "lrpseg/trainer.hpp"
#include "lrpseg/weights.hpp"

namespace fs = std::filesystem;

namespace lrpseg::cli {

namespace {

// Files with the given extension: a file argument is taken as is, a directory
// contributes its matching entries in name order.
std::vector<fs::path> expand(const std::vector<std::string>& inputs, const std::string& ext) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(in))
                if (e.is_regular_file() && e.path().extension() == ext) found.push_back(e.path());
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.emplace_back(in);
        }
    }
    return out;
}

struct Item {
    std::string id;
    Tensor4 image;
    std::optional<Label> label;
};

struct ImageSource {
    std::vector<std::string> images;
    std::string data;
    std::string split = "test";

    void add_to(CLI::App* cmd) {
        cmd->add_option("--image", images, "PNG file or directory of PNGs (repeatable)")->check(CLI::ExistingPath);
        cmd->add_option("--data", data, "dataset directory written by gen-data")->check(CLI::ExistingDirectory);
        cmd->add_option("--split", split, "dataset split used with --data ('' for all)")->capture_default_str();
    }

    std::vector<Item> load() const {
        if (images.empty() == data.empty()) throw ConfigError("give exactly one of --image or --data");
        std::vector<Item> items;
        if (!data.empty()) {
            for (auto& s : read_split(data, split)) items.push_back({s.id, std::move(s.image), s.label});
        } else {
            for (const auto& p : expand(images, ".png")) items.push_back({p.stem().string(), read_png(p), {}});
        }
        if (items.empty()) throw DataError("no input images found");
        return items;
    }
};

Network load_network(const std::string& path) {
    WeightContainer w = load_weights(path);
    Architecture arch = Architecture::make(parse_variant(w.manifest.variant));
    return Network(std::move(arch), std::move(w));
}

std::size_t parse_class(const std::string& name) {
    if (name == "damage") return 0;
    if (name == "no_damage") return 1;
    throw ConfigError("--class must be 'damage' or 'no_damage', got '" + name + "'");
}

std::string num(double v) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s.precision(9);
    s << v;
    return s.str();
}

// ---- subcommands -----------------------------------------------------------

struct GenData {
    std::string out;
    std::uint64_t seed = 1;
    std::size_t n_pos = 100, n_neg = 100, size = 64;

    int run(std::ostream& os) const {
        const Dataset d = make_dataset(n_pos, n_neg, seed, size);
        write_dataset(out, d);
        os << "wrote " << d.train.size() << " train, " << d.val.size() << " val, " << d.test.size()
           << " test images to " << out << "\n";
        return kOk;
    }
};

struct TrainToy {
    std::string data, out, csv;
    TrainConfig cfg = TrainConfig::toy();

    int run(std::ostream& os) const {
        auto to_labeled = [](std::vector<Sample> samples) {
            std::vector<LabeledImage> v;
            for (auto& s : samples) v.push_back({std::move(s.image), s.label});
            return v;
        };
        const auto train_set = to_labeled(read_split(data, "train"));
        const auto val_set = to_labeled(read_split(data, "val"));
        if (train_set.empty() || val_set.empty()) throw DataError("dataset needs nonempty train and val splits");
        const TrainResult r = train(Architecture::toy(), train_set, val_set, cfg, [&](const EpochLog& e) {
            os << "epoch " << e.epoch << " loss " << num(e.loss) << " val_ba " << num(e.balanced_accuracy) << "\n";
        });
        save_weights(r.weights, out);
        if (!csv.empty()) write_text_atomic(csv, training_log_csv(r.log));
        os << "wrote " << out << "\n";
        return kOk;
    }
};

struct Classify {
    ImageSource src;
    std::string weights, csv;

    int run(std::ostream& os) const {
        const Network net = load_network(weights);
        const auto items = src.load();
        std::vector<Classification> results(items.size());
        parallel_for(items.size(), [&](std::size_t i) { results[i] = classify(forward(net, items[i].image)); });

        std::ostringstream table;
        table << "id,predicted,logit_damage,logit_no_damage,label\n";
        std::vector<Label> truth, predicted;
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& r = results[i];
            table << items[i].id << ',' << to_string(r.label) << ',' << num(r.logits[0]) << ',' << num(r.logits[1])
                  << ',' << (items[i].label ? to_string(*items[i].label) : "") << '\n';
            if (items[i].label) {
                truth.push_back(*items[i].label);
                predicted.push_back(r.label);
            }
        }
        if (!csv.empty()) write_text_atomic(csv, table.str());
        else os << table.str();

        const auto damage = std::count_if(results.begin(), results.end(),
                                          [](const Classification& c) { return c.label == Label::Damage; });
        os << items.size() << " images, " << damage << " classified damage\n";
        const bool both = std::count(truth.begin(), truth.end(), Label::Damage) > 0 &&
                          std::count(truth.begin(), truth.end(), Label::NoDamage) > 0;
        if (both) {
            const BinaryRates br = balanced_accuracy(truth, predicted);
            os << "balanced accuracy " << num(br.balanced) << " (tpr " << num(br.tpr) << ", tnr " << num(br.tnr)
               << ")\n";
        }
        return kOk;
    }
};

struct Explain {
    ImageSource src;
    std::string weights, rules = "ours", cls = "damage", out, csv;

    int run(std::ostream& os) const {
        const Network net = load_network(weights);
        const RuleAssignment assignment = RuleAssignment::resolve(rules, net.architecture());
        const std::size_t target = parse_class(cls);
        const auto items = src.load();

        // A single image with a .png --out names the heatmap; otherwise --out is a directory.
        const bool single_file = items.size() == 1 && fs::path(out).extension() == ".png";
        if (!single_file) fs::create_directories(out);

        std::vector<RelevanceMap> maps(items.size());
        std::vector<std::array<float, 2>> logits(items.size());
        parallel_for(items.size(), [&](std::size_t i) {
            const ForwardTrace trace = forward(net, items[i].image);
            RelevanceMap map = propagate(trace, net, assignment, target);
            map.image_id = items[i].id;
            fs::path heat = single_file ? fs::path(out) : fs::path(out) / (items[i].id + "_heatmap.png");
            fs::path dump = single_file ? fs::path(out).replace_extension(".f32") : fs::path(out) / (items[i].id + ".f32");
            write_heatmap_png(heat, map);
            write_float_map(dump, map);
            logits[i] = trace.logits;
            maps[i] = std::move(map);
        });

        std::ostringstream table;
        table << "id,target,logit_damage,logit_no_damage,relevance_sum\n";
        for (std::size_t i = 0; i < items.size(); ++i) {
            table << items[i].id << ',' << cls << ',' << num(logits[i][0]) << ',' << num(logits[i][1]) << ','
                  << num(maps[i].sum()) << '\n';
        }
        if (!csv.empty()) write_text_atomic(csv, table.str());
        os << "explained " << items.size() << " images with rules '" << rules << "'\n";
        return kOk;
    }
};

struct Segment {
    std::vector<std::string> maps;
    std::string method = "bmm", out, csv;
    std::uint64_t seed = 0;

    int run(std::ostream& os) const {
        const SegmentationMethod m = parse_method(method);
        const auto paths = expand(maps, ".f32");
        if (paths.empty()) throw DataError("no relevance maps (.f32) found");
        fs::create_directories(out);

        std::vector<SegmentationMask> masks(paths.size());
        parallel_for(paths.size(), [&](std::size_t i) {
            const RelevanceMap map = read_float_map(paths[i]);
            const std::string id = paths[i].stem().string();
            SegmentationMask s = segment(map, m, seed);
            write_mask_png(fs::path(out) / (id + "_mask.png"), s.height, s.width, s.mask);
            if (s.score) {
                RelevanceMap score(s.height, s.width);
                score.values = *s.score;
                write_float_map(fs::path(out) / (id + "_score.f32"), score);
                write_score_png(fs::path(out) / (id + "_score.png"), score);
            }
            masks[i] = std::move(s);
        });

        std::ostringstream table;
        table << "id,method,status,damage_pixels,message\n";
        std::size_t warnings = 0;
        for (std::size_t i = 0; i < paths.size(); ++i) {
            const auto& s = masks[i];
            const bool warn = s.status == SegmentationStatus::Warning;
            warnings += warn;
            std::string msg = s.message;
            std::replace(msg.begin(), msg.end(), ',', ';');
            table << paths[i].stem().string() << ',' << method << ',' << (warn ? "warning" : "ok") << ','
                  << s.count() << ',' << msg << '\n';
        }
        if (!csv.empty()) write_text_atomic(csv, table.str());
        os << "segmented " << paths.size() << " maps with " << method << " (" << warnings << " warnings)\n";
        return kOk;
    }
};

struct Evaluate {
    std::string pred, truth, csv, pr, relevance;

    int run(std::ostream& os) const {
        // Predictions are <id>_mask.png as written by segment; bare <id>.png is accepted too.
        std::vector<std::pair<std::string, fs::path>> preds;
        for (const auto& p : expand({pred}, ".png")) {
            std::string stem = p.stem().string();
            if (stem.ends_with("_score")) continue;
            if (stem.ends_with("_mask")) stem.resize(stem.size() - 5);
            preds.emplace_back(stem, p);
        }
        if (preds.empty()) throw DataError("no predicted masks in '" + pred + "'");

        std::vector<MetricRow> rows;
        std::vector<std::vector<std::uint8_t>> truths;
        for (const auto& [id, path] : preds) {
            const fs::path t = fs::path(truth) / (id + ".png");
            if (!fs::exists(t)) throw FormatError("no truth mask '" + t.string() + "' for prediction '" + id + "'");
            std::size_t ph = 0, pw = 0, th = 0, tw = 0;
            const auto p = read_mask_png(path, &ph, &pw);
            auto tm = read_mask_png(t, &th, &tw);
            if (ph != th || pw != tw) throw ShapeError("prediction and truth dims differ for '" + id + "'");
            rows.push_back({id, confusion(p, tm)});
            truths.push_back(std::move(tm));
        }
        const std::string table = metrics_csv(rows);
        if (!csv.empty()) write_text_atomic(csv, table);
        os << summary_table(rows);

        if (!pr.empty()) {
            // Scores: the posterior dumps next to the masks, or min-max mapped raw relevance.
            std::vector<std::vector<float>> scores;
            for (const auto& [id, path] : preds) {
                if (relevance.empty()) {
                    scores.push_back(read_float_map(fs::path(pred) / (id + "_score.f32")).values);
                } else {
                    scores.push_back(raw_lrp_scores(read_float_map(fs::path(relevance) / (id + ".f32"))).values);
                }
            }
            const PrCurve curve = pr_curve(scores, truths);
            write_text_atomic(pr, pr_curve_csv(curve));
            os << "pr curve: " << curve.points.size() << " points, no-skill precision "
               << num(curve.no_skill_precision) << (curve.saturated ? ", saturated" : "") << "\n";
        }
        return kOk;
    }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Weakly supervised damage segmentation from layer-wise relevance propagation", "lrpseg"};
    app.require_subcommand(1);

    GenData gen;
    auto* c_gen = app.add_subcommand("gen-data", "Generate a synthetic crack dataset");
    c_gen->add_option("--out", gen.out, "output directory")->required();
    c_gen->add_option("--seed", gen.seed)->capture_default_str();
    c_gen->add_option("--n-pos", gen.n_pos, "damage images")->capture_default_str();
    c_gen->add_option("--n-neg", gen.n_neg, "damage-free images")->capture_default_str();
    c_gen->add_option("--size", gen.size, "image side in pixels")->capture_default_str();

    TrainToy tt;
    auto* c_train = app.add_subcommand("train-toy", "Train the toy network from image labels");
    c_train->add_option("--data", tt.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    c_train->add_option("--out", tt.out, "weight file to write")->required();
    c_train->add_option("--csv", tt.csv, "per-epoch log");
    c_train->add_option("--seed", tt.cfg.seed)->capture_default_str();
    c_train->add_option("--epochs", tt.cfg.epochs)->capture_default_str();
    c_train->add_option("--batch", tt.cfg.batch_size)->capture_default_str();
    c_train->add_option("--lr-head", tt.cfg.learning_rate_head)->capture_default_str();
    c_train->add_option("--lr-conv", tt.cfg.learning_rate_conv)->capture_default_str();

    Classify cl;
    auto* c_cls = app.add_subcommand("classify", "Classify images");
    c_cls->add_option("--weights", cl.weights)->required()->check(CLI::ExistingFile);
    cl.src.add_to(c_cls);
    c_cls->add_option("--csv", cl.csv, "per-image predictions (default: stdout)");

    Explain ex;
    auto* c_ex = app.add_subcommand("explain", "Compute relevance heatmaps");
    c_ex->add_option("--weights", ex.weights)->required()->check(CLI::ExistingFile);
    ex.src.add_to(c_ex);
    c_ex->add_option("--rules", ex.rules, "ours, montavon or a rule file")->capture_default_str();
    c_ex->add_option("--class", ex.cls, "damage or no_damage")->capture_default_str();
    c_ex->add_option("--out", ex.out, "output directory, or heatmap .png for a single image")->required();
    c_ex->add_option("--csv", ex.csv, "per-image logits and relevance sums");

    Segment sg;
    auto* c_seg = app.add_subcommand("segment", "Turn relevance maps into masks");
    c_seg->add_option("--map", sg.maps, ".f32 relevance map or directory (repeatable)")
        ->required()
        ->check(CLI::ExistingPath);
    c_seg->add_option("--method", sg.method)->check(CLI::IsMember({"simple", "gmm", "bmm"}))->capture_default_str();
    c_seg->add_option("--seed", sg.seed)->capture_default_str();
    c_seg->add_option("--out", sg.out, "output directory")->required();
    c_seg->add_option("--csv", sg.csv, "per-map status");

    Evaluate ev;
    auto* c_ev = app.add_subcommand("evaluate", "Score masks against truth masks");
    c_ev->add_option("--pred", ev.pred, "directory of predicted masks")->required()->check(CLI::ExistingDirectory);
    c_ev->add_option("--truth", ev.truth, "directory of truth masks <id>.png")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_ev->add_option("--csv", ev.csv, "per-image metrics with a summary row");
    c_ev->add_option("--pr", ev.pr, "write the pooled precision-recall curve");
    c_ev->add_option("--relevance", ev.relevance, "raw relevance .f32 directory to score the PR curve")
        ->check(CLI::ExistingDirectory);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        const auto subs = app.get_subcommands();
        err << "run 'lrpseg " << (subs.empty() ? "" : subs.front()->get_name() + " ") << "--help' for usage\n";
        return kUsageError;
    }

    try {
        if (*c_gen) return gen.run(out);
        if (*c_train) return tt.run(out);
        if (*c_cls) return cl.run(out);
        if (*c_ex) return ex.run(out);
        if (*c_seg) return sg.run(out);
        if (*c_ev) return ev.run(out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kDomainError;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kDomainError;
    }
    return kUsageError;
}

}  // namespace lrpseg::cli
