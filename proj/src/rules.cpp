#include "lrpseg/rules.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "lrpseg/error.hpp"

namespace lrpseg {

std::string to_string(RuleKind r) {
    switch (r) {
        case RuleKind::Zero: return "zero";
        case RuleKind::Epsilon: return "epsilon";
        case RuleKind::Gamma: return "gamma";
        case RuleKind::AlphaBeta: return "alpha_beta";
        case RuleKind::ZB: return "zb";
    }
    return "unknown";
}

void RuleConfig::check() const {
    if (rule == RuleKind::Epsilon && !(epsilon_scale > 0.0)) throw ConfigError("epsilon scale must be > 0");
    if (rule == RuleKind::Gamma && !(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
    if (rule == RuleKind::AlphaBeta && std::abs(alpha - beta - 1.0) > 1e-9) {
        throw ConfigError("alpha-beta rule requires alpha - beta = 1");
    }
}

namespace {

const std::set<std::string> kOursAlphaBeta{"conv2_1", "conv3_1"};
const std::set<std::string> kOursGamma{"conv3_2", "conv4_1", "conv4_2", "conv5_1", "conv5_2"};
const std::set<std::string> kMontavonGamma{"conv2_1", "conv3_1", "conv3_2"};
const std::set<std::string> kMontavonEpsilon{"conv4_1", "conv4_2", "conv5_1", "conv5_2"};

RuleAssignment from_table(const Architecture& arch, const std::set<std::string>& first_set, RuleConfig first_rule,
                          const std::set<std::string>& second_set, RuleConfig second_rule, RuleConfig fc_rule) {
    RuleAssignment a;
    const std::size_t first = arch.first_conv();
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const auto& l = arch.layers[i];
        if (!l.parameterized()) continue;
        if (i == first) {
            a.rules[l.name] = RuleConfig::zb();
        } else if (l.kind == LayerKind::Linear) {
            a.rules[l.name] = fc_rule;
        } else if (first_set.count(l.name)) {
            a.rules[l.name] = first_rule;
        } else if (second_set.count(l.name)) {
            a.rules[l.name] = second_rule;
        } else {
            throw ConfigError("preset has no rule for layer '" + l.name + "'");
        }
    }
    return a;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& value, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": '" + key + "' needs a number, got '" + value + "'");
    }
}

}  // namespace

RuleAssignment RuleAssignment::ours(const Architecture& arch) {
    return from_table(arch, kOursAlphaBeta, RuleConfig::alpha_beta(2.0, 1.0), kOursGamma, RuleConfig::gamma_rule(0.25),
                      RuleConfig::epsilon(0.25));
}

RuleAssignment RuleAssignment::montavon(const Architecture& arch) {
    return from_table(arch, kMontavonGamma, RuleConfig::gamma_rule(0.25), kMontavonEpsilon, RuleConfig::epsilon(0.25),
                      RuleConfig::zero());
}

RuleAssignment RuleAssignment::uniform(const Architecture& arch, RuleConfig cfg) {
    RuleAssignment a;
    const std::size_t first = arch.first_conv();
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        if (!arch.layers[i].parameterized()) continue;
        a.rules[arch.layers[i].name] = i == first ? RuleConfig::zb() : cfg;
    }
    return a;
}

RuleAssignment RuleAssignment::resolve(const std::string& spec, const Architecture& arch) {
    RuleAssignment a;
    if (spec == "ours") {
        a = ours(arch);
    } else if (spec == "montavon") {
        a = montavon(arch);
    } else {
        std::ifstream in(spec);
        if (!in) throw ConfigError("rules must be 'ours', 'montavon' or a readable rule file, got '" + spec + "'");
        std::ostringstream text;
        text << in.rdbuf();
        a = parse(text.str());
    }
    a.validate(arch);
    return a;
}

RuleAssignment RuleAssignment::parse(const std::string& text) {
    RuleAssignment a;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'layer: rule [key=value ...]'");
        }
        const std::string layer = trim(line.substr(0, colon));
        std::istringstream rest(line.substr(colon + 1));
        std::string rule_name;
        rest >> rule_name;
        RuleConfig cfg;
        if (rule_name == "zero" || rule_name == "0") cfg = RuleConfig::zero();
        else if (rule_name == "epsilon") cfg = RuleConfig::epsilon();
        else if (rule_name == "gamma") cfg = RuleConfig::gamma_rule();
        else if (rule_name == "alpha_beta") cfg = RuleConfig::alpha_beta();
        else if (rule_name == "zb") cfg = RuleConfig::zb();
        else throw ConfigError("line " + std::to_string(line_no) + ": unknown rule '" + rule_name + "'");

        std::string kv;
        while (rest >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
            const std::string key = kv.substr(0, eq);
            const double v = parse_number(key, kv.substr(eq + 1), line_no);
            if (key == "scale") cfg.epsilon_scale = v;
            else if (key == "gamma") cfg.gamma = v;
            else if (key == "alpha") cfg.alpha = v;
            else if (key == "beta") cfg.beta = v;
            else throw ConfigError("line " + std::to_string(line_no) + ": unknown parameter '" + key + "'");
        }
        if (layer.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty layer name");
        if (a.rules.count(layer)) throw ConfigError("layer '" + layer + "' assigned twice");
        cfg.check();
        a.rules[layer] = cfg;
    }
    return a;
}

std::string RuleAssignment::to_text() const {
    std::ostringstream os;
    os.precision(17);
    for (const auto& [layer, cfg] : rules) {
        os << layer << ": " << to_string(cfg.rule);
        switch (cfg.rule) {
            case RuleKind::Epsilon: os << " scale=" << cfg.epsilon_scale; break;
            case RuleKind::Gamma: os << " gamma=" << cfg.gamma; break;
            case RuleKind::AlphaBeta: os << " alpha=" << cfg.alpha << " beta=" << cfg.beta; break;
            default: break;
        }
        os << '\n';
    }
    return os.str();
}

void RuleAssignment::validate(const Architecture& arch) const {
    const std::size_t first = arch.first_conv();
    std::set<std::string> names;
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const auto& l = arch.layers[i];
        if (!l.parameterized()) continue;
        names.insert(l.name);
        const auto it = rules.find(l.name);
        if (it == rules.end()) throw ConfigError("no LRP rule assigned to layer '" + l.name + "'");
        it->second.check();
        if (i == first && it->second.rule != RuleKind::ZB) {
            throw ConfigError("first layer '" + l.name + "' must use the zb rule");
        }
        if (i != first && it->second.rule == RuleKind::ZB) {
            throw ConfigError("zb rule is only valid on the first layer, not '" + l.name + "'");
        }
    }
    for (const auto& [layer, cfg] : rules) {
        if (!names.count(layer)) throw ConfigError("rule assigned to unknown layer '" + layer + "'");
    }
}

const RuleConfig& RuleAssignment::at(const std::string& layer) const {
    const auto it = rules.find(layer);
    if (it == rules.end()) throw ConfigError("no LRP rule assigned to layer '" + layer + "'");
    return it->second;
}

}  // namespace lrpseg
