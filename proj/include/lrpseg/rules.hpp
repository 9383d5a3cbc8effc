#pragma once

#include <map>
#include <string>

#include "lrpseg/network.hpp"

namespace lrpseg {

enum class RuleKind { Zero, Epsilon, Gamma, AlphaBeta, ZB };

std::string to_string(RuleKind r);

struct RuleConfig {
    RuleKind rule = RuleKind::Zero;
    double epsilon_scale = 0.25;  // stabilizer = epsilon_scale * std(z)
    double gamma = 0.25;
    double alpha = 2.0;
    double beta = 1.0;

    static RuleConfig zero() { return {RuleKind::Zero}; }
    static RuleConfig epsilon(double scale = 0.25) { return {RuleKind::Epsilon, scale}; }
    static RuleConfig gamma_rule(double g = 0.25) { return {RuleKind::Gamma, 0.25, g}; }
    static RuleConfig alpha_beta(double a = 2.0, double b = 1.0) { return {RuleKind::AlphaBeta, 0.25, 0.25, a, b}; }
    static RuleConfig zb() { return {RuleKind::ZB}; }

    // Throws ConfigError unless epsilon_scale > 0, gamma >= 0 and alpha - beta = 1.
    void check() const;

    friend bool operator==(const RuleConfig&, const RuleConfig&) = default;
};

// Layer name -> rule. Presets follow the two VGG-A rule sets compared in the
// weakly supervised segmentation experiments:
//
//   rule    ours                  montavon
//   z^B     conv1_1               conv1_1
//   a-b     conv2_1, conv3_1      -
//   gamma   conv3_2 .. conv5_2    conv2_1 .. conv3_2
//   eps     FC                    conv4_1 .. conv5_2
//   0       -                     FC
class RuleAssignment {
public:
    std::map<std::string, RuleConfig> rules;

    static RuleAssignment ours(const Architecture& arch);
    static RuleAssignment montavon(const Architecture& arch);
    // Same rule on every parameterized layer, z^B on the first conv.
    static RuleAssignment uniform(const Architecture& arch, RuleConfig cfg);

    // "ours", "montavon", or a rule-config file path.
    static RuleAssignment resolve(const std::string& spec, const Architecture& arch);

    // One "layer: rule key=value ..." line per entry; '#' starts a comment.
    static RuleAssignment parse(const std::string& text);
    std::string to_text() const;

    // Every parameterized layer assigned, z^B on the first conv and nowhere
    // else, no unknown layer names, each config valid.
    void validate(const Architecture& arch) const;

    const RuleConfig& at(const std::string& layer) const;
};

}  // namespace lrpseg
