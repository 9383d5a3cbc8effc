#pragma once

#include <span>
#include <utility>
#include <vector>

#include "lrpseg/network.hpp"
#include "lrpseg/relevance_map.hpp"
#include "lrpseg/rules.hpp"

namespace lrpseg {

// Denominators with |z| below this get sign(z) * kStabilizer added.
inline constexpr double kStabilizer = 1e-9;

// Relevance of the output layer: the target logit on the target neuron, 0 elsewhere.
Tensor4 init_relevance(const ForwardTrace& trace, std::size_t target);

// Redistributes `relevance` (one value per output neuron) onto the layer inputs.
//
//   R_i = sum_j a_i rho(w_ij) / (eps_j + sum_i' a_i' rho(w_i'j) + rho(b_j)) * R_j
//
// rho is the identity for Zero/Epsilon and w + gamma * max(w, 0) for Gamma.
// Epsilon uses eps_j = epsilon_scale * std(z) * sign(z_j) over the layer's
// pre-activations z. AlphaBeta weighs positive and negative contribution
// shares by alpha and -beta; when a neuron has contributions of one sign
// only, that side carries alpha - beta so the neuron still conserves R_j.
std::vector<float> lrp_linear(std::span<const float> activations, const Matrix& weights,
                              std::span<const float> bias, std::span<const float> relevance, const RuleConfig& cfg);

// The same rules with convolutional weight sharing.
Tensor4 lrp_conv(const Tensor4& activations, const ConvParams& params, const Tensor4& relevance,
                 const RuleConfig& cfg);

// Winner-take-all routing through the recorded argmax positions.
Tensor4 lrp_pool(const PoolIndices& indices, const Tensor4& relevance);

// Pixel-layer rule with per-channel input box [lower, upper]:
// contributions x*w - l*max(w,0) - h*min(w,0), normalized per output neuron.
// Bias does not take part.
Tensor4 lrp_zb(const Tensor4& input, const ConvParams& params, std::span<const std::pair<float, float>> bounds,
               const Tensor4& relevance);

struct RelevanceTrace {
    // relevance[i] has the shape of trace.inputs[i]; relevance.back() is the starting relevance.
    std::vector<Tensor4> relevance;
    RelevanceMap map;
};

RelevanceTrace propagate_layers(const ForwardTrace& trace, const Network& net, const RuleAssignment& assignment,
                                std::size_t target);

// Channel-summed pixel relevance for class `target`.
RelevanceMap propagate(const ForwardTrace& trace, const Network& net, const RuleAssignment& assignment,
                       std::size_t target);

}  // namespace lrpseg
