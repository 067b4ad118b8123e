#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "feddtg/nn/tensor.hpp"
#include "feddtg/rng.hpp"

namespace feddtg::nn {

enum class Activation { relu, tanh, sigmoid, identity };
enum class OutputHead { logits, probability };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation activation = Activation::identity;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// A stack of dense layers.
struct NetworkSpec {
    std::vector<LayerSpec> layers;
    OutputHead head = OutputHead::logits;

    /// widths = {in, h1, ..., out}; hidden layers use `hidden`, the last uses `output`.
    static NetworkSpec mlp(std::span<const std::size_t> widths, Activation hidden, Activation output,
                           OutputHead head);

    /// Throws DimensionError/ParameterError when widths do not chain or the stack is empty.
    void validate() const;

    std::size_t input_width() const { return layers.front().in; }
    std::size_t output_width() const { return layers.back().out; }
    std::size_t param_count() const;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Where one layer lives inside a flat parameter vector. Weights are stored
/// row-major as (out x in), followed by the bias of length out.
struct LayerSlot {
    std::size_t weight_offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t bias_offset = 0;

    friend bool operator==(const LayerSlot&, const LayerSlot&) = default;
};

struct ParamLayout {
    std::vector<LayerSlot> slots;
    std::size_t total = 0;

    static ParamLayout of(const NetworkSpec& spec);

    friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

namespace detail {
struct ParamTag {};
struct GradTag {};
}  // namespace detail

/// Flat, layout-tagged weights of one network. The tag keeps parameters and
/// gradients from being mixed up at compile time.
template <typename Tag>
struct FlatVector {
    ParamLayout layout;
    std::vector<double> values;

    FlatVector() = default;
    FlatVector(ParamLayout l, std::vector<double> v) : layout(std::move(l)), values(std::move(v)) {}

    static FlatVector zeros(const NetworkSpec& spec) {
        ParamLayout l = ParamLayout::of(spec);
        std::vector<double> v(l.total, 0.0);
        return {std::move(l), std::move(v)};
    }

    std::size_t size() const noexcept { return values.size(); }

    friend bool operator==(const FlatVector&, const FlatVector&) = default;
};

using ParamVector = FlatVector<detail::ParamTag>;
using Gradients = FlatVector<detail::GradTag>;

/// Throws DimensionError unless params were laid out for spec.
void check_layout(const NetworkSpec& spec, const ParamLayout& layout);

/// Glorot-uniform weights and zero biases.
ParamVector init_params(const NetworkSpec& spec, Rng& rng);

Tensor forward(const NetworkSpec& spec, const ParamVector& params, const Tensor& input);

/// Per-layer activations kept for the backward pass; outputs[0] is the input.
struct ForwardTrace {
    std::vector<Tensor> outputs;

    const Tensor& result() const { return outputs.back(); }
};

ForwardTrace forward_trace(const NetworkSpec& spec, const ParamVector& params, const Tensor& input);

struct BackwardResult {
    Gradients grads;
    Tensor input_grad;  // empty unless requested
};

BackwardResult backward_trace(const NetworkSpec& spec, const ParamVector& params, const ForwardTrace& trace,
                              const Tensor& upstream, bool want_input_grad);

/// Parameter gradient of <upstream, forward(input)>.
Gradients backward(const NetworkSpec& spec, const ParamVector& params, const Tensor& input,
                   const Tensor& upstream);

}  // namespace feddtg::nn
