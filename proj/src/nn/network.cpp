#include "feddtg/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "feddtg/error.hpp"
#include "feddtg/simd/kernels.hpp"

namespace feddtg::nn {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::identity: return "identity";
    }
    return "identity";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "identity") return Activation::identity;
    throw ParameterError("unknown activation '" + s + "'");
}

NetworkSpec NetworkSpec::mlp(std::span<const std::size_t> widths, Activation hidden, Activation output,
                             OutputHead head) {
    if (widths.size() < 2) throw ParameterError("an MLP needs at least input and output widths");
    NetworkSpec spec;
    spec.head = head;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = i + 2 == widths.size();
        spec.layers.push_back({widths[i], widths[i + 1], last ? output : hidden});
    }
    spec.validate();
    return spec;
}

void NetworkSpec::validate() const {
    if (layers.empty()) throw ParameterError("network spec has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].in == 0 || layers[i].out == 0) throw ParameterError("layer width must be positive");
        if (i > 0 && layers[i].in != layers[i - 1].out) {
            throw DimensionError("layer " + std::to_string(i) + " input width", layers[i - 1].out, layers[i].in);
        }
    }
}

std::size_t NetworkSpec::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.out * l.in + l.out;
    return n;
}

ParamLayout ParamLayout::of(const NetworkSpec& spec) {
    ParamLayout layout;
    std::size_t offset = 0;
    for (const auto& l : spec.layers) {
        LayerSlot slot{offset, l.out, l.in, offset + l.out * l.in};
        offset = slot.bias_offset + l.out;
        layout.slots.push_back(slot);
    }
    layout.total = offset;
    return layout;
}

void check_layout(const NetworkSpec& spec, const ParamLayout& layout) {
    const ParamLayout expected = ParamLayout::of(spec);
    if (expected.total != layout.total) throw DimensionError("parameter count", expected.total, layout.total);
    if (expected.slots != layout.slots) {
        throw DimensionError("parameter layout layer count", expected.slots.size(), layout.slots.size());
    }
}

ParamVector init_params(const NetworkSpec& spec, Rng& rng) {
    spec.validate();
    ParamVector p = ParamVector::zeros(spec);
    for (const auto& slot : p.layout.slots) {
        const double limit = std::sqrt(6.0 / static_cast<double>(slot.rows + slot.cols));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (std::size_t i = 0; i < slot.rows * slot.cols; ++i) p.values[slot.weight_offset + i] = dist(rng);
    }
    return p;
}

namespace {

void apply_activation(Activation a, std::vector<double>& v) {
    switch (a) {
        case Activation::relu:
            for (double& x : v) x = x > 0.0 ? x : 0.0;
            break;
        case Activation::tanh:
            for (double& x : v) x = std::tanh(x);
            break;
        case Activation::sigmoid:
            for (double& x : v) x = 1.0 / (1.0 + std::exp(-x));
            break;
        case Activation::identity:
            break;
    }
}

// Multiplies grad in place by the activation derivative, expressed through the activation output.
void apply_activation_grad(Activation a, const std::vector<double>& out, std::vector<double>& grad) {
    switch (a) {
        case Activation::relu:
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = out[i] > 0.0 ? grad[i] : 0.0;
            break;
        case Activation::tanh:
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= 1.0 - out[i] * out[i];
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= out[i] * (1.0 - out[i]);
            break;
        case Activation::identity:
            break;
    }
}

void check_input(const NetworkSpec& spec, const ParamLayout& layout, const Tensor& input) {
    spec.validate();
    check_layout(spec, layout);
    if (input.cols() != spec.input_width()) {
        throw DimensionError("network input width", spec.input_width(), input.cols());
    }
}

Tensor dense_forward(const LayerSpec& layer, const LayerSlot& slot, const std::vector<double>& params,
                     const Tensor& x) {
    const auto& k = simd::active_kernels();
    Tensor y(x.rows(), layer.out);
    const double* bias = params.data() + slot.bias_offset;
    for (std::size_t r = 0; r < y.rows(); ++r) std::copy_n(bias, layer.out, y.row(r).begin());
    if (x.rows() > 0) {
        k.gemm_nt(x.rows(), layer.out, layer.in, x.data().data(), params.data() + slot.weight_offset,
                  y.data().data());
    }
    apply_activation(layer.activation, y.data());
    return y;
}

}  // namespace

Tensor forward(const NetworkSpec& spec, const ParamVector& params, const Tensor& input) {
    check_input(spec, params.layout, input);
    Tensor x = input;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        x = dense_forward(spec.layers[i], params.layout.slots[i], params.values, x);
    }
    return x;
}

ForwardTrace forward_trace(const NetworkSpec& spec, const ParamVector& params, const Tensor& input) {
    check_input(spec, params.layout, input);
    ForwardTrace trace;
    trace.outputs.reserve(spec.layers.size() + 1);
    trace.outputs.push_back(input);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        trace.outputs.push_back(dense_forward(spec.layers[i], params.layout.slots[i], params.values,
                                              trace.outputs.back()));
    }
    return trace;
}

BackwardResult backward_trace(const NetworkSpec& spec, const ParamVector& params, const ForwardTrace& trace,
                              const Tensor& upstream, bool want_input_grad) {
    check_layout(spec, params.layout);
    if (trace.outputs.size() != spec.layers.size() + 1) {
        throw DimensionError("forward trace length", spec.layers.size() + 1, trace.outputs.size());
    }
    const Tensor& out = trace.result();
    if (upstream.rows() != out.rows()) throw DimensionError("upstream gradient rows", out.rows(), upstream.rows());
    if (upstream.cols() != out.cols()) throw DimensionError("upstream gradient cols", out.cols(), upstream.cols());

    const auto& k = simd::active_kernels();
    BackwardResult result{Gradients(params.layout, std::vector<double>(params.layout.total, 0.0)), Tensor()};
    const std::size_t batch = upstream.rows();
    Tensor grad = upstream;
    for (std::size_t li = spec.layers.size(); li-- > 0;) {
        const LayerSpec& layer = spec.layers[li];
        const LayerSlot& slot = params.layout.slots[li];
        apply_activation_grad(layer.activation, trace.outputs[li + 1].data(), grad.data());

        const Tensor& x = trace.outputs[li];
        double* gw = result.grads.values.data() + slot.weight_offset;
        double* gb = result.grads.values.data() + slot.bias_offset;
        if (batch > 0) {
            k.gemm_tn(layer.out, layer.in, batch, grad.data().data(), x.data().data(), gw);
            for (std::size_t r = 0; r < batch; ++r) k.axpy(layer.out, 1.0, grad.row(r).data(), gb);
        }
        if (li > 0 || want_input_grad) {
            Tensor gx(batch, layer.in);
            if (batch > 0) {
                k.gemm_nn(batch, layer.in, layer.out, grad.data().data(), params.values.data() + slot.weight_offset,
                          gx.data().data());
            }
            grad = std::move(gx);
        }
    }
    if (want_input_grad) result.input_grad = std::move(grad);
    return result;
}

Gradients backward(const NetworkSpec& spec, const ParamVector& params, const Tensor& input,
                   const Tensor& upstream) {
    return backward_trace(spec, params, forward_trace(spec, params, input), upstream, false).grads;
}

}  // namespace feddtg::nn
