#pragma once

// Network topology: ordered layer specs with shape inference, plus the
// parameter container shared by clients and server. Topology is identical
// everywhere; only parameter values differ.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fedskel/tensor.hpp"

namespace fedskel {

enum class LayerKind : std::uint8_t {
    Conv2D = 0,
    FullyConnected = 1,
    ReLU = 2,
    MaxPool2D = 3,
    SoftmaxCrossEntropy = 4,
};

// Global layers are exchanged with the server; local layers stay on the
// client (personalized head) and never enter any upload or download.
enum class Scope : std::uint8_t { Global = 0, Local = 1 };

const char* layer_kind_name(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    Scope scope = Scope::Global;
    std::size_t filters = 0;      // Conv2D
    std::size_t kernel = 0;       // Conv2D (square)
    std::size_t stride = 1;       // Conv2D
    std::size_t pad = 0;          // Conv2D
    std::size_t units = 0;        // FullyConnected
    std::size_t pool = 0;         // MaxPool2D window (square)
    std::size_t pool_stride = 0;  // MaxPool2D

    bool trainable() const {
        return kind == LayerKind::Conv2D || kind == LayerKind::FullyConnected;
    }

    static LayerSpec conv2d(std::size_t filters, std::size_t kernel, std::size_t stride = 1,
                            std::size_t pad = 0, Scope scope = Scope::Global);
    static LayerSpec fully_connected(std::size_t units, Scope scope = Scope::Global);
    static LayerSpec relu();
    static LayerSpec maxpool2d(std::size_t pool, std::size_t stride);
    static LayerSpec softmax_cross_entropy();
};

struct Shape3 {
    std::size_t c = 0, h = 0, w = 0;
    std::size_t numel() const { return c * h * w; }
    bool operator==(const Shape3&) const = default;
    std::string str() const {
        return "[" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w) + "]";
    }
};

// Validated topology. Layer shapes are composed once at construction; any
// mismatch is rejected naming the offending layer.
class Model {
  public:
    Model(Shape3 input, std::vector<LayerSpec> layers);

    const std::vector<LayerSpec>& layers() const { return layers_; }
    const LayerSpec& layer(std::size_t i) const { return layers_[i]; }
    std::size_t size() const { return layers_.size(); }

    Shape3 input_shape() const { return input_; }
    Shape3 input_shape_of(std::size_t layer) const;
    Shape3 output_shape_of(std::size_t layer) const { return out_shapes_[layer]; }
    std::size_t classes() const { return classes_; }

    bool trainable(std::size_t layer) const;
    // Output channels of conv layers and units of hidden FC layers may be
    // pruned; the final classifier and local-scope layers never are.
    bool prunable(std::size_t layer) const;
    std::size_t last_trainable() const { return last_trainable_; }
    std::size_t first_trainable() const { return first_trainable_; }
    const std::vector<std::size_t>& trainable_indices() const { return trainable_; }

    // F_l: output filters (conv) or units (fc) of a trainable layer.
    std::size_t filter_count(std::size_t layer) const;
    // Weights per filter: C*Kh*Kw for conv, input features for fc.
    std::size_t fan_in(std::size_t layer) const;
    // Weight + bias scalars of one trainable layer.
    std::size_t layer_param_count(std::size_t layer) const;
    std::size_t total_param_count() const;
    std::size_t global_param_count() const;

    std::string layer_label(std::size_t layer) const;

  private:
    Shape3 input_;
    std::vector<LayerSpec> layers_;
    std::vector<Shape3> out_shapes_;
    std::vector<std::size_t> trainable_;
    std::size_t first_trainable_ = 0;
    std::size_t last_trainable_ = 0;
    std::size_t classes_ = 0;
};

template <typename T>
struct ParamSetT {
    struct Entry {
        TensorT<T> w;  // Conv: [F,C,Kh,Kw]; FC: [out,in]
        TensorT<T> b;  // [F] or [out]
    };
    std::vector<Entry> entries;  // indexed by model layer; empty for non-trainable

    template <typename U>
    ParamSetT<U> cast() const {
        ParamSetT<U> out;
        out.entries.resize(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            out.entries[i].w = entries[i].w.template cast<U>();
            out.entries[i].b = entries[i].b.template cast<U>();
        }
        return out;
    }
};

using ParamSet = ParamSetT<float>;
using ParamSetD = ParamSetT<double>;

// Zero-valued parameters with the model's shapes.
template <typename T>
ParamSetT<T> zero_params(const Model& model) {
    ParamSetT<T> p;
    p.entries.resize(model.size());
    for (std::size_t l : model.trainable_indices()) {
        const LayerSpec& spec = model.layer(l);
        const Shape3 in = model.input_shape_of(l);
        if (spec.kind == LayerKind::Conv2D) {
            p.entries[l].w = TensorT<T>({spec.filters, in.c, spec.kernel, spec.kernel});
            p.entries[l].b = TensorT<T>({spec.filters});
        } else {
            p.entries[l].w = TensorT<T>({spec.units, in.numel()});
            p.entries[l].b = TensorT<T>({spec.units});
        }
    }
    return p;
}

// Seeded He-uniform initialization; biases start at zero.
ParamSet init_params(const Model& model, std::uint64_t seed);

// Model presets used by the experiment configs and tests.
Model make_lenet5(bool local_classifier = true);
Model make_lenet_caffe(bool local_classifier = true);
// Small 2-conv/1-fc network for gradient checks and fast protocol tests.
Model make_toy_convnet(std::size_t image_size = 8, std::size_t classes = 4,
                       bool local_classifier = false);

}  // namespace fedskel
