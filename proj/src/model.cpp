#include "fedskel/model.hpp"

#include <cmath>
#include <stdexcept>

#include "fedskel/rng.hpp"

namespace fedskel {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv2D: return "conv2d";
        case LayerKind::FullyConnected: return "fc";
        case LayerKind::ReLU: return "relu";
        case LayerKind::MaxPool2D: return "maxpool2d";
        case LayerKind::SoftmaxCrossEntropy: return "softmax_xent";
    }
    return "?";
}

LayerSpec LayerSpec::conv2d(std::size_t filters, std::size_t kernel, std::size_t stride,
                            std::size_t pad, Scope scope) {
    LayerSpec s;
    s.kind = LayerKind::Conv2D;
    s.filters = filters;
    s.kernel = kernel;
    s.stride = stride;
    s.pad = pad;
    s.scope = scope;
    return s;
}

LayerSpec LayerSpec::fully_connected(std::size_t units, Scope scope) {
    LayerSpec s;
    s.kind = LayerKind::FullyConnected;
    s.units = units;
    s.scope = scope;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::ReLU;
    return s;
}

LayerSpec LayerSpec::maxpool2d(std::size_t pool, std::size_t stride) {
    LayerSpec s;
    s.kind = LayerKind::MaxPool2D;
    s.pool = pool;
    s.pool_stride = stride;
    return s;
}

LayerSpec LayerSpec::softmax_cross_entropy() {
    LayerSpec s;
    s.kind = LayerKind::SoftmaxCrossEntropy;
    return s;
}

std::string Model::layer_label(std::size_t layer) const {
    return "layer " + std::to_string(layer) + " (" + layer_kind_name(layers_[layer].kind) + ")";
}

Model::Model(Shape3 input, std::vector<LayerSpec> layers)
    : input_(input), layers_(std::move(layers)) {
    if (input_.numel() == 0) throw std::invalid_argument("model input shape has zero extent");
    if (layers_.empty()) throw std::invalid_argument("model has no layers");

    out_shapes_.resize(layers_.size());
    Shape3 cur = input_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const LayerSpec& spec = layers_[l];
        const bool is_loss = spec.kind == LayerKind::SoftmaxCrossEntropy;
        if (is_loss != (l + 1 == layers_.size())) {
            throw std::invalid_argument("model must have exactly one loss layer, last in the list; " +
                                        layer_label(l) + " violates this");
        }
        switch (spec.kind) {
            case LayerKind::Conv2D: {
                if (spec.filters == 0) throw std::invalid_argument(layer_label(l) + ": zero filters");
                if (cur.h == 0 || cur.w == 0) {
                    throw std::invalid_argument(layer_label(l) + ": expects spatial input, got " +
                                                shape_string({cur.c, cur.h, cur.w}));
                }
                ConvGeom g;
                try {
                    g = conv_geometry(cur.c, cur.h, cur.w, spec.kernel, spec.kernel, spec.stride, spec.pad);
                } catch (const std::invalid_argument& e) {
                    throw std::invalid_argument(layer_label(l) + ": " + e.what());
                }
                cur = Shape3{spec.filters, g.out_h, g.out_w};
                break;
            }
            case LayerKind::FullyConnected: {
                if (spec.units == 0) throw std::invalid_argument(layer_label(l) + ": zero units");
                cur = Shape3{spec.units, 1, 1};
                break;
            }
            case LayerKind::ReLU:
                break;
            case LayerKind::MaxPool2D: {
                if (spec.pool == 0 || spec.pool_stride == 0) {
                    throw std::invalid_argument(layer_label(l) + ": pool window and stride must be positive");
                }
                if (cur.h < spec.pool || cur.w < spec.pool ||
                    (cur.h - spec.pool) % spec.pool_stride != 0 ||
                    (cur.w - spec.pool) % spec.pool_stride != 0) {
                    throw std::invalid_argument(layer_label(l) + ": window " + std::to_string(spec.pool) +
                                                "/stride " + std::to_string(spec.pool_stride) +
                                                " does not tile input " +
                                                shape_string({cur.c, cur.h, cur.w}));
                }
                cur = Shape3{cur.c, (cur.h - spec.pool) / spec.pool_stride + 1,
                             (cur.w - spec.pool) / spec.pool_stride + 1};
                break;
            }
            case LayerKind::SoftmaxCrossEntropy: {
                classes_ = cur.numel();
                if (classes_ < 2) {
                    throw std::invalid_argument(layer_label(l) + ": needs at least 2 logits, got " +
                                                std::to_string(classes_));
                }
                cur = Shape3{classes_, 1, 1};
                break;
            }
        }
        out_shapes_[l] = cur;
        if (trainable(l)) trainable_.push_back(l);
    }
    if (layers_.back().kind != LayerKind::SoftmaxCrossEntropy) {
        throw std::invalid_argument("model must end with the loss layer");
    }
    if (!trainable_.empty()) {
        first_trainable_ = trainable_.front();
        last_trainable_ = trainable_.back();
    } else {
        first_trainable_ = last_trainable_ = layers_.size();
    }
}

Shape3 Model::input_shape_of(std::size_t layer) const {
    return layer == 0 ? input_ : out_shapes_[layer - 1];
}

bool Model::trainable(std::size_t layer) const {
    const LayerKind k = layers_[layer].kind;
    return k == LayerKind::Conv2D || k == LayerKind::FullyConnected;
}

bool Model::prunable(std::size_t layer) const {
    if (!trainable(layer)) return false;
    if (layer == last_trainable_) return false;  // pruning classifier rows would silence classes
    if (layers_[layer].scope == Scope::Local) return false;
    return true;
}

std::size_t Model::filter_count(std::size_t layer) const {
    const LayerSpec& spec = layers_[layer];
    if (spec.kind == LayerKind::Conv2D) return spec.filters;
    if (spec.kind == LayerKind::FullyConnected) return spec.units;
    throw std::invalid_argument(layer_label(layer) + " has no filters");
}

std::size_t Model::fan_in(std::size_t layer) const {
    const LayerSpec& spec = layers_[layer];
    const Shape3 in = input_shape_of(layer);
    if (spec.kind == LayerKind::Conv2D) return in.c * spec.kernel * spec.kernel;
    if (spec.kind == LayerKind::FullyConnected) return in.numel();
    throw std::invalid_argument(layer_label(layer) + " has no weights");
}

std::size_t Model::layer_param_count(std::size_t layer) const {
    return filter_count(layer) * (fan_in(layer) + 1);
}

std::size_t Model::total_param_count() const {
    std::size_t n = 0;
    for (std::size_t l : trainable_) n += layer_param_count(l);
    return n;
}

std::size_t Model::global_param_count() const {
    std::size_t n = 0;
    for (std::size_t l : trainable_) {
        if (layers_[l].scope == Scope::Global) n += layer_param_count(l);
    }
    return n;
}

ParamSet init_params(const Model& model, std::uint64_t seed) {
    ParamSet p = zero_params<float>(model);
    for (std::size_t l : model.trainable_indices()) {
        auto rng = keyed_rng(seed, RngStream::ParamInit, {l});
        const float limit = std::sqrt(6.0f / static_cast<float>(model.fan_in(l)));
        std::uniform_real_distribution<float> dist(-limit, limit);
        for (float& v : p.entries[l].w.data) v = dist(rng);
    }
    return p;
}

Model make_lenet5(bool local_classifier) {
    const Scope head = local_classifier ? Scope::Local : Scope::Global;
    return Model(Shape3{1, 28, 28},
                 {LayerSpec::conv2d(6, 5, 1, 2), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
                  LayerSpec::conv2d(16, 5, 1, 0), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
                  LayerSpec::fully_connected(120), LayerSpec::relu(),
                  LayerSpec::fully_connected(84), LayerSpec::relu(),
                  LayerSpec::fully_connected(10, head), LayerSpec::softmax_cross_entropy()});
}

Model make_lenet_caffe(bool local_classifier) {
    const Scope head = local_classifier ? Scope::Local : Scope::Global;
    return Model(Shape3{1, 28, 28},
                 {LayerSpec::conv2d(20, 5, 1, 0), LayerSpec::maxpool2d(2, 2),
                  LayerSpec::conv2d(50, 5, 1, 0), LayerSpec::maxpool2d(2, 2),
                  LayerSpec::fully_connected(500), LayerSpec::relu(),
                  LayerSpec::fully_connected(10, head), LayerSpec::softmax_cross_entropy()});
}

Model make_toy_convnet(std::size_t image_size, std::size_t classes, bool local_classifier) {
    const Scope head = local_classifier ? Scope::Local : Scope::Global;
    return Model(Shape3{1, image_size, image_size},
                 {LayerSpec::conv2d(4, 3, 1, 1), LayerSpec::relu(),
                  LayerSpec::conv2d(8, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
                  LayerSpec::fully_connected(classes, head), LayerSpec::softmax_cross_entropy()});
}

}  // namespace fedskel
