#include "fedskel/engine.hpp"

namespace fedskel {

std::size_t ChannelMask::kept(std::size_t layer) const {
    if (!has(layer)) return 0;
    std::size_t n = 0;
    for (std::uint8_t v : channels[layer])
        if (v) ++n;
    return n;
}

ChannelMask ChannelMask::all_true(const Model& model) {
    ChannelMask m;
    m.channels.resize(model.size());
    for (std::size_t l = 0; l < model.size(); ++l) {
        if (model.prunable(l)) {
            m.channels[l].assign(model.filter_count(l), std::uint8_t(1));
        }
    }
    return m;
}

void validate_mask(const Model& model, const ChannelMask& mask) {
    if (mask.channels.size() != model.size()) {
        throw std::invalid_argument("mask covers " + std::to_string(mask.channels.size()) +
                                    " layers, model has " + std::to_string(model.size()));
    }
    for (std::size_t l = 0; l < model.size(); ++l) {
        const auto& entry = mask.channels[l];
        if (!model.prunable(l)) {
            if (!entry.empty()) {
                throw std::invalid_argument("mask entry on non-prunable " + model.layer_label(l));
            }
            continue;
        }
        const std::size_t f = model.filter_count(l);
        if (entry.size() != f) {
            throw std::invalid_argument("mask entry for " + model.layer_label(l) + " has " +
                                        std::to_string(entry.size()) + " channels, expected " +
                                        std::to_string(f));
        }
        std::size_t kept = 0;
        for (std::uint8_t v : entry)
            if (v) ++kept;
        if (kept == 0) {
            throw std::invalid_argument("mask drops every channel of " + model.layer_label(l));
        }
    }
}

std::vector<std::uint64_t> count_backprop_flops_by_layer(const Model& model,
                                                         const ChannelMask& mask) {
    validate_mask(model, mask);
    std::vector<std::uint64_t> counts(model.size(), 0);
    const std::size_t first_tr = model.first_trainable();
    for (std::size_t l : model.trainable_indices()) {
        const LayerSpec& spec = model.layer(l);
        const Shape3 in = model.input_shape_of(l);
        const std::uint64_t s = model.prunable(l) && mask.has(l)
                                    ? std::uint64_t(mask.kept(l))
                                    : std::uint64_t(model.filter_count(l));
        if (spec.kind == LayerKind::Conv2D) {
            const ConvGeom g =
                conv_geometry(in.c, in.h, in.w, spec.kernel, spec.kernel, spec.stride, spec.pad);
            const std::uint64_t hw = std::uint64_t(g.out_h) * g.out_w;
            counts[l] = s * std::uint64_t(g.k) * hw;                       // weight gradients
            if (l != first_tr) counts[l] += std::uint64_t(g.k) * s * hw;   // input gradients
        } else {
            const std::uint64_t fan = in.numel();
            counts[l] = s * fan;
            if (l != first_tr) counts[l] += s * fan;
        }
    }
    return counts;
}

std::uint64_t count_backprop_flops(const Model& model, const ChannelMask& mask) {
    std::uint64_t total = 0;
    for (std::uint64_t v : count_backprop_flops_by_layer(model, mask)) total += v;
    return total;
}

}  // namespace fedskel
