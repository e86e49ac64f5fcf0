#include "fedskel/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedskel {

ImportanceTable make_importance_table(const Model& model) {
    ImportanceTable t;
    t.sums.resize(model.size());
    for (std::size_t l = 0; l < model.size(); ++l) {
        if (model.prunable(l)) t.sums[l].assign(model.filter_count(l), 0.0);
    }
    return t;
}

void accumulate_importance(const Model& model, const ActivationCache& cache,
                           ImportanceTable& table) {
    if (!cache.valid() || cache.outputs.size() != model.size()) {
        throw std::invalid_argument("importance accumulation needs a completed forward pass");
    }
    if (table.sums.size() != model.size()) {
        throw std::invalid_argument("importance table does not match model layer count");
    }
    const std::size_t n = cache.batch_n;
    for (std::size_t l = 0; l < model.size(); ++l) {
        if (!model.prunable(l)) continue;
        const std::size_t src =
            (l + 1 < model.size() && model.layer(l + 1).kind == LayerKind::ReLU) ? l + 1 : l;
        const Tensor& act = cache.outputs[src];
        const std::size_t f = model.filter_count(l);
        if (table.sums[l].size() != f) {
            throw std::invalid_argument("importance row for " + model.layer_label(l) +
                                        " has wrong length");
        }
        const std::size_t chan = act.numel() / (n * f);  // spatial extent per channel
        const float* ap = act.ptr();
        for (std::size_t c = 0; c < f; ++c) {
            double acc = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                const float* plane = ap + (b * f + c) * chan;
                for (std::size_t p = 0; p < chan; ++p) acc += std::abs(double(plane[p]));
            }
            table.sums[l][c] += acc / double(n * chan);
        }
    }
    table.samples += n;
}

ChannelMask select_skeleton(const Model& model, const ImportanceTable& table, double ratio) {
    if (!(ratio > 0.0) || ratio > 1.0) {
        throw std::invalid_argument("skeleton ratio must lie in (0,1], got " +
                                    std::to_string(ratio));
    }
    if (table.samples == 0) {
        throw std::invalid_argument("skeleton selection before any importance accumulation");
    }
    if (table.sums.size() != model.size()) {
        throw std::invalid_argument("importance table does not match model layer count");
    }
    ChannelMask mask;
    mask.channels.resize(model.size());
    for (std::size_t l = 0; l < model.size(); ++l) {
        if (!model.prunable(l)) continue;
        const std::vector<double>& row = table.sums[l];
        const std::size_t f = model.filter_count(l);
        if (row.size() != f) {
            throw std::invalid_argument("importance row for " + model.layer_label(l) +
                                        " has wrong length");
        }
        // Plain ceil(ratio * f) picks up one channel too many when the product
        // lands a hair above an integer (0.1 * 20 evaluates to 2.0000...04),
        // so nudge below before rounding up.
        const std::size_t want = std::max<std::size_t>(
            1, std::size_t(std::ceil(ratio * double(f) - 1e-9)));
        std::vector<std::size_t> order(f);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&row](std::size_t a, std::size_t b) { return row[a] > row[b]; });
        std::vector<std::uint8_t> bits(f, 0);
        for (std::size_t i = 0; i < want && i < f; ++i) bits[order[i]] = 1;
        mask.channels[l] = std::move(bits);
    }
    return mask;
}

std::size_t skeleton_param_count(const Model& model, const ChannelMask& mask) {
    validate_mask(model, mask);
    std::size_t total = 0;
    for (std::size_t l : model.trainable_indices()) {
        if (model.layer(l).scope == Scope::Local) continue;
        if (model.prunable(l)) {
            total += mask.kept(l) * (model.fan_in(l) + 1);
        } else {
            total += model.layer_param_count(l);
        }
    }
    return total;
}

}  // namespace fedskel
