#pragma once

#include <cstdint>
#include <vector>

#include "fedskel/engine.hpp"
#include "fedskel/model.hpp"

namespace fedskel {

// Accumulated per-channel activation magnitudes, used to rank filters when a
// client picks its skeleton. One row per model layer; only prunable layers
// carry a non-empty row.
struct ImportanceTable {
    std::vector<std::vector<double>> sums;
    std::uint64_t samples = 0;

    void reset() {
        for (auto& row : sums) row.assign(row.size(), 0.0);
        samples = 0;
    }
};

ImportanceTable make_importance_table(const Model& model);

// Adds the batch/spatial mean of |post-activation output| per channel. When a
// prunable layer is directly followed by a ReLU the rectified values are used,
// otherwise the layer's own output.
void accumulate_importance(const Model& model, const ActivationCache& cache,
                           ImportanceTable& table);

// Keeps the top max(1, ceil(r * F_l)) channels of every prunable layer, ties
// going to the lower channel index.
ChannelMask select_skeleton(const Model& model, const ImportanceTable& table, double ratio);

// Scalars exchanged with the server under this mask: selected filters carry
// their full fan-in plus bias, non-prunable global layers count fully, local
// layers count zero.
std::size_t skeleton_param_count(const Model& model, const ChannelMask& mask);

}  // namespace fedskel
