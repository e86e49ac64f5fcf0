#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedskel/engine.hpp"
#include "fedskel/model.hpp"

namespace fedskel {

struct ClientSnapshot {
    std::uint64_t id = 0;
    double ratio = 1.0;
    bool has_mask = false;
    ChannelMask mask;
};

struct Checkpoint {
    Model model;
    ParamSet global;
    std::vector<ClientSnapshot> clients;
};

// Binary container: "FSKL" magic, format version, layer table, little-endian
// float32 tensors for every global-scope trainable layer, then per-client
// skeleton bitsets.
void save_checkpoint(const std::string& path, const Model& model, const ParamSet& global,
                     const std::vector<ClientSnapshot>& clients);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace fedskel
