#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedskel/tensor.hpp"

namespace fedskel {

struct Dataset {
    Tensor images;            // [N,C,H,W], values in [0,1]
    std::vector<int> labels;  // length N
    std::size_t classes = 0;

    std::size_t size() const { return labels.size(); }
};

struct Partition {
    std::vector<std::vector<std::size_t>> client_indices;
    std::size_t dropped = 0;  // tail examples beyond the shard grid
};

// Reads an IDX image/label file pair (the MNIST distribution format). Both
// plain and gzip-compressed files are accepted; compression is detected from
// the leading bytes, not the file name.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Writes a dataset back out as a plain IDX pair, quantizing pixels to bytes.
void write_idx(const std::string& images_path, const std::string& labels_path,
               const Dataset& ds);

// Class-conditional Gaussian-bump images: every class gets a fixed arrangement
// of bright blobs, each sample jitters them and adds pixel noise. Deterministic
// per seed and separable enough for convergence tests. index_offset shifts the
// per-sample noise streams, so a test set generated at offset N shares no
// samples with a size-N training set from the same seed.
Dataset make_synthetic(std::size_t classes, std::size_t per_class, std::size_t image_size,
                       std::uint64_t seed, double noise_std = 0.08,
                       std::size_t index_offset = 0);

// Pathological non-IID split: sort by label, cut into n_clients *
// shards_per_client contiguous shards, deal them out with a seeded shuffle.
Partition shard_noniid(const Dataset& ds, std::size_t n_clients, std::size_t shards_per_client,
                       std::uint64_t seed);

}  // namespace fedskel
