#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedskel/model.hpp"

namespace fedskel {

struct BenchRow {
    double ratio = 1.0;
    double convback_mean_s = 0.0;
    double convback_std_s = 0.0;
    double convback_speedup = 1.0;
    double overall_mean_s = 0.0;
    double overall_std_s = 0.0;
    double overall_speedup = 1.0;
    bool unstable = false;
    double ref_backprop = 0.0;  // published back-prop speedup, x86 testbed; 0 when none
    double ref_overall = 0.0;   // published whole-step speedup, ARM testbed; 0 when none
};

struct BenchResult {
    std::vector<BenchRow> rows;
    double dense_convback_mean_s = 0.0;
    double dense_overall_mean_s = 0.0;
    std::size_t reps = 0;
    std::size_t warmups = 0;
    std::size_t batch = 0;
};

// Times the backward pass of the conv stack (and a whole train step) with
// skeleton masks at each ratio against the dense baseline, on one resident
// random batch. Single-threaded by design.
BenchResult run_bench(const Model& model, std::uint64_t seed, std::size_t batch,
                      std::size_t warmups, std::size_t reps,
                      const std::vector<double>& ratios = {1.0, 0.4, 0.3, 0.2, 0.1});

void write_bench_csv(const std::string& path, const BenchResult& result);

}  // namespace fedskel
