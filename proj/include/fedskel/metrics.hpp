#pragma once

#include <string>

#include "fedskel/config.hpp"
#include "fedskel/federation.hpp"

namespace fedskel {

inline constexpr const char* kMetricsSchema = "fedskel-metrics-v1";
inline constexpr const char* kSummarySchema = "fedskel-summary-v1";
inline constexpr const char* kBenchSchema = "fedskel-bench-v1";

// One row per round; accuracy cells are empty on rounds without evaluation.
void write_metrics_csv(const std::string& path, const ExperimentResult& result);

// Final accuracies, communication and compute totals, and their reductions
// against the all-full baseline of the same plan.
void write_summary_json(const std::string& path, const ExperimentConfig& cfg,
                        const ExperimentResult& result);

}  // namespace fedskel
