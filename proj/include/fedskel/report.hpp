#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedskel {

struct RunSummary {
    std::string name;
    std::string mode;
    std::uint64_t rounds = 0;
    double final_local_acc = 0.0;
    double final_new_acc = 0.0;
    std::uint64_t params_total = 0;
    std::uint64_t params_baseline = 0;
    double comm_reduction = 0.0;
    double backprop_ratio = 1.0;
};

RunSummary read_summary(const std::string& path);

// Merges runs into one table; no recomputation, rendering only.
std::string render_report_csv(const std::vector<RunSummary>& runs);
std::string render_report_text(const std::vector<RunSummary>& runs);

}  // namespace fedskel
