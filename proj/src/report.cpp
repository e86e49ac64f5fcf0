#include "fedskel/report.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "fedskel/metrics.hpp"

namespace fedskel {

RunSummary read_summary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read summary " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("summary " + path + " is not valid JSON: " + e.what());
    }
    const std::string schema = j.value("schema", "");
    if (schema != kSummarySchema) {
        throw std::runtime_error("summary " + path + " has schema '" + schema +
                                 "', expected '" + kSummarySchema + "'");
    }
    RunSummary s;
    s.name = j.value("name", "");
    s.mode = j.value("mode", "");
    s.rounds = j.value("rounds", std::uint64_t(0));
    s.final_local_acc = j.value("final_local_acc", 0.0);
    s.final_new_acc = j.value("final_new_acc", 0.0);
    s.params_total = j.value("params_total", std::uint64_t(0));
    s.params_baseline = j.value("params_baseline", std::uint64_t(0));
    s.comm_reduction = j.value("comm_reduction", 0.0);
    s.backprop_ratio = j.value("backprop_ratio", 1.0);
    return s;
}

std::string render_report_csv(const std::vector<RunSummary>& runs) {
    if (runs.empty()) throw std::invalid_argument("report needs at least one summary");
    std::string out = "name,mode,rounds,local_acc,new_acc,params_total,comm_reduction,"
                      "backprop_ratio\n";
    char buf[256];
    for (const RunSummary& r : runs) {
        std::snprintf(buf, sizeof buf, ",%llu,%.4f,%.4f,%llu,%.4f,%.4f\n",
                      (unsigned long long)r.rounds, r.final_local_acc, r.final_new_acc,
                      (unsigned long long)r.params_total, r.comm_reduction, r.backprop_ratio);
        out += r.name + "," + r.mode + buf;
    }
    return out;
}

std::string render_report_text(const std::vector<RunSummary>& runs) {
    if (runs.empty()) throw std::invalid_argument("report needs at least one summary");
    std::size_t name_w = 4;
    for (const RunSummary& r : runs) name_w = std::max(name_w, r.name.size());
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-*s  %-7s  %6s  %9s  %7s  %12s  %9s  %8s\n", int(name_w),
                  "name", "mode", "rounds", "local", "new", "params", "comm.red", "bp.ratio");
    std::string out = buf;
    for (const RunSummary& r : runs) {
        std::snprintf(buf, sizeof buf, "%-*s  %-7s  %6llu  %8.4f%%  %6.4f%%  %12llu  %8.2f%%  %8.4f\n",
                      int(name_w), r.name.c_str(), r.mode.c_str(), (unsigned long long)r.rounds,
                      100.0 * r.final_local_acc, 100.0 * r.final_new_acc,
                      (unsigned long long)r.params_total, 100.0 * r.comm_reduction,
                      r.backprop_ratio);
        out += buf;
    }
    return out;
}

}  // namespace fedskel
