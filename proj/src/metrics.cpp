#include "fedskel/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fedskel {

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

void write_metrics_csv(const std::string& path, const ExperimentResult& result) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# schema: " << kMetricsSchema << "\n";
    out << "round,kind,participants,mean_loss,local_acc,new_acc,params_up,params_down,"
           "backprop_macs\n";
    for (const RoundRecord& r : result.rounds) {
        out << r.round << ',' << round_kind_name(r.kind) << ',' << r.participants << ','
            << fixed6(r.mean_loss) << ',';
        if (r.evaluated) out << fixed6(r.local_acc);
        out << ',';
        if (r.evaluated) out << fixed6(r.new_acc);
        out << ',' << r.params_up << ',' << r.params_down << ',' << r.backprop_macs << '\n';
    }
    if (!out) throw std::runtime_error("short write to " + path);
}

void write_summary_json(const std::string& path, const ExperimentConfig& cfg,
                        const ExperimentResult& result) {
    nlohmann::ordered_json j;
    j["schema"] = kSummarySchema;
    j["name"] = cfg.name;
    j["mode"] = cfg.mode;
    j["seed"] = cfg.seed;
    j["rounds"] = result.rounds.size();
    j["clients"] = cfg.clients;
    j["global_params"] = result.global_params;
    j["dropped_examples"] = result.dropped_examples;
    j["final_local_acc"] = result.final_local_acc;
    j["final_new_acc"] = result.final_new_acc;
    j["params_up"] = result.ledger.up.total();
    j["params_down"] = result.ledger.down.total();
    j["params_total"] = result.ledger.total();
    j["bytes_total"] = 4 * result.ledger.total();
    j["params_baseline"] = result.ledger.baseline;
    j["comm_reduction"] = result.ledger.reduction();
    j["params_up_setskel"] = result.ledger.up.setskel;
    j["params_up_updateskel"] = result.ledger.up.updateskel;
    j["backprop_macs"] = result.backprop_macs;
    j["backprop_macs_dense"] = result.dense_macs;
    j["backprop_ratio"] =
        result.dense_macs == 0 ? 1.0 : double(result.backprop_macs) / double(result.dense_macs);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("short write to " + path);
}

}  // namespace fedskel
