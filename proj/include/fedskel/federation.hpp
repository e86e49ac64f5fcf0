#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedskel/config.hpp"
#include "fedskel/data.hpp"
#include "fedskel/engine.hpp"
#include "fedskel/model.hpp"
#include "fedskel/skeleton.hpp"

namespace fedskel {

struct ClientState {
    std::size_t id = 0;
    double capability = 1.0;
    double ratio = 1.0;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> holdout_idx;
    ParamSet params;  // full topology; local-scope entries never leave the client
    ImportanceTable importance;
    ChannelMask mask;
    bool has_mask = false;
};

struct ServerState {
    ParamSet global;  // local-scope entries present but never read
    std::size_t round = 0;
};

struct DirTotals {
    std::uint64_t setskel = 0;
    std::uint64_t updateskel = 0;
    std::uint64_t total() const { return setskel + updateskel; }
};

// Parameter counts that crossed the wire, split by round kind and direction,
// plus the analytic all-full baseline for the identical plan.
struct CommLedger {
    DirTotals up, down;
    std::vector<DirTotals> client_up, client_down;
    std::uint64_t baseline = 0;  // both directions, every exchange full

    void ensure(std::size_t clients);
    std::uint64_t total() const { return up.total() + down.total(); }
    double reduction() const {
        return baseline == 0 ? 0.0 : 1.0 - double(total()) / double(baseline);
    }
};

enum class RoundKind { Full, Skeleton };

const char* round_kind_name(RoundKind k);

struct RoundPlan {
    std::size_t cycles = 1;
    std::size_t updateskel_per_cycle = 0;  // k
    double participation = 0.1;
    std::size_t epochs = 1;
    std::size_t batch = 10;
    double lr = 0.05;
    bool fedavg_mode = false;  // every round dense, no masks ever
    std::uint64_t seed = 1;

    std::size_t total_rounds() const { return cycles * (1 + updateskel_per_cycle); }
    RoundKind kind_of(std::size_t round) const {
        if (fedavg_mode) return RoundKind::Full;
        return round % (1 + updateskel_per_cycle) == 0 ? RoundKind::Full : RoundKind::Skeleton;
    }
};

struct RoundResult {
    RoundKind kind = RoundKind::Full;
    std::size_t participants = 0;
    double mean_loss = 0.0;
    std::uint64_t params_up = 0;
    std::uint64_t params_down = 0;
    std::uint64_t backprop_macs = 0;
    std::uint64_t dense_macs = 0;  // same samples, all-true mask
};

// r_i = clamp(c_i / c_max, r_min, 1); the fastest client trains in full.
std::vector<double> set_ratios(const std::vector<double>& capabilities, double r_min);

// Weighted elementwise mean over every trainable entry.
ParamSet fedavg_aggregate(const Model& model,
                          const std::vector<std::pair<const ParamSet*, double>>& updates);

// Per-filter aggregation: each filter slot averages over the participants
// whose mask covers it (weights renormalized over that subset); slots nobody
// covers keep their previous global value. Non-prunable global layers average
// over all participants.
struct MaskedUpdate {
    const ParamSet* params = nullptr;
    const ChannelMask* mask = nullptr;
    double weight = 0.0;
};
ParamSet partial_aggregate(const Model& model, const ParamSet& global,
                           const std::vector<MaskedUpdate>& updates);

// One dense round: participants sync the full global-scope state, train with
// every channel active (accumulating importance unless the plan is plain
// FedAvg), upload in full, and pick their skeletons from the fresh importance
// table.
RoundResult run_setskel_round(const Model& model, ServerState& server,
                              std::vector<ClientState>& clients, const Dataset& data,
                              const RoundPlan& plan, std::size_t round, CommLedger& ledger,
                              std::size_t threads);

// One skeleton round: only mask-holding clients are eligible; they exchange
// and train nothing but their skeleton channels.
RoundResult run_updateskel_round(const Model& model, ServerState& server,
                                 std::vector<ClientState>& clients, const Dataset& data,
                                 const RoundPlan& plan, std::size_t round, CommLedger& ledger,
                                 std::size_t threads);

struct EvalResult {
    double local_acc = 0.0;  // mean over clients, each on its own holdout + head
    double new_acc = 0.0;    // global body + averaged heads on the shared test set
};

EvalResult evaluate(const Model& model, const ParamSet& global,
                    const std::vector<ClientState>& clients, const Dataset& train,
                    const Dataset& test, std::size_t threads);

struct RoundRecord {
    std::size_t round = 0;
    RoundKind kind = RoundKind::Full;
    std::size_t participants = 0;
    double mean_loss = 0.0;
    bool evaluated = false;
    double local_acc = 0.0;
    double new_acc = 0.0;
    std::uint64_t params_up = 0;
    std::uint64_t params_down = 0;
    std::uint64_t backprop_macs = 0;
};

struct ExperimentResult {
    std::vector<RoundRecord> rounds;
    CommLedger ledger;
    std::uint64_t backprop_macs = 0;
    std::uint64_t dense_macs = 0;
    double final_local_acc = 0.0;
    double final_new_acc = 0.0;
    std::size_t global_params = 0;
    std::size_t dropped_examples = 0;
    ParamSet final_global;
    std::vector<ClientState> final_clients;
};

// Full protocol run over the configured plan. Deterministic for a fixed seed
// regardless of the thread count.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t threads);

// Shared plumbing, exposed for the harness and tests.
Tensor make_batch(const Dataset& ds, const std::vector<std::size_t>& idx, std::size_t from,
                  std::size_t count, std::vector<int>& labels_out);
std::vector<ClientState> make_clients(const Model& model, const ParamSet& init,
                                      const Dataset& train, const ExperimentConfig& cfg);
Dataset build_train_dataset(const ExperimentConfig& cfg);
Dataset build_test_dataset(const ExperimentConfig& cfg);

}  // namespace fedskel
