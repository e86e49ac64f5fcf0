#include "fedskel/federation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedskel/rng.hpp"
#include "fedskel/threading.hpp"

namespace fedskel {

void CommLedger::ensure(std::size_t clients) {
    client_up.resize(clients);
    client_down.resize(clients);
}

const char* round_kind_name(RoundKind k) {
    return k == RoundKind::Full ? "full" : "skeleton";
}

std::vector<double> set_ratios(const std::vector<double>& capabilities, double r_min) {
    if (capabilities.empty()) throw std::invalid_argument("capability list is empty");
    if (!(r_min > 0.0) || r_min > 1.0) {
        throw std::invalid_argument("r_min must lie in (0,1], got " + std::to_string(r_min));
    }
    double cmax = 0.0;
    for (double c : capabilities) {
        if (!(c > 0.0)) {
            throw std::invalid_argument("capabilities must be positive, got " +
                                        std::to_string(c));
        }
        cmax = std::max(cmax, c);
    }
    std::vector<double> ratios(capabilities.size());
    for (std::size_t i = 0; i < capabilities.size(); ++i) {
        ratios[i] = std::min(1.0, std::max(r_min, capabilities[i] / cmax));
    }
    return ratios;
}

namespace {

// Single shared expression for every aggregation path, so a partial aggregate
// over all-true masks lands on the same bits as a plain federated average.
void weighted_mean(float* dst, const std::vector<const float*>& srcs,
                   const std::vector<double>& weights, std::size_t count) {
    for (std::size_t j = 0; j < count; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < srcs.size(); ++k) acc += weights[k] * double(srcs[k][j]);
        dst[j] = float(acc);
    }
}

std::vector<double> normalized(const std::vector<double>& raw) {
    double sum = 0.0;
    for (double w : raw) sum += w;
    std::vector<double> out(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) out[k] = raw[k] / sum;
    return out;
}

void check_topology(const Model& model, const ParamSet& p, const char* who) {
    if (p.entries.size() != model.size()) {
        throw std::invalid_argument(std::string(who) + " topology mismatch: " +
                                    std::to_string(p.entries.size()) + " layers vs model's " +
                                    std::to_string(model.size()));
    }
    for (std::size_t l : model.trainable_indices()) {
        const Shape3 in = model.input_shape_of(l);
        const std::size_t f = model.filter_count(l);
        const std::size_t fan = model.fan_in(l);
        if (p.entries[l].w.numel() != f * fan || p.entries[l].b.numel() != f) {
            throw std::invalid_argument(std::string(who) + " topology mismatch at " +
                                        model.layer_label(l));
        }
        (void)in;
    }
}

}  // namespace

ParamSet fedavg_aggregate(const Model& model,
                          const std::vector<std::pair<const ParamSet*, double>>& updates) {
    if (updates.empty()) throw std::invalid_argument("federated average of zero updates");
    std::vector<double> raw(updates.size());
    for (std::size_t k = 0; k < updates.size(); ++k) {
        check_topology(model, *updates[k].first, "aggregate update");
        if (!(updates[k].second > 0.0)) {
            throw std::invalid_argument("aggregation weight must be positive, got " +
                                        std::to_string(updates[k].second));
        }
        raw[k] = updates[k].second;
    }
    const std::vector<double> w = normalized(raw);
    ParamSet out = zero_params<float>(model);
    std::vector<const float*> srcs(updates.size());
    for (std::size_t l : model.trainable_indices()) {
        for (std::size_t k = 0; k < updates.size(); ++k)
            srcs[k] = updates[k].first->entries[l].w.ptr();
        weighted_mean(out.entries[l].w.ptr(), srcs, w, out.entries[l].w.numel());
        for (std::size_t k = 0; k < updates.size(); ++k)
            srcs[k] = updates[k].first->entries[l].b.ptr();
        weighted_mean(out.entries[l].b.ptr(), srcs, w, out.entries[l].b.numel());
    }
    return out;
}

ParamSet partial_aggregate(const Model& model, const ParamSet& global,
                           const std::vector<MaskedUpdate>& updates) {
    if (updates.empty()) throw std::invalid_argument("partial aggregation of zero updates");
    check_topology(model, global, "previous global");
    std::vector<double> raw(updates.size());
    for (std::size_t k = 0; k < updates.size(); ++k) {
        check_topology(model, *updates[k].params, "aggregate update");
        validate_mask(model, *updates[k].mask);
        if (!(updates[k].weight > 0.0)) {
            throw std::invalid_argument("aggregation weight must be positive");
        }
        raw[k] = updates[k].weight;
    }
    const std::vector<double> wall = normalized(raw);

    ParamSet out = global;
    std::vector<const float*> srcs;
    std::vector<double> wsub;
    for (std::size_t l : model.trainable_indices()) {
        if (model.layer(l).scope == Scope::Local) continue;
        if (!model.prunable(l)) {
            srcs.resize(updates.size());
            for (std::size_t k = 0; k < updates.size(); ++k)
                srcs[k] = updates[k].params->entries[l].w.ptr();
            weighted_mean(out.entries[l].w.ptr(), srcs, wall, out.entries[l].w.numel());
            for (std::size_t k = 0; k < updates.size(); ++k)
                srcs[k] = updates[k].params->entries[l].b.ptr();
            weighted_mean(out.entries[l].b.ptr(), srcs, wall, out.entries[l].b.numel());
            continue;
        }
        const std::size_t f = model.filter_count(l);
        const std::size_t fan = model.fan_in(l);
        for (std::size_t fi = 0; fi < f; ++fi) {
            srcs.clear();
            std::vector<double> rawsub;
            for (std::size_t k = 0; k < updates.size(); ++k) {
                if (updates[k].mask->channels[l][fi]) {
                    srcs.push_back(updates[k].params->entries[l].w.ptr() + fi * fan);
                    rawsub.push_back(raw[k]);
                }
            }
            if (srcs.empty()) continue;  // nobody trained this filter; keep the old value
            wsub = normalized(rawsub);
            weighted_mean(out.entries[l].w.ptr() + fi * fan, srcs, wsub, fan);
            for (std::size_t k = 0, i = 0; k < updates.size(); ++k) {
                if (updates[k].mask->channels[l][fi])
                    srcs[i++] = updates[k].params->entries[l].b.ptr() + fi;
            }
            weighted_mean(out.entries[l].b.ptr() + fi, srcs, wsub, 1);
        }
    }
    return out;
}

Tensor make_batch(const Dataset& ds, const std::vector<std::size_t>& idx, std::size_t from,
                  std::size_t count, std::vector<int>& labels_out) {
    const std::size_t img = ds.images.numel() / ds.size();
    Tensor batch({count, ds.images.dim(1), ds.images.dim(2), ds.images.dim(3)});
    labels_out.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = idx[from + i];
        std::copy_n(ds.images.ptr() + src * img, img, batch.ptr() + i * img);
        labels_out[i] = ds.labels[src];
    }
    return batch;
}

namespace {

struct LocalTrainResult {
    double loss_sum = 0.0;
    std::uint64_t samples = 0;
};

LocalTrainResult local_train(const Model& model, ClientState& client, const Dataset& data,
                             const ChannelMask& mask, const RoundPlan& plan, std::size_t round,
                             bool track_importance) {
    LocalTrainResult r;
    std::vector<int> labels;
    for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
        std::vector<std::size_t> order = client.train_idx;
        auto rng = keyed_rng(plan.seed, RngStream::BatchShuffle,
                             {std::uint64_t(client.id), std::uint64_t(round),
                              std::uint64_t(epoch)});
        deterministic_shuffle(order, rng);
        for (std::size_t from = 0; from < order.size(); from += plan.batch) {
            const std::size_t count = std::min(plan.batch, order.size() - from);
            const Tensor batch = make_batch(data, order, from, count, labels);
            ActivationCache cache;
            const ForwardResult fwd = forward(model, client.params, batch, labels, cache);
            if (track_importance) accumulate_importance(model, cache, client.importance);
            const ParamSet grads = backward(model, client.params, cache, mask);
            sgd_step(model, client.params, grads, float(plan.lr), mask);
            r.loss_sum += double(fwd.loss) * double(count);
            r.samples += count;
        }
    }
    return r;
}

void copy_entry(const ParamSet& from, ParamSet& to, std::size_t l) {
    to.entries[l].w.data = from.entries[l].w.data;
    to.entries[l].b.data = from.entries[l].b.data;
}

void download_full_global(const Model& model, const ParamSet& global, ParamSet& dst) {
    for (std::size_t l : model.trainable_indices()) {
        if (model.layer(l).scope == Scope::Global) copy_entry(global, dst, l);
    }
}

void download_skeleton(const Model& model, const ParamSet& global, const ChannelMask& mask,
                       ParamSet& dst) {
    for (std::size_t l : model.trainable_indices()) {
        if (model.layer(l).scope != Scope::Global) continue;
        if (!model.prunable(l)) {
            copy_entry(global, dst, l);
            continue;
        }
        const std::size_t fan = model.fan_in(l);
        const std::size_t f = model.filter_count(l);
        for (std::size_t fi = 0; fi < f; ++fi) {
            if (!mask.channels[l][fi]) continue;
            std::copy_n(global.entries[l].w.ptr() + fi * fan, fan,
                        dst.entries[l].w.ptr() + fi * fan);
            dst.entries[l].b.data[fi] = global.entries[l].b.data[fi];
        }
    }
}

ParamSet upload_copy(const Model& model, const ParamSet& params) {
    ParamSet up = params;
    for (std::size_t l : model.trainable_indices()) {
        if (model.layer(l).scope == Scope::Local) {
            up.entries[l].w.data.assign(up.entries[l].w.numel(), 0.0f);
            up.entries[l].b.data.assign(up.entries[l].b.numel(), 0.0f);
        }
    }
    return up;
}

std::vector<std::size_t> sample_participants(const std::vector<std::size_t>& pool,
                                             std::size_t want, const RoundPlan& plan,
                                             std::size_t round) {
    auto rng = keyed_rng(plan.seed, RngStream::ClientSample, {std::uint64_t(round)});
    std::vector<std::size_t> picked = sample_without_replacement(pool, want, rng);
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace

RoundResult run_setskel_round(const Model& model, ServerState& server,
                              std::vector<ClientState>& clients, const Dataset& data,
                              const RoundPlan& plan, std::size_t round, CommLedger& ledger,
                              std::size_t threads) {
    const std::size_t p = std::size_t(plan.participation * double(clients.size()));
    if (p < 1) {
        throw std::invalid_argument("participation " + std::to_string(plan.participation) +
                                    " over " + std::to_string(clients.size()) +
                                    " clients samples no one");
    }
    std::vector<std::size_t> pool(clients.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    const std::vector<std::size_t> picked = sample_participants(pool, p, plan, round);

    const ChannelMask dense = ChannelMask::all_true(model);
    const bool track = !plan.fedavg_mode;
    for (std::size_t id : picked) {
        download_full_global(model, server.global, clients[id].params);
        if (track) {
            if (clients[id].importance.sums.empty())
                clients[id].importance = make_importance_table(model);
            clients[id].importance.reset();
        }
    }

    std::vector<LocalTrainResult> trained(picked.size());
    parallel_for(picked.size(), threads, [&](std::size_t i) {
        ClientState& c = clients[picked[i]];
        trained[i] = local_train(model, c, data, dense, plan, round, track);
        if (track) {
            c.mask = select_skeleton(model, c.importance, c.ratio);
            c.has_mask = true;
        }
    });

    std::vector<ParamSet> uploads;
    uploads.reserve(picked.size());
    for (std::size_t id : picked) uploads.push_back(upload_copy(model, clients[id].params));
    std::vector<std::pair<const ParamSet*, double>> agg_in;
    for (std::size_t i = 0; i < picked.size(); ++i) {
        agg_in.emplace_back(&uploads[i], double(clients[picked[i]].train_idx.size()));
    }
    server.global = fedavg_aggregate(model, agg_in);
    server.round = round + 1;

    const std::uint64_t full = model.global_param_count();
    const std::uint64_t dense_flops = count_backprop_flops(model, dense);
    RoundResult rr;
    rr.kind = RoundKind::Full;
    rr.participants = picked.size();
    double loss_sum = 0.0;
    std::uint64_t samples = 0;
    for (std::size_t i = 0; i < picked.size(); ++i) {
        const std::size_t id = picked[i];
        ledger.up.setskel += full;
        ledger.down.setskel += full;
        ledger.client_up[id].setskel += full;
        ledger.client_down[id].setskel += full;
        ledger.baseline += 2 * full;
        loss_sum += trained[i].loss_sum;
        samples += trained[i].samples;
        rr.backprop_macs += trained[i].samples * dense_flops;
    }
    rr.dense_macs = rr.backprop_macs;
    rr.params_up = rr.params_down = full * picked.size();
    rr.mean_loss = samples ? loss_sum / double(samples) : 0.0;
    return rr;
}

RoundResult run_updateskel_round(const Model& model, ServerState& server,
                                 std::vector<ClientState>& clients, const Dataset& data,
                                 const RoundPlan& plan, std::size_t round, CommLedger& ledger,
                                 std::size_t threads) {
    const std::size_t p = std::size_t(plan.participation * double(clients.size()));
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        if (clients[i].has_mask) pool.push_back(i);
    }
    if (pool.empty()) {
        throw std::runtime_error("skeleton round " + std::to_string(round) +
                                 " has no mask-holding clients");
    }
    const std::vector<std::size_t> picked =
        sample_participants(pool, std::min(p, pool.size()), plan, round);
    for (std::size_t id : picked) {
        if (!clients[id].has_mask) {
            throw std::runtime_error("client " + std::to_string(id) +
                                     " entered a skeleton round without a mask");
        }
        download_skeleton(model, server.global, clients[id].mask, clients[id].params);
    }

    std::vector<LocalTrainResult> trained(picked.size());
    parallel_for(picked.size(), threads, [&](std::size_t i) {
        ClientState& c = clients[picked[i]];
        trained[i] = local_train(model, c, data, c.mask, plan, round, false);
    });

    std::vector<ParamSet> uploads;
    uploads.reserve(picked.size());
    for (std::size_t id : picked) uploads.push_back(upload_copy(model, clients[id].params));
    std::vector<MaskedUpdate> agg_in(picked.size());
    for (std::size_t i = 0; i < picked.size(); ++i) {
        agg_in[i] = {&uploads[i], &clients[picked[i]].mask,
                     double(clients[picked[i]].train_idx.size())};
    }
    server.global = partial_aggregate(model, server.global, agg_in);
    server.round = round + 1;

    const std::uint64_t full = model.global_param_count();
    const std::uint64_t dense_flops = count_backprop_flops(model, ChannelMask::all_true(model));
    RoundResult rr;
    rr.kind = RoundKind::Skeleton;
    rr.participants = picked.size();
    double loss_sum = 0.0;
    std::uint64_t samples = 0;
    for (std::size_t i = 0; i < picked.size(); ++i) {
        const std::size_t id = picked[i];
        const std::uint64_t skel = skeleton_param_count(model, clients[id].mask);
        ledger.up.updateskel += skel;
        ledger.down.updateskel += skel;
        ledger.client_up[id].updateskel += skel;
        ledger.client_down[id].updateskel += skel;
        ledger.baseline += 2 * full;
        rr.params_up += skel;
        rr.params_down += skel;
        loss_sum += trained[i].loss_sum;
        samples += trained[i].samples;
        rr.backprop_macs += trained[i].samples * count_backprop_flops(model, clients[id].mask);
        rr.dense_macs += trained[i].samples * dense_flops;
    }
    rr.mean_loss = samples ? loss_sum / double(samples) : 0.0;
    return rr;
}

namespace {

std::size_t count_correct(const Model& model, const ParamSet& params, const Dataset& ds,
                          const std::vector<std::size_t>& idx) {
    constexpr std::size_t kChunk = 256;
    std::vector<int> labels;
    std::size_t correct = 0;
    const std::vector<int> no_labels;
    for (std::size_t from = 0; from < idx.size(); from += kChunk) {
        const std::size_t count = std::min(kChunk, idx.size() - from);
        const Tensor batch = make_batch(ds, idx, from, count, labels);
        ActivationCache cache;
        const ForwardResult fwd = forward(model, params, batch, no_labels, cache);
        const std::size_t classes = fwd.probs.dim(1);
        for (std::size_t b = 0; b < count; ++b) {
            const float* row = fwd.probs.ptr() + b * classes;
            std::size_t best = 0;
            for (std::size_t j = 1; j < classes; ++j)
                if (row[j] > row[best]) best = j;
            if (int(best) == labels[b]) ++correct;
        }
    }
    return correct;
}

}  // namespace

EvalResult evaluate(const Model& model, const ParamSet& global,
                    const std::vector<ClientState>& clients, const Dataset& train,
                    const Dataset& test, std::size_t threads) {
    if (clients.empty()) throw std::invalid_argument("evaluation without clients");
    if (test.size() == 0) throw std::invalid_argument("evaluation test set is empty");
    for (const ClientState& c : clients) {
        if (c.holdout_idx.empty()) {
            throw std::invalid_argument("client " + std::to_string(c.id) +
                                        " has an empty holdout partition");
        }
    }

    std::vector<double> accs(clients.size());
    parallel_for(clients.size(), threads, [&](std::size_t i) {
        ParamSet p = global;
        for (std::size_t l : model.trainable_indices()) {
            if (model.layer(l).scope == Scope::Local) copy_entry(clients[i].params, p, l);
        }
        const std::size_t correct = count_correct(model, p, train, clients[i].holdout_idx);
        accs[i] = double(correct) / double(clients[i].holdout_idx.size());
    });
    EvalResult r;
    double sum = 0.0;
    for (double a : accs) sum += a;
    r.local_acc = sum / double(accs.size());

    ParamSet avg = global;
    const double w = 1.0 / double(clients.size());
    for (std::size_t l : model.trainable_indices()) {
        if (model.layer(l).scope != Scope::Local) continue;
        auto mean_into = [&](auto member) {
            const std::size_t count = (avg.entries[l].*member).numel();
            for (std::size_t j = 0; j < count; ++j) {
                double acc = 0.0;
                for (const ClientState& c : clients)
                    acc += w * double((c.params.entries[l].*member).data[j]);
                (avg.entries[l].*member).data[j] = float(acc);
            }
        };
        mean_into(&ParamSet::Entry::w);
        mean_into(&ParamSet::Entry::b);
    }
    std::vector<std::size_t> all(test.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    r.new_acc = double(count_correct(model, avg, test, all)) / double(test.size());
    return r;
}

Dataset build_train_dataset(const ExperimentConfig& cfg) {
    if (cfg.data_source == "idx") return load_idx(cfg.train_images, cfg.train_labels);
    return make_synthetic(cfg.classes, cfg.per_class, cfg.image_size, cfg.seed, cfg.noise_std);
}

Dataset build_test_dataset(const ExperimentConfig& cfg) {
    if (cfg.data_source == "idx") return load_idx(cfg.test_images, cfg.test_labels);
    std::size_t per = cfg.test_per_class;
    if (per == 0) per = std::max<std::size_t>(1, cfg.per_class / 6);
    return make_synthetic(cfg.classes, per, cfg.image_size, cfg.seed, cfg.noise_std,
                          cfg.per_class);
}

std::vector<ClientState> make_clients(const Model& model, const ParamSet& init,
                                      const Dataset& train, const ExperimentConfig& cfg) {
    const Partition part = shard_noniid(train, cfg.clients, cfg.shards_per_client, cfg.seed);
    std::vector<ClientState> clients(cfg.clients);
    for (std::size_t i = 0; i < cfg.clients; ++i) {
        ClientState& c = clients[i];
        c.id = i;
        c.params = init;
        std::vector<std::size_t> idx = part.client_indices[i];
        auto rng = keyed_rng(cfg.seed, RngStream::Holdout, {std::uint64_t(i)});
        deterministic_shuffle(idx, rng);
        std::size_t h = std::size_t(cfg.holdout_fraction * double(idx.size()));
        if (h == 0) h = 1;
        if (h >= idx.size()) {
            throw std::invalid_argument("client " + std::to_string(i) + " holds only " +
                                        std::to_string(idx.size()) +
                                        " examples; holdout would consume them all");
        }
        c.holdout_idx.assign(idx.begin(), idx.begin() + h);
        c.train_idx.assign(idx.begin() + h, idx.end());
        std::sort(c.holdout_idx.begin(), c.holdout_idx.end());
        std::sort(c.train_idx.begin(), c.train_idx.end());
        c.importance = make_importance_table(model);
    }

    if (cfg.ratio_mode == "uniform") {
        for (auto& c : clients) c.ratio = cfg.ratio;
    } else if (cfg.ratio_mode == "equidistant") {
        for (std::size_t i = 0; i < clients.size(); ++i) {
            clients[i].ratio =
                clients.size() == 1
                    ? 1.0
                    : cfg.r_min + (1.0 - cfg.r_min) * double(i) / double(clients.size() - 1);
        }
    } else if (cfg.ratio_mode == "capability") {
        const std::vector<double> ratios = set_ratios(cfg.capabilities, cfg.r_min);
        for (std::size_t i = 0; i < clients.size(); ++i) {
            clients[i].capability = cfg.capabilities[i];
            clients[i].ratio = ratios[i];
        }
    } else {
        throw std::invalid_argument("unknown ratio_mode '" + cfg.ratio_mode + "'");
    }
    return clients;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t threads) {
    {
        const auto errs = validate_config(cfg);
        if (!errs.empty()) {
            std::string all = "invalid config:";
            for (const auto& e : errs) all += "\n  " + e;
            throw std::invalid_argument(all);
        }
    }
    const Model model = model_from_config(cfg);
    const Dataset train = build_train_dataset(cfg);
    const Dataset test = build_test_dataset(cfg);
    const Shape3 want = model.input_shape();
    if (train.images.dim(1) != want.c || train.images.dim(2) != want.h ||
        train.images.dim(3) != want.w) {
        throw std::invalid_argument("training data shape " + shape_string(train.images.shape) +
                                    " does not match model input " + want.str());
    }
    if (train.classes > model.classes()) {
        throw std::invalid_argument("dataset has " + std::to_string(train.classes) +
                                    " classes but the model only separates " +
                                    std::to_string(model.classes()));
    }

    const ParamSet init = init_params(model, cfg.seed);
    ServerState server;
    server.global = upload_copy(model, init);  // local-scope entries stay at zero
    std::vector<ClientState> clients = make_clients(model, init, train, cfg);

    RoundPlan plan;
    plan.cycles = cfg.cycles;
    plan.updateskel_per_cycle = cfg.updateskel_per_cycle;
    plan.participation = cfg.participation;
    plan.epochs = cfg.epochs;
    plan.batch = cfg.batch;
    plan.lr = cfg.lr;
    plan.fedavg_mode = cfg.mode == "fedavg";
    plan.seed = cfg.seed;

    ExperimentResult result;
    result.ledger.ensure(clients.size());
    result.global_params = model.global_param_count();
    std::size_t assigned = 0;
    for (const ClientState& c : clients) assigned += c.train_idx.size() + c.holdout_idx.size();
    result.dropped_examples = train.size() - assigned;

    const std::size_t total = plan.total_rounds();
    for (std::size_t round = 0; round < total; ++round) {
        const RoundKind kind = plan.kind_of(round);
        const RoundResult rr =
            kind == RoundKind::Full
                ? run_setskel_round(model, server, clients, train, plan, round, result.ledger,
                                    threads)
                : run_updateskel_round(model, server, clients, train, plan, round,
                                       result.ledger, threads);
        RoundRecord rec;
        rec.round = round;
        rec.kind = rr.kind;
        rec.participants = rr.participants;
        rec.mean_loss = rr.mean_loss;
        rec.params_up = rr.params_up;
        rec.params_down = rr.params_down;
        rec.backprop_macs = rr.backprop_macs;
        result.backprop_macs += rr.backprop_macs;
        result.dense_macs += rr.dense_macs;
        const bool last = round + 1 == total;
        if (last || (cfg.eval_every > 0 && (round + 1) % cfg.eval_every == 0)) {
            const EvalResult ev = evaluate(model, server.global, clients, train, test, threads);
            rec.evaluated = true;
            rec.local_acc = ev.local_acc;
            rec.new_acc = ev.new_acc;
            if (last) {
                result.final_local_acc = ev.local_acc;
                result.final_new_acc = ev.new_acc;
            }
        }
        result.rounds.push_back(rec);
    }
    result.final_global = std::move(server.global);
    result.final_clients = std::move(clients);
    return result;
}

}  // namespace fedskel
