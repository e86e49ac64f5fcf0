#include "fedskel/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

#include "fedskel/engine.hpp"
#include "fedskel/rng.hpp"
#include "fedskel/skeleton.hpp"

namespace fedskel {

namespace {

volatile float g_sink;  // keeps the optimizer from discarding timed work

struct Timing {
    double mean = 0.0;
    double stddev = 0.0;
};

Timing summarize(const std::vector<double>& xs) {
    Timing t;
    for (double x : xs) t.mean += x;
    t.mean /= double(xs.size());
    if (xs.size() > 1) {
        double acc = 0.0;
        for (double x : xs) acc += (x - t.mean) * (x - t.mean);
        t.stddev = std::sqrt(acc / double(xs.size() - 1));
    }
    return t;
}

ChannelMask mask_at_ratio(const Model& model, double ratio, std::uint64_t seed) {
    ImportanceTable table = make_importance_table(model);
    for (std::size_t l = 0; l < model.size(); ++l) {
        if (table.sums[l].empty()) continue;
        auto rng = keyed_rng(seed, RngStream::BenchMask, {std::uint64_t(l)});
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (double& v : table.sums[l]) v = u(rng);
    }
    table.samples = 1;
    return select_skeleton(model, table, ratio);
}

struct Measured {
    Timing convback;
    Timing overall;
};

Measured measure(const Model& model, ParamSet& params, const Tensor& batch,
                 const std::vector<int>& labels, const ChannelMask& mask, std::size_t warmups,
                 std::size_t reps) {
    using clock = std::chrono::steady_clock;
    ActivationCache cache;
    forward(model, params, batch, labels, cache);

    std::vector<double> conv_times, step_times;
    conv_times.reserve(reps);
    step_times.reserve(reps);

    for (std::size_t i = 0; i < warmups + reps; ++i) {
        BackwardTimings t;
        const ParamSet grads = backward(model, params, cache, mask, &t);
        g_sink = grads.entries[model.first_trainable()].w.data[0];
        if (i >= warmups) {
            double conv = 0.0;
            for (std::size_t l = 0; l < model.size(); ++l) {
                if (model.layer(l).kind == LayerKind::Conv2D) conv += t.seconds[l];
            }
            conv_times.push_back(conv);
        }
    }
    for (std::size_t i = 0; i < warmups + reps; ++i) {
        const auto t0 = clock::now();
        ActivationCache c2;
        const ForwardResult fwd = forward(model, params, batch, labels, c2);
        const ParamSet grads = backward(model, params, c2, mask);
        sgd_step(model, params, grads, 0.0f, mask);  // zero rate: full work, stable params
        const auto t1 = clock::now();
        g_sink = fwd.loss;
        if (i >= warmups) step_times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    return Measured{summarize(conv_times), summarize(step_times)};
}

}  // namespace

BenchResult run_bench(const Model& model, std::uint64_t seed, std::size_t batch,
                      std::size_t warmups, std::size_t reps,
                      const std::vector<double>& ratios) {
    if (batch == 0) throw std::invalid_argument("bench batch must be at least 1");
    if (reps < 2) throw std::invalid_argument("bench needs at least 2 repetitions");

    ParamSet params = init_params(model, seed);
    const Shape3 in = model.input_shape();
    Tensor images({batch, in.c, in.h, in.w});
    auto rng = keyed_rng(seed, RngStream::BenchMask, {0xbeef});
    std::uniform_real_distribution<float> pix(0.0f, 1.0f);
    for (float& v : images.data) v = pix(rng);
    std::vector<int> labels(batch);
    for (auto& l : labels) l = int(rng() % model.classes());

    BenchResult out;
    out.reps = reps;
    out.warmups = warmups;
    out.batch = batch;

    const ChannelMask dense = ChannelMask::all_true(model);
    const Measured base = measure(model, params, images, labels, dense, warmups, reps);
    out.dense_convback_mean_s = base.convback.mean;
    out.dense_overall_mean_s = base.overall.mean;

    for (double r : ratios) {
        const ChannelMask mask = mask_at_ratio(model, r, seed);
        const Measured m = measure(model, params, images, labels, mask, warmups, reps);
        BenchRow row;
        row.ratio = r;
        row.convback_mean_s = m.convback.mean;
        row.convback_std_s = m.convback.stddev;
        row.convback_speedup = base.convback.mean / m.convback.mean;
        row.overall_mean_s = m.overall.mean;
        row.overall_std_s = m.overall.stddev;
        row.overall_speedup = base.overall.mean / m.overall.mean;
        row.unstable = m.convback.stddev > 0.2 * m.convback.mean ||
                       m.overall.stddev > 0.2 * m.overall.mean;
        if (r == 0.4) row.ref_backprop = 2.08, row.ref_overall = 1.35;
        if (r == 0.3) row.ref_backprop = 2.57, row.ref_overall = 1.52;
        if (r == 0.2) row.ref_backprop = 3.38, row.ref_overall = 1.61;
        if (r == 0.1) row.ref_backprop = 5.52, row.ref_overall = 1.82;
        out.rows.push_back(row);
    }
    return out;
}

void write_bench_csv(const std::string& path, const BenchResult& result) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# schema: fedskel-bench-v1\n";
    out << "# batch=" << result.batch << " warmups=" << result.warmups
        << " reps=" << result.reps << " dense_convback_s=" << result.dense_convback_mean_s
        << " dense_overall_s=" << result.dense_overall_mean_s << "\n";
    out << "ratio,convback_mean_s,convback_std_s,convback_speedup,overall_mean_s,"
           "overall_std_s,overall_speedup,unstable,ref_backprop_intel,ref_overall_arm\n";
    char buf[256];
    for (const BenchRow& r : result.rows) {
        std::snprintf(buf, sizeof buf, "%.2f,%.6f,%.6f,%.3f,%.6f,%.6f,%.3f,%d,", r.ratio,
                      r.convback_mean_s, r.convback_std_s, r.convback_speedup, r.overall_mean_s,
                      r.overall_std_s, r.overall_speedup, r.unstable ? 1 : 0);
        out << buf;
        if (r.ref_backprop > 0.0) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f", r.ref_backprop, r.ref_overall);
            out << buf;
        } else {
            out << ',';
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("short write to " + path);
}

}  // namespace fedskel
