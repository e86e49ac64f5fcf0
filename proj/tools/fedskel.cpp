#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "fedskel/bench.hpp"
#include "fedskel/checkpoint.hpp"
#include "fedskel/config.hpp"
#include "fedskel/data.hpp"
#include "fedskel/federation.hpp"
#include "fedskel/metrics.hpp"
#include "fedskel/report.hpp"

namespace fs = std::filesystem;
using namespace fedskel;

namespace {

int cmd_train(const std::string& config_path, long long seed_override,
              const std::string& out_override, std::size_t threads, bool save_ckpt) {
    ExperimentConfig cfg = load_config(config_path);
    if (seed_override >= 0) cfg.seed = std::uint64_t(seed_override);
    if (!out_override.empty()) cfg.out_dir = out_override;
    fs::create_directories(cfg.out_dir);

    const ExperimentResult result = run_experiment(cfg, threads);
    const fs::path dir(cfg.out_dir);
    write_metrics_csv((dir / "metrics.csv").string(), result);
    write_summary_json((dir / "summary.json").string(), cfg, result);

    if (save_ckpt) {
        const Model model = model_from_config(cfg);
        std::vector<ClientSnapshot> snaps;
        snaps.reserve(result.final_clients.size());
        for (const ClientState& c : result.final_clients) {
            snaps.push_back({c.id, c.ratio, c.has_mask, c.mask});
        }
        save_checkpoint((dir / "final.fskl").string(), model, result.final_global, snaps);
    }

    std::printf("%s: %zu rounds, local %.4f, new %.4f, comm reduction %.2f%%\n",
                cfg.name.c_str(), result.rounds.size(), result.final_local_acc,
                result.final_new_acc, 100.0 * result.ledger.reduction());
    return 0;
}

int cmd_bench(const std::string& config_path, const std::string& out_override,
              std::size_t batch, std::size_t warmups, std::size_t reps) {
    ExperimentConfig cfg = load_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    fs::create_directories(cfg.out_dir);
    const Model model = model_from_config(cfg);
    const BenchResult result = run_bench(model, cfg.seed, batch, warmups, reps);
    const fs::path path = fs::path(cfg.out_dir) / "bench.csv";
    write_bench_csv(path.string(), result);
    for (const BenchRow& r : result.rows) {
        std::printf("r=%3.0f%%  conv backward %8.2f ms (x%.2f)  step %8.2f ms (x%.2f)%s\n",
                    100.0 * r.ratio, 1e3 * r.convback_mean_s, r.convback_speedup,
                    1e3 * r.overall_mean_s, r.overall_speedup, r.unstable ? "  [unstable]" : "");
    }
    std::printf("wrote %s\n", path.string().c_str());
    return 0;
}

int cmd_report(const std::vector<std::string>& paths, const std::string& out_dir) {
    std::vector<RunSummary> runs;
    for (const auto& p : paths) runs.push_back(read_summary(p));
    const std::string csv = render_report_csv(runs);
    const std::string text = render_report_text(runs);
    std::fputs(text.c_str(), stdout);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const fs::path path = fs::path(out_dir) / "report.csv";
        std::ofstream out(path);
        out << csv;
        if (!out) throw std::runtime_error("cannot write " + path.string());
        std::printf("wrote %s\n", path.string().c_str());
    }
    return 0;
}

int cmd_shard_stats(const std::string& config_path) {
    const ExperimentConfig cfg = load_config(config_path);
    const Dataset train = build_train_dataset(cfg);
    const Partition part = shard_noniid(train, cfg.clients, cfg.shards_per_client, cfg.seed);
    std::printf("dataset: %zu examples, %zu classes, %zu dropped by the shard grid\n",
                train.size(), train.classes, part.dropped);
    for (std::size_t c = 0; c < part.client_indices.size(); ++c) {
        std::map<int, std::size_t> hist;
        for (std::size_t i : part.client_indices[c]) ++hist[train.labels[i]];
        std::printf("client %3zu: %5zu examples, labels {", c, part.client_indices[c].size());
        bool first = true;
        for (const auto& [label, count] : hist) {
            std::printf("%s%d:%zu", first ? "" : ", ", label, count);
            first = false;
        }
        std::printf("}\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated-learning simulator with skeleton-network training"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    long long seed_override = -1;
    std::size_t threads = 1;

    auto* train = app.add_subcommand("train", "run an experiment from a config file");
    train->add_option("--config", config_path, "experiment config")->required();
    train->add_option("--seed", seed_override, "override the config seed");
    train->add_option("--out", out_dir, "override the output directory");
    train->add_option("--threads", threads, "worker threads for client training");
    bool save_ckpt = false;
    train->add_flag("--checkpoint", save_ckpt, "also write the final server state as final.fskl");

    std::size_t batch = 64, warmups = 5, reps = 30;
    auto* bench = app.add_subcommand("bench", "time masked vs dense backward passes");
    bench->add_option("--config", config_path, "experiment config (model preset + seed)")
        ->required();
    bench->add_option("--out", out_dir, "override the output directory");
    bench->add_option("--batch", batch, "bench batch size");
    bench->add_option("--warmups", warmups, "discarded leading repetitions");
    bench->add_option("--reps", reps, "timed repetitions");

    std::vector<std::string> summary_paths;
    auto* report = app.add_subcommand("report", "merge run summaries into one table");
    report->add_option("summaries", summary_paths, "summary.json files")->required();
    report->add_option("--out", out_dir, "directory for report.csv");

    auto* stats = app.add_subcommand("shard-stats", "print per-client label distributions");
    stats->add_option("--config", config_path, "experiment config")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(train)) {
            return cmd_train(config_path, seed_override, out_dir, threads, save_ckpt);
        }
        if (app.got_subcommand(bench)) {
            return cmd_bench(config_path, out_dir, batch, warmups, reps);
        }
        if (app.got_subcommand(report)) return cmd_report(summary_paths, out_dir);
        if (app.got_subcommand(stats)) return cmd_shard_stats(config_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
