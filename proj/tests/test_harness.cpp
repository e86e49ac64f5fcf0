#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedskel/bench.hpp"
#include "fedskel/checkpoint.hpp"
#include "fedskel/config.hpp"
#include "fedskel/metrics.hpp"
#include "fedskel/report.hpp"
#include "support/oracle.hpp"

using namespace fedskel;
namespace fs = std::filesystem;

namespace {

const fs::path g_dir = fs::temp_directory_path() / "fedskel-harness-tests";

struct DirGuard {
    DirGuard() {
        fs::remove_all(g_dir);
        fs::create_directories(g_dir);
    }
} g_guard;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(bool(in));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spew(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    REQUIRE(bool(out));
    out << text;
}

template <typename Fn>
std::string thrown_message(Fn&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

bool mentions(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("config parser covers every key") {
    const std::string text =
        "# full inventory\n"
        "[experiment]\n"
        "name = tiny   ; trailing comment\n"
        "mode = fedavg\n"
        "seed = 99\n"
        "cycles = 7\n"
        "updateskel_per_cycle = 2\n"
        "eval_every = 5\n"
        "lr = 0.125\n"
        "epochs = 3\n"
        "batch = 16\n"
        "participation = 0.25\n"
        "out_dir = out/tiny\n"
        "\n"
        "[model]\n"
        "preset = lenet-caffe\n"
        "local_head = false\n"
        "\n"
        "[data]\n"
        "source = idx\n"
        "train_images = a.idx\n"
        "train_labels = b.idx\n"
        "test_images = c.idx\n"
        "test_labels = d.idx\n"
        "classes = 6\n"
        "per_class = 123\n"
        "test_per_class = 45\n"
        "image_size = 20\n"
        "noise_std = 0.125\n"
        "holdout_fraction = 0.2\n"
        "\n"
        "[clients]\n"
        "count = 12\n"
        "shards_per_client = 3\n"
        "ratio_mode = capability\n"
        "ratio = 0.5\n"
        "r_min = 0.2\n"
        "capabilities = 1, 2, 4, 1, 2, 4, 1, 2, 4, 1, 2, 4\n";

    const ExperimentConfig cfg = parse_config(text);
    CHECK(cfg.name == "tiny");
    CHECK(cfg.mode == "fedavg");
    CHECK(cfg.seed == 99);
    CHECK(cfg.cycles == 7);
    CHECK(cfg.updateskel_per_cycle == 2);
    CHECK(cfg.eval_every == 5);
    CHECK(cfg.lr == 0.125);
    CHECK(cfg.epochs == 3);
    CHECK(cfg.batch == 16);
    CHECK(cfg.participation == 0.25);
    CHECK(cfg.out_dir == "out/tiny");
    CHECK(cfg.model_preset == "lenet-caffe");
    CHECK(cfg.local_head == false);
    CHECK(cfg.data_source == "idx");
    CHECK(cfg.train_images == "a.idx");
    CHECK(cfg.train_labels == "b.idx");
    CHECK(cfg.test_images == "c.idx");
    CHECK(cfg.test_labels == "d.idx");
    CHECK(cfg.classes == 6);
    CHECK(cfg.per_class == 123);
    CHECK(cfg.test_per_class == 45);
    CHECK(cfg.image_size == 20);
    CHECK(cfg.noise_std == 0.125);
    CHECK(cfg.holdout_fraction == 0.2);
    CHECK(cfg.clients == 12);
    CHECK(cfg.shards_per_client == 3);
    CHECK(cfg.ratio_mode == "capability");
    CHECK(cfg.ratio == 0.5);
    CHECK(cfg.r_min == 0.2);
    CHECK(cfg.capabilities == std::vector<double>{1, 2, 4, 1, 2, 4, 1, 2, 4, 1, 2, 4});
    CHECK(validate_config(cfg).empty());
}

TEST_CASE("config parser rejects malformed input with line numbers") {
    CHECK(mentions(thrown_message([] { parse_config("[experiment]\nbogus = 1\n"); }),
                   "unknown config key experiment.bogus"));
    CHECK(mentions(thrown_message([] { parse_config("[nope]\nx = 1\n"); }),
                   "unknown config section [nope] at line 2"));
    CHECK(mentions(thrown_message([] { parse_config("[experiment\n"); }),
                   "line 1: unterminated section header"));
    CHECK(mentions(thrown_message([] { parse_config("[experiment]\n\njust words\n"); }),
                   "line 3: expected key = value"));
    CHECK(mentions(thrown_message([] { parse_config("[experiment]\ncycles = soon\n"); }),
                   "experiment.cycles: expected an unsigned integer"));
    CHECK(mentions(thrown_message([] { parse_config("[experiment]\nlr = fast\n"); }),
                   "experiment.lr: expected a number"));
    CHECK(mentions(thrown_message([] { parse_config("[model]\nlocal_head = maybe\n"); }),
                   "model.local_head: expected a boolean"));
}

TEST_CASE("config validation names the offending field") {
    ExperimentConfig cfg;  // defaults are valid
    CHECK(validate_config(cfg).empty());

    auto has_error = [](const ExperimentConfig& c, const std::string& needle) {
        for (const std::string& e : validate_config(c))
            if (mentions(e, needle)) return true;
        return false;
    };

    ExperimentConfig c = cfg;
    c.mode = "centralized";
    CHECK(has_error(c, "experiment.mode"));
    c = cfg;
    c.cycles = 0;
    CHECK(has_error(c, "experiment.cycles"));
    c = cfg;
    c.updateskel_per_cycle = 99;
    CHECK(has_error(c, "experiment.updateskel_per_cycle"));
    c = cfg;
    c.lr = -1.0;
    CHECK(has_error(c, "experiment.lr"));
    c = cfg;
    c.epochs = 0;
    CHECK(has_error(c, "experiment.epochs"));
    c = cfg;
    c.batch = 0;
    CHECK(has_error(c, "experiment.batch"));
    c = cfg;
    c.participation = 1.5;
    CHECK(has_error(c, "experiment.participation"));
    c = cfg;
    c.participation = 0.01;  // floor(0.01 * 10) == 0
    CHECK(has_error(c, "samples no one"));
    c = cfg;
    c.model_preset = "resnet";
    CHECK(has_error(c, "model.preset"));
    c = cfg;
    c.data_source = "idx";
    CHECK(has_error(c, "data.train_images"));
    CHECK(has_error(c, "data.test_labels"));
    c = cfg;
    c.data_source = "csv";
    CHECK(has_error(c, "data.source"));
    c = cfg;
    c.classes = 1;
    CHECK(has_error(c, "data.classes"));
    c = cfg;
    c.per_class = 0;
    CHECK(has_error(c, "data.per_class"));
    c = cfg;
    c.image_size = 2;
    CHECK(has_error(c, "data.image_size"));
    c = cfg;
    c.noise_std = -0.1;
    CHECK(has_error(c, "data.noise_std"));
    c = cfg;
    c.holdout_fraction = 1.0;
    CHECK(has_error(c, "data.holdout_fraction"));
    c = cfg;
    c.clients = 0;
    CHECK(has_error(c, "clients.count"));
    c = cfg;
    c.shards_per_client = 0;
    CHECK(has_error(c, "clients.shards_per_client"));
    c = cfg;
    c.ratio = 0.0;
    CHECK(has_error(c, "clients.ratio"));
    c = cfg;
    c.ratio_mode = "equidistant";
    c.r_min = 0.0;
    CHECK(has_error(c, "clients.r_min"));
    c = cfg;
    c.ratio_mode = "capability";
    c.capabilities = {1.0, 2.0};
    CHECK(has_error(c, "clients.capabilities"));
    c.capabilities.assign(10, 1.0);
    c.capabilities[3] = -1.0;
    CHECK(has_error(c, "must all be positive"));
    c = cfg;
    c.ratio_mode = "random";
    CHECK(has_error(c, "clients.ratio_mode"));
}

TEST_CASE("config loading reports every problem at once") {
    const fs::path p = g_dir / "broken.cfg";
    spew(p, "[experiment]\nmode = nope\ncycles = 0\n");
    const std::string msg = thrown_message([&] { load_config(p.string()); });
    CHECK(mentions(msg, "experiment.mode"));
    CHECK(mentions(msg, "experiment.cycles"));
    CHECK(mentions(thrown_message([&] { load_config((g_dir / "absent.cfg").string()); }),
                   "cannot read config file"));
}

TEST_CASE("model presets map to the expected topologies") {
    ExperimentConfig cfg;
    cfg.model_preset = "lenet5";
    cfg.local_head = true;
    const Model lenet = model_from_config(cfg);
    CHECK(lenet.input_shape() == Shape3{1, 28, 28});
    CHECK(lenet.classes() == 10);
    CHECK(lenet.layer(lenet.last_trainable()).scope == Scope::Local);

    cfg.local_head = false;
    cfg.model_preset = "lenet-caffe";
    const Model caffe = model_from_config(cfg);
    CHECK(caffe.classes() == 10);
    CHECK(caffe.layer(caffe.last_trainable()).scope == Scope::Global);

    cfg.model_preset = "toy";
    cfg.image_size = 12;
    cfg.classes = 5;
    const Model toy = model_from_config(cfg);
    CHECK(toy.input_shape() == Shape3{1, 12, 12});
    CHECK(toy.classes() == 5);

    cfg.model_preset = "vgg";
    CHECK_THROWS_AS(model_from_config(cfg), std::invalid_argument);
}

TEST_CASE("metrics csv writes one row per round with optional accuracies") {
    ExperimentResult r;
    RoundRecord a;
    a.round = 0;
    a.kind = RoundKind::Full;
    a.participants = 3;
    a.mean_loss = 1.25;
    a.params_up = 100;
    a.params_down = 200;
    a.backprop_macs = 999;
    RoundRecord b;
    b.round = 1;
    b.kind = RoundKind::Skeleton;
    b.participants = 2;
    b.mean_loss = 0.5;
    b.evaluated = true;
    b.local_acc = 0.875;
    b.new_acc = 0.9;
    b.params_up = 10;
    b.params_down = 20;
    b.backprop_macs = 42;
    r.rounds = {a, b};

    const fs::path p = g_dir / "metrics.csv";
    write_metrics_csv(p.string(), r);
    CHECK(slurp(p) ==
          "# schema: fedskel-metrics-v1\n"
          "round,kind,participants,mean_loss,local_acc,new_acc,params_up,params_down,"
          "backprop_macs\n"
          "0,full,3,1.250000,,,100,200,999\n"
          "1,skeleton,2,0.500000,0.875000,0.900000,10,20,42\n");

    CHECK_THROWS_AS(write_metrics_csv((g_dir / "no-dir" / "metrics.csv").string(), r),
                    std::runtime_error);
}

TEST_CASE("summary json survives a write and read cycle") {
    ExperimentConfig cfg;
    cfg.name = "loopback";
    cfg.mode = "fedskel";
    cfg.seed = 42;
    cfg.clients = 8;

    ExperimentResult r;
    r.rounds.resize(12);
    r.ledger.ensure(8);
    r.ledger.up.setskel = 600;
    r.ledger.down.setskel = 600;
    r.ledger.up.updateskel = 150;
    r.ledger.down.updateskel = 150;
    r.ledger.baseline = 3000;
    r.final_local_acc = 0.75;
    r.final_new_acc = 0.8125;
    r.backprop_macs = 500;
    r.dense_macs = 1000;
    r.global_params = 852;
    r.dropped_examples = 4;

    const fs::path p = g_dir / "summary.json";
    write_summary_json(p.string(), cfg, r);

    const RunSummary s = read_summary(p.string());
    CHECK(s.name == "loopback");
    CHECK(s.mode == "fedskel");
    CHECK(s.rounds == 12);
    CHECK(s.final_local_acc == 0.75);
    CHECK(s.final_new_acc == 0.8125);
    CHECK(s.params_total == 1500);
    CHECK(s.params_baseline == 3000);
    CHECK(s.comm_reduction == 0.5);
    CHECK(s.backprop_ratio == 0.5);
}

TEST_CASE("summary reader rejects foreign or damaged files") {
    const fs::path wrong = g_dir / "wrong-schema.json";
    spew(wrong, "{\"schema\": \"somebody-elses-v9\"}\n");
    CHECK(mentions(thrown_message([&] { read_summary(wrong.string()); }), "expected"));

    const fs::path garbage = g_dir / "garbage.json";
    spew(garbage, "this is not json at all {\n");
    CHECK(mentions(thrown_message([&] { read_summary(garbage.string()); }), "not valid JSON"));

    CHECK(mentions(thrown_message([&] { read_summary((g_dir / "absent.json").string()); }),
                   "cannot read summary"));
}

TEST_CASE("bench csv formats rows and reference columns") {
    BenchResult r;
    r.batch = 64;
    r.warmups = 5;
    r.reps = 30;
    r.dense_convback_mean_s = 0.5;
    r.dense_overall_mean_s = 1.5;

    BenchRow dense;
    dense.ratio = 1.0;
    dense.convback_mean_s = 0.5;
    dense.convback_std_s = 0.001;
    dense.convback_speedup = 1.0;
    dense.overall_mean_s = 1.5;
    dense.overall_std_s = 0.002;
    dense.overall_speedup = 1.0;
    BenchRow tenth;
    tenth.ratio = 0.1;
    tenth.convback_mean_s = 0.1;
    tenth.convback_std_s = 0.05;
    tenth.convback_speedup = 5.0;
    tenth.overall_mean_s = 0.75;
    tenth.overall_std_s = 0.003;
    tenth.overall_speedup = 2.0;
    tenth.unstable = true;
    tenth.ref_backprop = 5.52;
    tenth.ref_overall = 1.82;
    r.rows = {dense, tenth};

    const fs::path p = g_dir / "bench.csv";
    write_bench_csv(p.string(), r);
    CHECK(slurp(p) ==
          "# schema: fedskel-bench-v1\n"
          "# batch=64 warmups=5 reps=30 dense_convback_s=0.5 dense_overall_s=1.5\n"
          "ratio,convback_mean_s,convback_std_s,convback_speedup,overall_mean_s,"
          "overall_std_s,overall_speedup,unstable,ref_backprop_intel,ref_overall_arm\n"
          "1.00,0.500000,0.001000,1.000,1.500000,0.002000,1.000,0,,\n"
          "0.10,0.100000,0.050000,5.000,0.750000,0.003000,2.000,1,5.52,1.82\n");
}

TEST_CASE("bench run validates its arguments") {
    const Model model = make_toy_convnet(8, 4);
    CHECK_THROWS_AS(run_bench(model, 1, 0, 0, 2), std::invalid_argument);
    CHECK_THROWS_AS(run_bench(model, 1, 4, 0, 1), std::invalid_argument);
}

TEST_CASE("bench produces timings for every requested ratio") {
    const Model model = make_toy_convnet(8, 4);
    const BenchResult r = run_bench(model, 7, 4, 0, 2, {1.0, 0.5});
    REQUIRE(r.rows.size() == 2);
    CHECK(r.dense_convback_mean_s > 0.0);
    CHECK(r.rows[0].ratio == 1.0);
    CHECK(r.rows[0].convback_mean_s > 0.0);
    CHECK(r.rows[0].ref_backprop == 0.0);
    CHECK(r.rows[1].ratio == 0.5);
    CHECK(r.rows[1].overall_mean_s > 0.0);
}

TEST_CASE("report renders summaries without recomputing anything") {
    RunSummary s;
    s.name = "demo";
    s.mode = "fedskel";
    s.rounds = 40;
    s.final_local_acc = 0.9812;
    s.final_new_acc = 0.9501;
    s.params_total = 123456;
    s.params_baseline = 400000;
    s.comm_reduction = 0.6732;
    s.backprop_ratio = 0.1;

    CHECK(render_report_csv({s}) ==
          "name,mode,rounds,local_acc,new_acc,params_total,comm_reduction,backprop_ratio\n"
          "demo,fedskel,40,0.9812,0.9501,123456,0.6732,0.1000\n");

    const std::string text = render_report_text({s});
    CHECK(mentions(text, "demo"));
    CHECK(mentions(text, "98.1200%"));
    CHECK(mentions(text, "comm.red"));

    CHECK_THROWS_AS(render_report_csv({}), std::invalid_argument);
    CHECK_THROWS_AS(render_report_text({}), std::invalid_argument);
}

TEST_CASE("checkpoints restore parameters, ratios and masks exactly") {
    std::mt19937_64 rng(88);
    const Model model = make_toy_convnet(8, 4, true);
    const ParamSet global = oracle::random_params<float>(model, rng);

    ClientSnapshot c0;
    c0.id = 0;
    c0.ratio = 0.25;
    c0.has_mask = true;
    c0.mask = oracle::random_mask(model, rng, 0.5);
    ClientSnapshot c1;
    c1.id = 7;
    c1.ratio = 1.0;
    c1.has_mask = false;

    const fs::path p = g_dir / "state.fskl";
    save_checkpoint(p.string(), model, global, {c0, c1});
    const Checkpoint loaded = load_checkpoint(p.string());

    REQUIRE(loaded.model.size() == model.size());
    CHECK(loaded.model.input_shape() == model.input_shape());
    for (std::size_t l = 0; l < model.size(); ++l) {
        CHECK(loaded.model.layer(l).kind == model.layer(l).kind);
        CHECK(loaded.model.layer(l).scope == model.layer(l).scope);
    }
    for (std::size_t l : model.trainable_indices()) {
        if (model.layer(l).scope != Scope::Global) continue;
        CHECK(oracle::bits_equal(loaded.global.entries[l].w, global.entries[l].w));
        CHECK(oracle::bits_equal(loaded.global.entries[l].b, global.entries[l].b));
    }
    REQUIRE(loaded.clients.size() == 2);
    CHECK(loaded.clients[0].id == 0);
    CHECK(loaded.clients[0].ratio == 0.25);
    REQUIRE(loaded.clients[0].has_mask);
    CHECK(loaded.clients[0].mask.channels == c0.mask.channels);
    validate_mask(loaded.model, loaded.clients[0].mask);
    CHECK(loaded.clients[1].id == 7);
    CHECK(loaded.clients[1].ratio == 1.0);
    CHECK_FALSE(loaded.clients[1].has_mask);
}

TEST_CASE("checkpoint loader rejects foreign and truncated files") {
    const fs::path junk = g_dir / "junk.fskl";
    spew(junk, "JUNKxxxxxxxxxxxxxxxxxxxxxxxxxxxx");
    CHECK(mentions(thrown_message([&] { load_checkpoint(junk.string()); }), "bad magic"));

    const fs::path vers = g_dir / "version.fskl";
    spew(vers, std::string("FSKL") + std::string("\x09\x00\x00\x00", 4));
    CHECK(mentions(thrown_message([&] { load_checkpoint(vers.string()); }), "format version"));

    const Model model = make_toy_convnet(8, 4);
    const fs::path good = g_dir / "good.fskl";
    save_checkpoint(good.string(), model, init_params(model, 5), {});
    const fs::path cut = g_dir / "cut.fskl";
    spew(cut, slurp(good).substr(0, 40));
    CHECK(mentions(thrown_message([&] { load_checkpoint(cut.string()); }),
                   "truncated checkpoint"));

    CHECK(mentions(thrown_message([&] { load_checkpoint((g_dir / "absent.fskl").string()); }),
                   "cannot open checkpoint"));
}
