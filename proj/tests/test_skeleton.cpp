#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fedskel/skeleton.hpp"
#include "support/oracle.hpp"

using namespace fedskel;

namespace {

// A model whose first layer has exactly F units, for handy selection checks.
Model fc_model(std::size_t f) {
    return Model(Shape3{1, 2, 2},
                 {LayerSpec::fully_connected(f), LayerSpec::relu(),
                  LayerSpec::fully_connected(3), LayerSpec::softmax_cross_entropy()});
}

ImportanceTable table_with(const Model& model, std::vector<double> row) {
    ImportanceTable t = make_importance_table(model);
    t.sums[0] = std::move(row);
    t.samples = 1;
    return t;
}

std::vector<std::size_t> kept_indices(const ChannelMask& m, std::size_t layer) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < m.channels[layer].size(); ++i)
        if (m.channels[layer][i]) out.push_back(i);
    return out;
}

}  // namespace

TEST_CASE("importance table rows exist only for prunable layers") {
    const Model model = oracle::test_topology(4);  // has a local head
    const ImportanceTable t = make_importance_table(model);
    REQUIRE(t.sums.size() == model.size());
    for (std::size_t l = 0; l < model.size(); ++l) {
        if (model.prunable(l)) {
            CHECK(t.sums[l].size() == model.filter_count(l));
        } else {
            CHECK(t.sums[l].empty());
        }
    }
    CHECK(t.samples == 0);
}

TEST_CASE("accumulated importance is the mean absolute post-activation value") {
    std::mt19937_64 rng(201);
    const Model model = oracle::test_topology(0);
    const ParamSet params = oracle::random_params<float>(model, rng);
    const Tensor batch = oracle::random_tensor<float>({3, 1, 8, 8}, rng);
    const std::vector<int> labels = oracle::random_labels(3, model.classes(), rng);

    ActivationCache cache;
    forward(model, params, batch, labels, cache);
    ImportanceTable t = make_importance_table(model);
    accumulate_importance(model, cache, t);
    CHECK(t.samples == 3);

    for (std::size_t l = 0; l < model.size(); ++l) {
        if (!model.prunable(l)) continue;
        // Prunable layers here are each followed by a ReLU; the ranking must
        // read the rectified values.
        REQUIRE(model.layer(l + 1).kind == LayerKind::ReLU);
        const Tensor& act = cache.outputs[l + 1];
        const std::size_t f = model.filter_count(l);
        const std::size_t chan = act.numel() / (3 * f);
        for (std::size_t c = 0; c < f; ++c) {
            double want = 0.0;
            for (std::size_t b = 0; b < 3; ++b)
                for (std::size_t p = 0; p < chan; ++p)
                    want += std::abs(double(act.data[(b * f + c) * chan + p]));
            want /= double(3 * chan);
            CHECK(t.sums[l][c] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("importance accumulates additively across batches") {
    std::mt19937_64 rng(202);
    const Model model = oracle::test_topology(0);
    const ParamSet params = oracle::random_params<float>(model, rng);
    const Tensor b1 = oracle::random_tensor<float>({2, 1, 8, 8}, rng);
    const Tensor b2 = oracle::random_tensor<float>({3, 1, 8, 8}, rng);

    ActivationCache c1, c2;
    forward(model, params, b1, {0, 1}, c1);
    forward(model, params, b2, {2, 3, 0}, c2);

    ImportanceTable both = make_importance_table(model);
    accumulate_importance(model, c1, both);
    accumulate_importance(model, c2, both);
    CHECK(both.samples == 5);

    ImportanceTable first = make_importance_table(model);
    accumulate_importance(model, c1, first);
    ImportanceTable second = make_importance_table(model);
    accumulate_importance(model, c2, second);
    for (std::size_t l = 0; l < model.size(); ++l) {
        for (std::size_t c = 0; c < both.sums[l].size(); ++c) {
            CHECK(both.sums[l][c] ==
                  doctest::Approx(first.sums[l][c] + second.sums[l][c]).epsilon(1e-12));
        }
    }

    both.reset();
    CHECK(both.samples == 0);
    for (const auto& row : both.sums)
        for (double v : row) CHECK(v == 0.0);
}

TEST_CASE("selection keeps the highest-importance channels") {
    const Model model = fc_model(4);
    const ImportanceTable t = table_with(model, {0.5, 0.1, 0.9, 0.3});
    const ChannelMask m = select_skeleton(model, t, 0.5);
    CHECK(kept_indices(m, 0) == std::vector<std::size_t>{0, 2});
}

TEST_CASE("selection at ratio 1 keeps everything") {
    const Model model = fc_model(4);
    const ImportanceTable t = table_with(model, {0.5, 0.1, 0.9, 0.3});
    const ChannelMask m = select_skeleton(model, t, 1.0);
    CHECK(m.kept(0) == 4);
}

TEST_CASE("selection ties break toward the lower channel index") {
    const Model model = fc_model(8);
    const ImportanceTable t = table_with(model, std::vector<double>(8, 0.7));
    const ChannelMask m = select_skeleton(model, t, 0.25);
    CHECK(kept_indices(m, 0) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("selection count is the rounded-up share, floored at one") {
    struct Case {
        std::size_t f;
        double r;
        std::size_t want;
    };
    // 0.1 * 20 must keep 2, not the 3 that naive double ceil produces.
    const Case cases[] = {{20, 0.1, 2},  {10, 0.25, 3}, {6, 0.1, 1},   {16, 0.1, 2},
                          {120, 0.1, 12}, {84, 0.1, 9},  {7, 1.0, 7},   {5, 0.5, 3},
                          {50, 0.3, 15}, {3, 0.01, 1}};
    for (const Case& cs : cases) {
        const Model model = fc_model(cs.f);
        std::vector<double> row(cs.f);
        for (std::size_t i = 0; i < cs.f; ++i) row[i] = double(i);
        const ImportanceTable t = table_with(model, row);
        const ChannelMask m = select_skeleton(model, t, cs.r);
        CHECK(m.kept(0) == cs.want);
    }
}

TEST_CASE("selection is invariant to positive rescaling of importances") {
    std::mt19937_64 rng(203);
    const Model model = fc_model(12);
    std::vector<double> row(12);
    for (double& v : row) v = double(rng() % 1000) / 1000.0;
    const ImportanceTable a = table_with(model, row);
    for (double& v : row) v *= 37.5;
    const ImportanceTable b = table_with(model, row);
    for (double r : {0.1, 0.3, 0.6, 1.0}) {
        CHECK(select_skeleton(model, a, r).channels ==
              select_skeleton(model, b, r).channels);
    }
}

TEST_CASE("selection validates ratio and accumulation state") {
    const Model model = fc_model(4);
    const ImportanceTable t = table_with(model, {1, 2, 3, 4});
    CHECK_THROWS_AS(select_skeleton(model, t, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(select_skeleton(model, t, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(select_skeleton(model, t, 1.5), std::invalid_argument);

    ImportanceTable fresh = make_importance_table(model);
    CHECK_THROWS_AS(select_skeleton(model, fresh, 0.5), std::invalid_argument);
}

TEST_CASE("selected masks always validate") {
    std::mt19937_64 rng(204);
    for (std::size_t which = 0; which < 5; ++which) {
        const Model model = oracle::test_topology(which);
        ImportanceTable t = make_importance_table(model);
        for (auto& row : t.sums)
            for (double& v : row) v = double(rng() % 1000);
        t.samples = 1;
        for (double r : {0.05, 0.1, 0.33, 0.5, 1.0}) {
            const ChannelMask m = select_skeleton(model, t, r);
            validate_mask(model, m);
        }
    }
}

TEST_CASE("skeleton parameter count for a single kept conv filter") {
    const Model model(Shape3{1, 6, 6},
                      {LayerSpec::conv2d(3, 3), LayerSpec::relu(),
                       LayerSpec::fully_connected(2), LayerSpec::softmax_cross_entropy()});
    ChannelMask m = ChannelMask::all_true(model);
    m.channels[0] = {0, 1, 0};
    // One 1x3x3 filter plus its bias, then the full 2x48+2 classifier.
    CHECK(skeleton_param_count(model, m) == 10 + 2 * 48 + 2);
}

TEST_CASE("skeleton parameter count under an all-true mask is the global count") {
    for (std::size_t which = 0; which < 5; ++which) {
        const Model model = oracle::test_topology(which);
        CHECK(skeleton_param_count(model, ChannelMask::all_true(model)) ==
              model.global_param_count());
    }
}

TEST_CASE("local-scope layers never enter the skeleton count") {
    const Model model = oracle::test_topology(4);
    std::size_t local = model.size();
    for (std::size_t l : model.trainable_indices())
        if (model.layer(l).scope == Scope::Local) local = l;
    REQUIRE(local < model.size());
    CHECK(model.global_param_count() + model.layer_param_count(local) ==
          model.total_param_count());
    CHECK(skeleton_param_count(model, ChannelMask::all_true(model)) ==
          model.global_param_count());
}

TEST_CASE("skeleton count of the standard presets at a 10% ratio") {
    // Hand-computed: kept filters 1/2/12/9 over fan-ins 25/150/400/120.
    const Model lenet = make_lenet5(true);
    CHECK(lenet.global_param_count() == 60856);
    ImportanceTable t = make_importance_table(lenet);
    for (auto& row : t.sums)
        for (std::size_t i = 0; i < row.size(); ++i) row[i] = double(i);
    t.samples = 1;
    const ChannelMask m = select_skeleton(lenet, t, 0.1);
    CHECK(skeleton_param_count(lenet, m) ==
          1 * 26 + 2 * 151 + 12 * 401 + 9 * 121);
}
