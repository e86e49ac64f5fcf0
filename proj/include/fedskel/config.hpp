#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedskel/model.hpp"

namespace fedskel {

// Everything run_experiment needs, parsed from a sectioned key=value file.
struct ExperimentConfig {
    // [experiment]
    std::string name = "experiment";
    std::string mode = "fedskel";  // fedskel | fedavg
    std::uint64_t seed = 1;
    std::size_t cycles = 10;
    std::size_t updateskel_per_cycle = 3;
    std::size_t eval_every = 0;  // rounds between evaluations; 0 = final only
    double lr = 0.05;
    std::size_t epochs = 1;
    std::size_t batch = 10;
    double participation = 0.1;
    std::string out_dir = ".";

    // [model]
    std::string model_preset = "lenet5";  // lenet5 | lenet-caffe | toy
    bool local_head = true;

    // [data]
    std::string data_source = "synthetic";  // synthetic | idx
    std::string train_images, train_labels, test_images, test_labels;
    std::size_t classes = 10;
    std::size_t per_class = 100;
    std::size_t test_per_class = 0;  // 0 = per_class / 6, at least 1
    std::size_t image_size = 28;
    double noise_std = 0.08;
    double holdout_fraction = 0.1;

    // [clients]
    std::size_t clients = 10;
    std::size_t shards_per_client = 2;
    std::string ratio_mode = "uniform";  // uniform | equidistant | capability
    double ratio = 1.0;
    double r_min = 0.1;
    std::vector<double> capabilities;
};

// Parses without validating; unknown keys and malformed lines are errors.
ExperimentConfig parse_config(const std::string& text);

// Returns one message per problem, each naming the section.key at fault.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

// parse + validate + throw with all messages joined.
ExperimentConfig load_config(const std::string& path);

Model model_from_config(const ExperimentConfig& cfg);

}  // namespace fedskel
