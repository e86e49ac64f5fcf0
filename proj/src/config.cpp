#include "fedskel/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedskel {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument(where + ": expected a boolean, got '" + v + "'");
}

std::uint64_t parse_u64(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw std::invalid_argument(where + ": expected an unsigned integer, got '" + v + "'");
    }
}

double parse_double(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw std::invalid_argument(where + ": expected a number, got '" + v + "'");
    }
}

std::vector<double> parse_double_list(const std::string& v, const std::string& where) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_double(item, where));
    }
    return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        const std::string where = section + "." + key;

        if (section == "experiment") {
            if (key == "name") cfg.name = val;
            else if (key == "mode") cfg.mode = val;
            else if (key == "seed") cfg.seed = parse_u64(val, where);
            else if (key == "cycles") cfg.cycles = parse_u64(val, where);
            else if (key == "updateskel_per_cycle") cfg.updateskel_per_cycle = parse_u64(val, where);
            else if (key == "eval_every") cfg.eval_every = parse_u64(val, where);
            else if (key == "lr") cfg.lr = parse_double(val, where);
            else if (key == "epochs") cfg.epochs = parse_u64(val, where);
            else if (key == "batch") cfg.batch = parse_u64(val, where);
            else if (key == "participation") cfg.participation = parse_double(val, where);
            else if (key == "out_dir") cfg.out_dir = val;
            else throw std::invalid_argument("unknown config key " + where);
        } else if (section == "model") {
            if (key == "preset") cfg.model_preset = val;
            else if (key == "local_head") cfg.local_head = parse_bool(val, where);
            else throw std::invalid_argument("unknown config key " + where);
        } else if (section == "data") {
            if (key == "source") cfg.data_source = val;
            else if (key == "train_images") cfg.train_images = val;
            else if (key == "train_labels") cfg.train_labels = val;
            else if (key == "test_images") cfg.test_images = val;
            else if (key == "test_labels") cfg.test_labels = val;
            else if (key == "classes") cfg.classes = parse_u64(val, where);
            else if (key == "per_class") cfg.per_class = parse_u64(val, where);
            else if (key == "test_per_class") cfg.test_per_class = parse_u64(val, where);
            else if (key == "image_size") cfg.image_size = parse_u64(val, where);
            else if (key == "noise_std") cfg.noise_std = parse_double(val, where);
            else if (key == "holdout_fraction") cfg.holdout_fraction = parse_double(val, where);
            else throw std::invalid_argument("unknown config key " + where);
        } else if (section == "clients") {
            if (key == "count") cfg.clients = parse_u64(val, where);
            else if (key == "shards_per_client") cfg.shards_per_client = parse_u64(val, where);
            else if (key == "ratio_mode") cfg.ratio_mode = val;
            else if (key == "ratio") cfg.ratio = parse_double(val, where);
            else if (key == "r_min") cfg.r_min = parse_double(val, where);
            else if (key == "capabilities") cfg.capabilities = parse_double_list(val, where);
            else throw std::invalid_argument("unknown config key " + where);
        } else {
            throw std::invalid_argument("unknown config section [" + section + "] at line " +
                                        std::to_string(lineno));
        }
    }
    return cfg;
}

std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
    std::vector<std::string> errs;
    auto bad = [&errs](const std::string& msg) { errs.push_back(msg); };

    if (cfg.mode != "fedskel" && cfg.mode != "fedavg") {
        bad("experiment.mode must be fedskel or fedavg, got '" + cfg.mode + "'");
    }
    if (cfg.cycles == 0) bad("experiment.cycles must be at least 1");
    if (cfg.mode == "fedskel" && cfg.updateskel_per_cycle > 16) {
        bad("experiment.updateskel_per_cycle " + std::to_string(cfg.updateskel_per_cycle) +
            " is unreasonably large (max 16)");
    }
    if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) bad("experiment.lr must be non-negative");
    if (cfg.epochs == 0) bad("experiment.epochs must be at least 1");
    if (cfg.batch == 0) bad("experiment.batch must be at least 1");
    if (!(cfg.participation > 0.0) || cfg.participation > 1.0) {
        bad("experiment.participation must lie in (0,1]");
    }
    if (cfg.clients == 0) {
        bad("clients.count must be at least 1");
    } else if (std::size_t(cfg.participation * double(cfg.clients)) < 1) {
        bad("experiment.participation of " + std::to_string(cfg.participation) + " over " +
            std::to_string(cfg.clients) + " clients samples no one");
    }

    if (cfg.model_preset != "lenet5" && cfg.model_preset != "lenet-caffe" &&
        cfg.model_preset != "toy") {
        bad("model.preset must be lenet5, lenet-caffe or toy, got '" + cfg.model_preset + "'");
    }

    if (cfg.data_source == "idx") {
        if (cfg.train_images.empty()) bad("data.train_images is required for source=idx");
        if (cfg.train_labels.empty()) bad("data.train_labels is required for source=idx");
        if (cfg.test_images.empty()) bad("data.test_images is required for source=idx");
        if (cfg.test_labels.empty()) bad("data.test_labels is required for source=idx");
    } else if (cfg.data_source == "synthetic") {
        if (cfg.classes < 2) bad("data.classes must be at least 2");
        if (cfg.per_class == 0) bad("data.per_class must be at least 1");
        if (cfg.image_size < 4) bad("data.image_size must be at least 4");
        if (!(cfg.noise_std >= 0.0)) bad("data.noise_std must be non-negative");
    } else {
        bad("data.source must be synthetic or idx, got '" + cfg.data_source + "'");
    }
    if (!(cfg.holdout_fraction > 0.0) || cfg.holdout_fraction >= 1.0) {
        bad("data.holdout_fraction must lie in (0,1)");
    }

    if (cfg.shards_per_client == 0) bad("clients.shards_per_client must be at least 1");
    if (cfg.ratio_mode == "uniform") {
        if (!(cfg.ratio > 0.0) || cfg.ratio > 1.0) bad("clients.ratio must lie in (0,1]");
    } else if (cfg.ratio_mode == "equidistant") {
        if (!(cfg.r_min > 0.0) || cfg.r_min > 1.0) bad("clients.r_min must lie in (0,1]");
    } else if (cfg.ratio_mode == "capability") {
        if (!(cfg.r_min > 0.0) || cfg.r_min > 1.0) bad("clients.r_min must lie in (0,1]");
        if (cfg.capabilities.size() != cfg.clients) {
            bad("clients.capabilities lists " + std::to_string(cfg.capabilities.size()) +
                " values for " + std::to_string(cfg.clients) + " clients");
        }
        for (double c : cfg.capabilities) {
            if (!(c > 0.0)) {
                bad("clients.capabilities must all be positive");
                break;
            }
        }
    } else {
        bad("clients.ratio_mode must be uniform, equidistant or capability, got '" +
            cfg.ratio_mode + "'");
    }
    return errs;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentConfig cfg = parse_config(ss.str());
    const auto errs = validate_config(cfg);
    if (!errs.empty()) {
        std::string all = "invalid config " + path + ":";
        for (const auto& e : errs) all += "\n  " + e;
        throw std::invalid_argument(all);
    }
    return cfg;
}

Model model_from_config(const ExperimentConfig& cfg) {
    std::size_t classes = cfg.classes;
    if (cfg.model_preset == "lenet5") return make_lenet5(cfg.local_head);
    if (cfg.model_preset == "lenet-caffe") return make_lenet_caffe(cfg.local_head);
    if (cfg.model_preset == "toy") {
        return make_toy_convnet(cfg.image_size, classes, cfg.local_head);
    }
    throw std::invalid_argument("unknown model preset '" + cfg.model_preset + "'");
}

}  // namespace fedskel
