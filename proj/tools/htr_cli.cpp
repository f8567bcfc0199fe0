#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "htr/plots.hpp"
#include "htr/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kUsage = R"(usage:
  htr train <config> --seed <n> [--<config.key> <value> ...]
  htr eval <checkpoint> <config> [--<config.key> <value> ...]
  htr sweep <config> --key <config.key> --values <v1,v2,...> --seed <n> [overrides]
  htr plot <csv-dir>

Flags of the form --<section.key> <value> override config file entries,
e.g. --relabel.K 0.3. Unknown keys are rejected.
)";

int usage_error(const std::string& msg) {
    std::cerr << "error: " << msg << "\n" << kUsage;
    return 2;
}

// Applies --key value pairs onto the config; returns an error message or "".
std::string apply_flag_overrides(htr::RunConfig& cfg, const std::vector<std::string>& args,
                                 size_t start) {
    for (size_t i = start; i < args.size(); i += 2) {
        if (args[i].rfind("--", 0) != 0) return "expected a --flag, got '" + args[i] + "'";
        if (i + 1 >= args.size()) return "flag '" + args[i] + "' is missing a value";
        std::string key = args[i].substr(2);
        if (key == "seed") key = "run.seed";
        try {
            htr::apply_override(cfg, key, args[i + 1]);
        } catch (const std::exception& e) {
            return e.what();
        }
    }
    return "";
}

int cmd_train(const std::vector<std::string>& args) {
    if (args.empty()) return usage_error("train requires a config file");
    htr::RunConfig cfg;
    try {
        cfg = htr::parse_config_file(args[0]);
    } catch (const std::exception& e) {
        return usage_error(e.what());
    }
    if (auto err = apply_flag_overrides(cfg, args, 1); !err.empty())
        return usage_error(err);
    if (!cfg.seed_set) return usage_error("train requires --seed");
    try {
        htr::validate_config(cfg);
        htr::Trainer trainer(cfg);
        trainer.run();
        std::cout << "run complete: " << trainer.log().size() << " iterations, "
                  << trainer.env_steps() << " env steps -> " << cfg.out_dir << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int cmd_eval(const std::vector<std::string>& args) {
    if (args.size() < 2) return usage_error("eval requires <checkpoint> <config>");
    htr::RunConfig cfg;
    try {
        cfg = htr::parse_config_file(args[1]);
    } catch (const std::exception& e) {
        return usage_error(e.what());
    }
    if (auto err = apply_flag_overrides(cfg, args, 2); !err.empty())
        return usage_error(err);
    try {
        htr::validate_config(cfg);
        htr::Trainer trainer(cfg);
        htr::load_checkpoint(args[0], trainer.nets(), trainer.encoder());

        htr::AdaptationResult res =
            htr::meta_test(trainer.nets(), trainer.encoder(), cfg.env,
                           trainer.test_tasks(), cfg.eval_episodes_per_task,
                           cfg.seed + 9000);
        fs::create_directories(cfg.out_dir);
        std::ofstream out(fs::path(cfg.out_dir) / "adaptation.csv", std::ios::binary);
        out << "episode,avg_sparse_return\n";
        for (size_t i = 0; i < res.per_episode_return.size(); ++i)
            out << i << ',' << res.per_episode_return[i] << '\n';
        std::cout << "adaptation curve (avg sparse return per episode):\n";
        for (size_t i = 0; i < res.per_episode_return.size(); ++i)
            std::cout << "  episode " << i << ": " << res.per_episode_return[i] << "\n";

        auto points = htr::collect_prior_trajectories(
            trainer.nets(), trainer.encoder(), cfg.env, trainer.test_tasks(), 300,
            cfg.seed + 9001);
        std::ofstream traj(fs::path(cfg.out_dir) / "trajectories.csv", std::ios::binary);
        traj << "x,y\n";
        for (const auto& p : points) traj << p[0] << ',' << p[1] << '\n';
        htr::emit_trajectory_scatter(points, cfg.out_dir);
        std::cout << "wrote " << cfg.out_dir << "/adaptation.csv, trajectories.csv, "
                  << "prior_trajectories.svg\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int cmd_sweep(const std::vector<std::string>& args) {
    if (args.empty()) return usage_error("sweep requires a config file");
    std::string key, values_csv;
    std::vector<std::string> rest;
    for (size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--key" && i + 1 < args.size()) key = args[++i];
        else if (args[i] == "--values" && i + 1 < args.size()) values_csv = args[++i];
        else rest.push_back(args[i]);
    }
    if (key.empty() || values_csv.empty())
        return usage_error("sweep requires --key and --values");

    std::vector<std::string> values;
    std::stringstream ss(values_csv);
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(item);

    for (const std::string& v : values) {
        htr::RunConfig cfg;
        try {
            cfg = htr::parse_config_file(args[0]);
        } catch (const std::exception& e) {
            return usage_error(e.what());
        }
        if (auto err = apply_flag_overrides(cfg, rest, 0); !err.empty())
            return usage_error(err);
        try {
            htr::apply_override(cfg, key, v);
        } catch (const std::exception& e) {
            return usage_error(e.what());
        }
        if (!cfg.seed_set) return usage_error("sweep requires --seed");
        cfg.out_dir = (fs::path(cfg.out_dir) / (key + "=" + v)).string();
        try {
            htr::validate_config(cfg);
            std::cout << "sweep " << key << " = " << v << " -> " << cfg.out_dir << "\n";
            htr::Trainer trainer(cfg);
            trainer.run();
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 0;
}

int cmd_plot(const std::vector<std::string>& args) {
    if (args.empty()) return usage_error("plot requires a directory with metrics.csv");
    try {
        const fs::path dir = args[0];
        auto log = htr::parse_metrics_csv((dir / "metrics.csv").string());
        htr::emit_plots(log, dir.string());
        const fs::path traj = dir / "trajectories.csv";
        if (fs::exists(traj)) {
            std::ifstream in(traj);
            std::string line;
            std::getline(in, line);  // header
            std::vector<std::array<double, 2>> points;
            while (std::getline(in, line)) {
                const size_t comma = line.find(',');
                if (comma == std::string::npos) continue;
                points.push_back({std::stod(line.substr(0, comma)),
                                  std::stod(line.substr(comma + 1))});
            }
            htr::emit_trajectory_scatter(points, dir.string());
        }
        std::cout << "plots written to " << dir.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty()) return usage_error("missing subcommand");
    const std::string cmd = args[0];
    args.erase(args.begin());
    if (cmd == "train") return cmd_train(args);
    if (cmd == "eval") return cmd_eval(args);
    if (cmd == "sweep") return cmd_sweep(args);
    if (cmd == "plot") return cmd_plot(args);
    return usage_error("unknown subcommand '" + cmd + "'");
}
