#include "htr/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace htr {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

long parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        long i = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return i;
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(static_cast<int>(parse_int(key, item)));
    }
    if (out.empty())
        throw std::invalid_argument("config key '" + key + "': expected a comma list of integers");
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string fmt(const std::vector<int>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

}  // namespace

void apply_override(RunConfig& c, const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "env.kind") {
        if (v == "point_robot") c.env.kind = EnvKind::point_robot;
        else if (v == "wheeled") c.env.kind = EnvKind::wheeled;
        else throw std::invalid_argument("config key 'env.kind': unknown environment '" + v + "'");
    } else if (key == "env.horizon") c.env.horizon = static_cast<int>(parse_int(key, v));
    else if (key == "env.goal_distance") c.env.goal_distance = parse_double(key, v);
    else if (key == "env.success_radius") c.env.success_radius = parse_double(key, v);
    else if (key == "env.reward_mode") {
        if (v == "sparse") c.env.reward_mode = RewardMode::sparse;
        else if (v == "dense") c.env.reward_mode = RewardMode::dense;
        else throw std::invalid_argument("config key 'env.reward_mode': expected sparse|dense");
    } else if (key == "env.control_cost_weight") c.env.control_cost_weight = parse_double(key, v);
    else if (key == "env.dt") c.env.dt = parse_double(key, v);
    else if (key == "run.n_train_tasks") c.n_train_tasks = static_cast<int>(parse_int(key, v));
    else if (key == "run.n_test_tasks") c.n_test_tasks = static_cast<int>(parse_int(key, v));
    else if (key == "run.meta_batch") c.meta_batch = static_cast<int>(parse_int(key, v));
    else if (key == "run.train_steps_per_iter") c.train_steps_per_iter = static_cast<int>(parse_int(key, v));
    else if (key == "run.episodes_per_task_per_iter") c.episodes_per_task_per_iter = static_cast<int>(parse_int(key, v));
    else if (key == "run.total_iters") c.total_iters = static_cast<int>(parse_int(key, v));
    else if (key == "run.latent_dim") c.latent_dim = static_cast<int>(parse_int(key, v));
    else if (key == "run.hidden") c.hidden = parse_int_list(key, v);
    else if (key == "run.encoder_hidden") c.encoder_hidden = parse_int_list(key, v);
    else if (key == "run.lr") c.lr = parse_double(key, v);
    else if (key == "run.oracle_dense") c.oracle_dense = parse_bool(key, v);
    else if (key == "run.seed") { c.seed = static_cast<uint64_t>(parse_int(key, v)); c.seed_set = true; }
    else if (key == "run.eval_interval") c.eval_interval = static_cast<int>(parse_int(key, v));
    else if (key == "run.eval_episodes_per_task") c.eval_episodes_per_task = static_cast<int>(parse_int(key, v));
    else if (key == "run.eval_task_limit") c.eval_task_limit = static_cast<int>(parse_int(key, v));
    else if (key == "run.checkpoint_interval") c.checkpoint_interval = static_cast<int>(parse_int(key, v));
    else if (key == "run.out_dir") c.out_dir = v;
    else if (key == "sac.alpha") c.sac.alpha = parse_double(key, v);
    else if (key == "sac.gamma") c.sac.gamma = parse_double(key, v);
    else if (key == "sac.tau") c.sac.tau = parse_double(key, v);
    else if (key == "sac.batch_size") c.batch_size = static_cast<int>(parse_int(key, v));
    else if (key == "context.size") c.context_size = static_cast<int>(parse_int(key, v));
    else if (key == "context.buffer_capacity") c.buffer_capacity = static_cast<size_t>(parse_int(key, v));
    else if (key == "context.recency_window") c.recency_window = static_cast<size_t>(parse_int(key, v));
    else if (key == "context.kl_weight") c.kl_weight = parse_double(key, v);
    else if (key == "relabel.enabled") c.relabel.enabled = parse_bool(key, v);
    else if (key == "relabel.K") c.relabel.K = parse_double(key, v);
    else if (key == "relabel.strategy") {
        if (v == "SER") c.relabel.strategy = RelabelStrategy::SER;
        else if (v == "EC") c.relabel.strategy = RelabelStrategy::EC;
        else throw std::invalid_argument("config key 'relabel.strategy': expected SER|EC");
    } else if (key == "relabel.anneal") c.relabel.anneal = parse_bool(key, v);
    else if (key == "relabel.anneal_steps") c.relabel.anneal_steps = parse_int(key, v);
    else if (key == "relabel.only_unsolved") c.relabel.only_unsolved = parse_bool(key, v);
    else if (key == "relabel.grid_angle_bins") c.relabel.grid_angle_bins = static_cast<int>(parse_int(key, v));
    else if (key == "relabel.grid_radius_bins") c.relabel.grid_radius_bins = static_cast<int>(parse_int(key, v));
    else if (key == "relabel.ec_explore_fraction") c.relabel.ec_explore_fraction = parse_double(key, v);
    else throw std::invalid_argument("unknown config key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected 'key = value'");
        apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    os << "env.kind = " << (c.env.kind == EnvKind::point_robot ? "point_robot" : "wheeled") << "\n";
    os << "env.horizon = " << c.env.horizon << "\n";
    os << "env.goal_distance = " << fmt(c.env.goal_distance) << "\n";
    os << "env.success_radius = " << fmt(c.env.success_radius) << "\n";
    os << "env.reward_mode = " << (c.env.reward_mode == RewardMode::sparse ? "sparse" : "dense") << "\n";
    os << "env.control_cost_weight = " << fmt(c.env.control_cost_weight) << "\n";
    os << "env.dt = " << fmt(c.env.dt) << "\n";
    os << "run.n_train_tasks = " << c.n_train_tasks << "\n";
    os << "run.n_test_tasks = " << c.n_test_tasks << "\n";
    os << "run.meta_batch = " << c.meta_batch << "\n";
    os << "run.train_steps_per_iter = " << c.train_steps_per_iter << "\n";
    os << "run.episodes_per_task_per_iter = " << c.episodes_per_task_per_iter << "\n";
    os << "run.total_iters = " << c.total_iters << "\n";
    os << "run.latent_dim = " << c.latent_dim << "\n";
    os << "run.hidden = " << fmt(c.hidden) << "\n";
    os << "run.encoder_hidden = " << fmt(c.encoder_hidden) << "\n";
    os << "run.lr = " << fmt(c.lr) << "\n";
    os << "run.oracle_dense = " << (c.oracle_dense ? "true" : "false") << "\n";
    if (c.seed_set) os << "run.seed = " << c.seed << "\n";
    os << "run.eval_interval = " << c.eval_interval << "\n";
    os << "run.eval_episodes_per_task = " << c.eval_episodes_per_task << "\n";
    os << "run.eval_task_limit = " << c.eval_task_limit << "\n";
    os << "run.checkpoint_interval = " << c.checkpoint_interval << "\n";
    os << "run.out_dir = " << c.out_dir << "\n";
    os << "sac.alpha = " << fmt(c.sac.alpha) << "\n";
    os << "sac.gamma = " << fmt(c.sac.gamma) << "\n";
    os << "sac.tau = " << fmt(c.sac.tau) << "\n";
    os << "sac.batch_size = " << c.batch_size << "\n";
    os << "context.size = " << c.context_size << "\n";
    os << "context.buffer_capacity = " << c.buffer_capacity << "\n";
    os << "context.recency_window = " << c.recency_window << "\n";
    os << "context.kl_weight = " << fmt(c.kl_weight) << "\n";
    os << "relabel.enabled = " << (c.relabel.enabled ? "true" : "false") << "\n";
    os << "relabel.K = " << fmt(c.relabel.K) << "\n";
    os << "relabel.strategy = " << (c.relabel.strategy == RelabelStrategy::SER ? "SER" : "EC") << "\n";
    os << "relabel.anneal = " << (c.relabel.anneal ? "true" : "false") << "\n";
    os << "relabel.anneal_steps = " << c.relabel.anneal_steps << "\n";
    os << "relabel.only_unsolved = " << (c.relabel.only_unsolved ? "true" : "false") << "\n";
    os << "relabel.grid_angle_bins = " << c.relabel.grid_angle_bins << "\n";
    os << "relabel.grid_radius_bins = " << c.relabel.grid_radius_bins << "\n";
    os << "relabel.ec_explore_fraction = " << fmt(c.relabel.ec_explore_fraction) << "\n";
    return os.str();
}

void validate_config(const RunConfig& c) {
    auto require = [](bool ok, const char* key, const char* what) {
        if (!ok)
            throw std::invalid_argument(std::string("invalid config: '") + key + "' " + what);
    };
    require(c.env.horizon >= 1, "env.horizon", "must be >= 1");
    require(c.env.goal_distance > c.env.success_radius, "env.goal_distance",
            "must exceed env.success_radius");
    require(c.env.success_radius > 0.0, "env.success_radius", "must be positive");
    require(c.env.dt > 0.0, "env.dt", "must be positive");
    require(c.n_train_tasks >= 1, "run.n_train_tasks", "must be >= 1");
    require(c.n_test_tasks >= 1, "run.n_test_tasks", "must be >= 1");
    require(c.meta_batch >= 1, "run.meta_batch", "must be >= 1");
    require(c.train_steps_per_iter >= 1, "run.train_steps_per_iter", "must be >= 1");
    require(c.episodes_per_task_per_iter >= 1, "run.episodes_per_task_per_iter", "must be >= 1");
    require(c.total_iters >= 0, "run.total_iters", "must be >= 0");
    require(c.latent_dim >= 1, "run.latent_dim", "must be >= 1");
    require(c.lr > 0.0, "run.lr", "must be positive");
    require(c.eval_interval >= 1, "run.eval_interval", "must be >= 1");
    require(c.eval_episodes_per_task >= 1, "run.eval_episodes_per_task", "must be >= 1");
    require(c.checkpoint_interval >= 1, "run.checkpoint_interval", "must be >= 1");
    require(c.sac.alpha > 0.0, "sac.alpha", "must be positive");
    require(c.sac.gamma > 0.0 && c.sac.gamma < 1.0, "sac.gamma", "must be in (0, 1)");
    require(c.sac.tau > 0.0 && c.sac.tau <= 1.0, "sac.tau", "must be in (0, 1]");
    require(c.batch_size >= 1, "sac.batch_size", "must be >= 1");
    require(c.context_size >= 1, "context.size", "must be >= 1");
    require(c.buffer_capacity >= 1, "context.buffer_capacity", "must be >= 1");
    require(c.kl_weight >= 0.0, "context.kl_weight", "must be >= 0");
    require(c.relabel.K >= 0.0 && c.relabel.K <= 1.0, "relabel.K", "must be in [0, 1]");
    require(c.relabel.grid_angle_bins >= 1, "relabel.grid_angle_bins", "must be >= 1");
    require(c.relabel.grid_radius_bins >= 1, "relabel.grid_radius_bins", "must be >= 1");
    require(c.relabel.ec_explore_fraction >= 0.0 && c.relabel.ec_explore_fraction <= 1.0,
            "relabel.ec_explore_fraction", "must be in [0, 1]");
    for (int w : c.hidden) require(w >= 1, "run.hidden", "widths must be >= 1");
    for (int w : c.encoder_hidden) require(w >= 1, "run.encoder_hidden", "widths must be >= 1");
}

}  // namespace htr
