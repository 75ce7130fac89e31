#include "aac/config.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "aac/errors.hpp"

namespace aac {

namespace {

namespace fs = std::filesystem;

void allow_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> keys) {
    if (!node) return;
    if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out) {
    if (!node || !node[key]) return;
    try {
        out = node[key].as<T>();
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

GridCell read_cell(const YAML::Node& n, const std::string& what) {
    if (!n.IsSequence() || n.size() != 2) throw ConfigError(what + " must be [x, y]");
    return {n[0].as<int>(), n[1].as<int>()};
}

TaskKind parse_kind(const std::string& s) {
    if (s == "gridworld") return TaskKind::gridworld;
    if (s == "random") return TaskKind::random_mdp;
    if (s == "chain") return TaskKind::chain;
    if (s == "mdp_file") return TaskKind::mdp_file;
    if (s == "cartpole") return TaskKind::cartpole;
    if (s == "acrobot") return TaskKind::acrobot;
    throw ConfigError("unknown task kind '" + s + "'");
}

void parse_task(const YAML::Node& n, const std::string& base_dir, TaskConfig& t) {
    if (!n) return;
    allow_keys(n, "task",
               {"kind", "width", "height", "walls", "goals", "step_penalty", "slip", "gamma", "start", "n_states",
                "n_actions", "sparsity", "reward_low", "reward_high", "seed", "length", "path", "max_steps",
                "force_mag"});
    std::string kind = "gridworld";
    read(n, "kind", kind);
    t.kind = parse_kind(kind);
    read(n, "max_steps", t.max_steps);
    switch (t.kind) {
        case TaskKind::gridworld: {
            auto& g = t.gridworld;
            read(n, "width", g.width);
            read(n, "height", g.height);
            read(n, "step_penalty", g.step_penalty);
            read(n, "slip", g.slip);
            read(n, "gamma", g.gamma);
            if (n["start"]) g.start = read_cell(n["start"], "start");
            if (n["walls"])
                for (const auto& w : n["walls"]) g.walls.push_back(read_cell(w, "wall"));
            if (n["goals"])
                for (const auto& goal : n["goals"]) {
                    allow_keys(goal, "goal", {"cell", "reward"});
                    GridGoal gg;
                    gg.cell = read_cell(goal["cell"], "goal cell");
                    read(goal, "reward", gg.reward);
                    g.goals.push_back(gg);
                }
            break;
        }
        case TaskKind::random_mdp: {
            auto& r = t.random;
            read(n, "n_states", r.n_states);
            read(n, "n_actions", r.n_actions);
            read(n, "gamma", r.gamma);
            read(n, "sparsity", r.sparsity);
            read(n, "reward_low", r.reward_low);
            read(n, "reward_high", r.reward_high);
            read(n, "seed", r.seed);
            break;
        }
        case TaskKind::chain:
            read(n, "length", t.chain_length);
            read(n, "gamma", t.chain_gamma);
            break;
        case TaskKind::mdp_file: {
            read(n, "path", t.mdp_path);
            if (t.mdp_path.empty()) throw ConfigError("mdp_file task needs a path");
            const fs::path p(t.mdp_path);
            if (p.is_relative()) t.mdp_path = (fs::path(base_dir) / p).string();
            break;
        }
        case TaskKind::cartpole:
            read(n, "force_mag", t.cartpole.force_mag);
            break;
        case TaskKind::acrobot:
            break;
    }
    if (t.max_steps <= 0) throw ConfigError("task.max_steps must be positive");
}

void parse_algorithm(const YAML::Node& n, ExperimentConfig& c) {
    if (!n) return;
    allow_keys(n, "algorithm",
               {"alpha", "epsilon", "gamma", "lr_actor", "lr_critic", "polyak_rho", "buffer_capacity",
                "batch_size", "steps_per_update", "target_update_interval", "learning_starts", "total_steps",
                "allow_extrapolation", "sampled_next_action", "hidden", "bias", "zero_init", "features",
                "solver"});
    auto& a = c.aac;
    read(n, "alpha", a.alpha);
    read(n, "epsilon", a.epsilon);
    read(n, "gamma", a.gamma);
    read(n, "lr_actor", a.lr_actor);
    read(n, "lr_critic", a.lr_critic);
    read(n, "polyak_rho", a.polyak_rho);
    read(n, "buffer_capacity", a.buffer_capacity);
    read(n, "batch_size", a.batch_size);
    read(n, "steps_per_update", a.steps_per_update);
    read(n, "target_update_interval", a.target_update_interval);
    read(n, "learning_starts", a.learning_starts);
    read(n, "total_steps", a.total_steps);
    read(n, "allow_extrapolation", a.allow_extrapolation);
    read(n, "sampled_next_action", a.sampled_next_action);
    read(n, "hidden", a.hidden);
    read(n, "bias", a.bias);
    read(n, "zero_init", a.zero_init);

    if (const auto f = n["features"]) {
        allow_keys(f, "algorithm.features", {"kind", "degree", "low", "high", "tiles", "tilings"});
        std::string kind = "identity";
        read(f, "kind", kind);
        if (kind == "identity")
            c.features.kind = FeatureKind::identity;
        else if (kind == "polynomial")
            c.features.kind = FeatureKind::polynomial;
        else if (kind == "tile_coding")
            c.features.kind = FeatureKind::tile_coding;
        else
            throw ConfigError("unknown feature kind '" + kind + "'");
        read(f, "degree", c.features.degree);
        read(f, "low", c.features.low);
        read(f, "high", c.features.high);
        read(f, "tiles", c.features.tiles);
        read(f, "tilings", c.features.tilings);
    }
    if (const auto s = n["solver"]) {
        allow_keys(s, "algorithm.solver", {"tol", "max_iter"});
        read(s, "tol", c.solver.tol);
        read(s, "max_iter", c.solver.max_iter);
        if (!(c.solver.tol > 0.0) || c.solver.max_iter <= 0) throw ConfigError("bad solver settings");
    }
}

void parse_sweep(const YAML::Node& n, SweepConfig& s) {
    if (!n) return;
    allow_keys(n, "sweep", {"epsilons", "epsilon_units", "seeds", "workers"});
    read(n, "epsilons", s.epsilons);
    std::string units = "absolute";
    read(n, "epsilon_units", units);
    if (units == "absolute")
        s.epsilon_per_alpha = false;
    else if (units == "inverse_alpha")
        s.epsilon_per_alpha = true;
    else
        throw ConfigError("epsilon_units must be 'absolute' or 'inverse_alpha'");
    if (const auto seeds = n["seeds"]) {
        if (seeds.IsScalar()) {
            const auto count = seeds.as<std::uint64_t>();
            s.seeds.clear();
            for (std::uint64_t i = 0; i < count; ++i) s.seeds.push_back(i);
        } else {
            s.seeds = seeds.as<std::vector<std::uint64_t>>();
        }
    }
    read(n, "workers", s.workers);
    if (s.workers <= 0) throw ConfigError("sweep.workers must be positive");
    if (std::set<std::uint64_t>(s.seeds.begin(), s.seeds.end()).size() != s.seeds.size())
        throw ConfigError("sweep seeds must be distinct");
}

void parse_output(const YAML::Node& n, OutputConfig& o) {
    if (!n) return;
    allow_keys(n, "output", {"directory", "checkpoint_interval", "snapshots", "return_window"});
    read(n, "directory", o.directory);
    read(n, "checkpoint_interval", o.checkpoint_interval);
    read(n, "snapshots", o.snapshots);
    read(n, "return_window", o.return_window);
    if (o.checkpoint_interval < 0 || o.return_window <= 0) throw ConfigError("bad output settings");
}

}  // namespace

std::vector<double> ExperimentConfig::resolved_epsilons() const {
    std::vector<double> out = sweep.epsilons;
    if (sweep.epsilon_per_alpha) {
        if (!(aac.alpha > 0.0)) throw ConfigError("epsilon_units: inverse_alpha needs alpha > 0");
        for (double& e : out) e /= aac.alpha;
    }
    return out;
}

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config is not valid YAML: ") + e.what());
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    allow_keys(root, "config", {"schema_version", "seed", "task", "algorithm", "sweep", "output", "verify"});

    ExperimentConfig c;
    try {
        read(root, "schema_version", c.schema_version);
        if (c.schema_version != kSchemaVersion)
            throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
        read(root, "seed", c.seed);
        parse_task(root["task"], base_dir, c.task);
        parse_algorithm(root["algorithm"], c);
        parse_sweep(root["sweep"], c.sweep);
        parse_output(root["output"], c.output);
        if (const auto v = root["verify"]) {
            allow_keys(v, "verify", {"instances"});
            read(v, "instances", c.verify_instances);
        }
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
    try {
        c.aac.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("algorithm: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), fs::path(path).parent_path().string());
}

TabularMdp load_mdp_file(const std::string& path) {
    YAML::Node n;
    try {
        n = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw ConfigError("cannot read model file " + path + ": " + e.what());
    }
    allow_keys(n, "model file", {"n_states", "n_actions", "gamma", "transition", "reward", "initial_dist"});
    try {
        const int ns = n["n_states"].as<int>();
        const int na = n["n_actions"].as<int>();
        const double gamma = n["gamma"].as<double>();
        if (ns <= 0 || na <= 0) throw ConfigError("model sizes must be positive");
        const auto t = n["transition"].as<std::vector<double>>();
        const auto r = n["reward"].as<std::vector<double>>();
        if (t.size() != std::size_t(ns) * na * ns) throw ConfigError("transition needs S*A*S values");
        if (r.size() != std::size_t(ns) * na) throw ConfigError("reward needs S*A values");
        Eigen::MatrixXd p(ns * na, ns);
        for (int row = 0; row < ns * na; ++row)
            for (int s = 0; s < ns; ++s) p(row, s) = t[std::size_t(row) * ns + s];
        Eigen::MatrixXd rew(ns, na);
        for (int s = 0; s < ns; ++s)
            for (int a = 0; a < na; ++a) rew(s, a) = r[std::size_t(s) * na + a];
        Eigen::VectorXd init = Eigen::VectorXd::Constant(ns, 1.0 / ns);
        if (n["initial_dist"]) {
            const auto d = n["initial_dist"].as<std::vector<double>>();
            if (d.size() != std::size_t(ns)) throw ConfigError("initial_dist needs S values");
            init = Eigen::Map<const Eigen::VectorXd>(d.data(), ns);
        }
        return TabularMdp(std::move(p), std::move(rew), gamma, std::move(init));
    } catch (const YAML::Exception& e) {
        throw ConfigError("malformed model file " + path + ": " + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError("invalid model in " + path + ": " + e.what());
    }
}

}  // namespace aac
