#include "gibbsctrl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gibbsctrl/util.hpp"

namespace gibbsctrl {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, const std::string& key) {
    char* end = nullptr;
    double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("config: bad number '" + v + "' for " + key);
    return d;
}

long long parse_int(const std::string& v, const std::string& key) {
    char* end = nullptr;
    long long i = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("config: bad integer '" + v + "' for " + key);
    return i;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: bad boolean '" + v + "' for " + key);
}

std::vector<double> parse_list(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(item, key));
    }
    if (out.empty()) throw ConfigError("config: empty list for " + key);
    return out;
}

std::string list_to_string(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v[i]);
    }
    return out;
}

void assign_vec(Vec& target, const std::vector<double>& values, const std::string& key) {
    if (values.size() > kMaxDim) throw ConfigError("config: too many components for " + key);
    for (size_t i = 0; i < values.size(); ++i) target[i] = values[i];
    if (values.size() == 1) target[1] = values[0];  // scalar broadcast to both axes
}

// rebuilds the evaluator fields after descriptor changes
void finalize(ExperimentConfig& cfg) {
    Domain dom = cfg.problem.potential.domain();
    if (cfg.domain_kind == "ball") {
        dom.kind = Domain::Kind::ball;
    } else if (cfg.domain_kind == "box") {
        dom.kind = Domain::Kind::box;
    } else {
        throw ConfigError("config: domain must be ball or box, got " + cfg.domain_kind);
    }
    cfg.problem.potential = Potential(dom, cfg.problem.potential.epsilon(),
                                      cfg.problem.potential.amplitude(), cfg.smooth_ramp);

    if (cfg.terminal_kind == "abs_distance") {
        cfg.problem.costs.terminal_cost = abs_distance_field(cfg.problem.costs.target);
    } else if (cfg.terminal_kind == "constant") {
        cfg.problem.costs.terminal_cost = constant_field(cfg.terminal_constant);
    } else if (cfg.terminal_kind == "zero") {
        cfg.problem.costs.terminal_cost = constant_field(0.0);
    } else {
        throw ConfigError("config: terminal_cost must be abs_distance, constant or zero");
    }

    if (cfg.state_cost_kind == "zero") {
        cfg.problem.costs.state_cost = zero_field();
    } else {
        throw ConfigError("config: state_cost supports only 'zero' in config files");
    }

    if (cfg.action_kind == "whole") {
        cfg.problem.costs.actions.whole_space = true;
    } else if (cfg.action_kind == "box") {
        cfg.problem.costs.actions.whole_space = false;
    } else {
        throw ConfigError("config: action_set must be whole or box");
    }

    if (cfg.initial_kind == "point") {
        cfg.problem.init.kind = InitialMeasure::Kind::point;
    } else if (cfg.initial_kind == "gaussian") {
        cfg.problem.init.kind = InitialMeasure::Kind::gaussian;
    } else {
        throw ConfigError("config: initial must be point or gaussian");
    }

    cfg.problem.validate();
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"problem.dimension",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.problem.dim = static_cast<int>(parse_int(v, k));
         }},
        {"problem.horizon",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.problem.horizon = parse_double(v, k);
         }},
        {"problem.sigma",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.problem.sigma = parse_double(v, k);
         }},
        {"problem.domain",
         [](ExperimentConfig& c, const std::string& v, const std::string&) {
             c.domain_kind = v;
         }},
        {"problem.center",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             Domain d = c.problem.potential.domain();
             assign_vec(d.center, parse_list(v, k), k);
             c.problem.potential =
                 Potential(d, c.problem.potential.epsilon(), c.problem.potential.amplitude(),
                           c.smooth_ramp);
         }},
        {"problem.radius",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             Domain d = c.problem.potential.domain();
             d.radius = parse_double(v, k);
             c.problem.potential =
                 Potential(d, c.problem.potential.epsilon(), c.problem.potential.amplitude(),
                           c.smooth_ramp);
         }},
        {"problem.half_widths",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             Domain d = c.problem.potential.domain();
             assign_vec(d.half_widths, parse_list(v, k), k);
             c.problem.potential =
                 Potential(d, c.problem.potential.epsilon(), c.problem.potential.amplitude(),
                           c.smooth_ramp);
         }},
        {"problem.epsilon",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.problem.potential = Potential(c.problem.potential.domain(), parse_double(v, k),
                                             c.problem.potential.amplitude(), c.smooth_ramp);
         }},
        {"problem.amplitude",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.problem.potential = Potential(c.problem.potential.domain(),
                                             c.problem.potential.epsilon(), parse_double(v, k),
                                             c.smooth_ramp);
         }},
        {"problem.smooth_ramp",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.smooth_ramp = parse_bool(v, k);
         }},
        {"problem.x_star",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             assign_vec(c.problem.costs.target, parse_list(v, k), k);
         }},
        {"problem.terminal_cost",
         [](ExperimentConfig& c, const std::string& v, const std::string&) {
             c.terminal_kind = v;
         }},
        {"problem.terminal_constant",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.terminal_constant = parse_double(v, k);
         }},
        {"problem.state_cost",
         [](ExperimentConfig& c, const std::string& v, const std::string&) {
             c.state_cost_kind = v;
         }},
        {"problem.action_set",
         [](ExperimentConfig& c, const std::string& v, const std::string&) {
             c.action_kind = v;
         }},
        {"problem.action_lo",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             assign_vec(c.problem.costs.actions.lo, parse_list(v, k), k);
         }},
        {"problem.action_hi",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             assign_vec(c.problem.costs.actions.hi, parse_list(v, k), k);
         }},
        {"problem.initial",
         [](ExperimentConfig& c, const std::string& v, const std::string&) {
             c.initial_kind = v;
         }},
        {"problem.x0",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             assign_vec(c.problem.init.mean, parse_list(v, k), k);
         }},
        {"problem.init_stddev",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             assign_vec(c.problem.init.stddev, parse_list(v, k), k);
         }},
        {"solver.grid_points",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.solver.grid_points = static_cast<int>(parse_int(v, k));
         }},
        {"solver.time_steps",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.solver.time_steps = static_cast<int>(parse_int(v, k));
         }},
        {"solver.a_points",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.solver.a_points = static_cast<int>(parse_int(v, k));
         }},
        {"solver.tol_nonlocal",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.solver.tol_nonlocal = parse_double(v, k);
         }},
        {"solver.max_picard",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.solver.max_picard = static_cast<int>(parse_int(v, k));
         }},
        {"solver.picard_damping",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.solver.picard_damping = parse_double(v, k);
         }},
        {"solver.tol_mu",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.solver.tol_mu = parse_double(v, k);
         }},
        {"solver.tol_u",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.solver.tol_u = parse_double(v, k);
         }},
        {"solver.max_outer",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.solver.max_outer = static_cast<int>(parse_int(v, k));
         }},
        {"solver.fb_damping",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.solver.fb_damping = parse_double(v, k);
         }},
        {"solver.a_viscosity",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.solver.a_viscosity = parse_double(v, k);
         }},
        {"mc.n_train",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.mc.n_train = static_cast<int>(parse_int(v, k));
         }},
        {"mc.n_test",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.mc.n_test = static_cast<int>(parse_int(v, k));
         }},
        {"mc.steps",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.mc.steps = static_cast<int>(parse_int(v, k));
         }},
        {"mc.train_steps",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.mc.train_steps = static_cast<int>(parse_int(v, k));
         }},
        {"mc.iterations",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.mc.iterations = static_cast<int>(parse_int(v, k));
         }},
        {"mc.learning_rate",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.mc.learning_rate = parse_double(v, k);
         }},
        {"mc.repetitions",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.mc.repetitions = static_cast<int>(parse_int(v, k));
         }},
        {"mc.base_seed",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.mc.base_seed = static_cast<uint64_t>(parse_int(v, k));
         }},
        {"sweep.x0_list",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.sweep.x0_list = parse_list(v, k);
         }},
        {"sweep.amplitude_list",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.sweep.amplitude_list = parse_list(v, k);
         }},
        {"sweep.truncation_list",
         [](ExperimentConfig& c, const std::string& v, const std::string& k) {
             c.sweep.truncation_list = parse_list(v, k);
         }},
        {"output.directory",
         [](ExperimentConfig& c, const std::string& v, const std::string&) {
             c.out_dir = v;
         }},
    };
    return table;
}

}  // namespace

ExperimentConfig parse_experiment_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        size_t comment = line.find_first_of(";#");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = section + "." + trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        auto it = setters().find(key);
        if (it == setters().end())
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key +
                              "'");
        it->second(cfg, value, key);
    }
    finalize(cfg);
    return cfg;
}

ExperimentConfig parse_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_experiment_text(buf.str(), path);
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("config: unknown override key '" + key + "'");
    it->second(cfg, value, key);
    finalize(cfg);
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::string s;
    auto add = [&](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
    s += "[problem]\n";
    add("dimension", std::to_string(cfg.problem.dim));
    add("horizon", format_double(cfg.problem.horizon));
    add("sigma", format_double(cfg.problem.sigma));
    add("domain", cfg.domain_kind);
    {
        const Domain& d = cfg.problem.potential.domain();
        std::vector<double> c(d.center.begin(), d.center.begin() + cfg.problem.dim);
        add("center", list_to_string(c));
        if (cfg.domain_kind == "ball") {
            add("radius", format_double(d.radius));
        } else {
            std::vector<double> h(d.half_widths.begin(), d.half_widths.begin() + cfg.problem.dim);
            add("half_widths", list_to_string(h));
        }
    }
    add("epsilon", format_double(cfg.problem.potential.epsilon()));
    add("amplitude", format_double(cfg.problem.potential.amplitude()));
    add("smooth_ramp", cfg.smooth_ramp ? "true" : "false");
    {
        std::vector<double> t(cfg.problem.costs.target.begin(),
                              cfg.problem.costs.target.begin() + cfg.problem.dim);
        add("x_star", list_to_string(t));
    }
    add("terminal_cost", cfg.terminal_kind);
    if (cfg.terminal_kind == "constant")
        add("terminal_constant", format_double(cfg.terminal_constant));
    add("state_cost", cfg.state_cost_kind);
    add("action_set", cfg.action_kind);
    if (cfg.action_kind == "box") {
        std::vector<double> lo(cfg.problem.costs.actions.lo.begin(),
                               cfg.problem.costs.actions.lo.begin() + cfg.problem.dim);
        std::vector<double> hi(cfg.problem.costs.actions.hi.begin(),
                               cfg.problem.costs.actions.hi.begin() + cfg.problem.dim);
        add("action_lo", list_to_string(lo));
        add("action_hi", list_to_string(hi));
    }
    add("initial", cfg.initial_kind);
    {
        std::vector<double> m(cfg.problem.init.mean.begin(),
                              cfg.problem.init.mean.begin() + cfg.problem.dim);
        add("x0", list_to_string(m));
        if (cfg.initial_kind == "gaussian") {
            std::vector<double> sd(cfg.problem.init.stddev.begin(),
                                   cfg.problem.init.stddev.begin() + cfg.problem.dim);
            add("init_stddev", list_to_string(sd));
        }
    }
    s += "[solver]\n";
    add("grid_points", std::to_string(cfg.solver.grid_points));
    add("time_steps", std::to_string(cfg.solver.time_steps));
    add("a_points", std::to_string(cfg.solver.a_points));
    add("tol_nonlocal", format_double(cfg.solver.tol_nonlocal));
    add("max_picard", std::to_string(cfg.solver.max_picard));
    add("picard_damping", format_double(cfg.solver.picard_damping));
    add("tol_mu", format_double(cfg.solver.tol_mu));
    add("tol_u", format_double(cfg.solver.tol_u));
    add("max_outer", std::to_string(cfg.solver.max_outer));
    add("fb_damping", format_double(cfg.solver.fb_damping));
    add("a_viscosity", format_double(cfg.solver.a_viscosity));
    s += "[mc]\n";
    add("n_train", std::to_string(cfg.mc.n_train));
    add("n_test", std::to_string(cfg.mc.n_test));
    add("steps", std::to_string(cfg.mc.steps));
    add("train_steps", std::to_string(cfg.mc.train_steps));
    add("iterations", std::to_string(cfg.mc.iterations));
    add("learning_rate", format_double(cfg.mc.learning_rate));
    add("repetitions", std::to_string(cfg.mc.repetitions));
    add("base_seed", std::to_string(cfg.mc.base_seed));
    s += "[sweep]\n";
    add("x0_list", list_to_string(cfg.sweep.x0_list));
    add("amplitude_list", list_to_string(cfg.sweep.amplitude_list));
    add("truncation_list", list_to_string(cfg.sweep.truncation_list));
    s += "[output]\n";
    add("directory", cfg.out_dir);
    return s;
}

uint64_t config_hash(const ExperimentConfig& cfg) {
    return fnv1a(serialize_config(cfg));
}

}  // namespace gibbsctrl
