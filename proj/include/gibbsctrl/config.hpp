#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gibbsctrl/model.hpp"

namespace gibbsctrl {

struct SolverConfig {
    int grid_points = 285;       // nodes per axis of the evaluation box
    int time_steps = 200;
    int a_points = 41;           // a-axis nodes for the extended solvers
    double tol_nonlocal = 1e-8;
    int max_picard = 200;
    double picard_damping = 0.5;
    double tol_mu = 1e-6;
    double tol_u = 1e-6;
    int max_outer = 100;
    double fb_damping = 0.5;
    double a_viscosity = 0.0;
};

struct McConfig {
    int n_train = 100;
    int n_test = 1000;
    int steps = 200;        // Euler steps for testing / plain simulation
    int train_steps = 50;   // Euler steps during training
    int iterations = 800;   // gradient steps
    double learning_rate = 3e-3;
    int repetitions = 5;    // independent training repetitions
    uint64_t base_seed = 1;
};

struct SweepConfig {
    std::vector<double> x0_list{-1.25, -1.0, -0.75, -0.5, -0.25, 0.0,
                                0.25,  0.5,  0.75,  1.0,  1.25};
    std::vector<double> amplitude_list{1.0, 5.0, 25.0, 125.0};
    std::vector<double> truncation_list{0.5, 1.0, 2.0, 4.0, 8.0};
};

struct ExperimentConfig {
    ProblemConfig problem = default_problem();
    SolverConfig solver;
    McConfig mc;
    SweepConfig sweep;
    std::string out_dir = "out";

    // descriptor fields kept for round-tripping the resolved config
    std::string domain_kind = "ball";
    std::string terminal_kind = "abs_distance";
    double terminal_constant = 0.0;
    std::string state_cost_kind = "zero";
    std::string action_kind = "whole";
    std::string initial_kind = "point";
    bool smooth_ramp = false;
};

// Parses the flat-sectioned key = value format. Unknown sections or keys are
// rejected; ';' and '#' start comments.
ExperimentConfig parse_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_text(const std::string& text, const std::string& origin);

// key must be "section.name" as it appears in the file
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// canonical serialization (fixed key order); input for the config hash
std::string serialize_config(const ExperimentConfig& cfg);
uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace gibbsctrl
