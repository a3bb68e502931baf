#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hwsim/scenario.hpp"
#include "hwsim/sim_loop.hpp"

int main(int argc, char** argv) {
    CLI::App app{"hwsim - freeway charging-incentive traffic simulator"};

    std::string scenario_path;
    std::string out_dir = "out";
    std::string mode_str = "closed-loop";
    std::string schedule_str;
    long steps = 200;
    uint64_t seed = 0;
    bool seed_set = false;
    double epsilon = -1.0;

    app.add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    app.add_option("--seed", seed, "RNG seed (overrides the scenario)")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--steps", steps, "Number of CTM steps to simulate");
    app.add_option("--mode", mode_str, "closed-loop | ctm-only | single-game");
    app.add_option("--out-dir", out_dir, "Artifact directory");
    app.add_option("--epsilon", epsilon, "Improvement threshold override");
    app.add_option("--schedule", schedule_str,
                   "round_robin | fifo_replay | seeded_random");

    CLI11_PARSE(app, argc, argv);

    hwsim::RunMode mode;
    if (mode_str == "closed-loop") mode = hwsim::RunMode::ClosedLoop;
    else if (mode_str == "ctm-only") mode = hwsim::RunMode::CtmOnly;
    else if (mode_str == "single-game") mode = hwsim::RunMode::SingleGame;
    else {
        std::cerr << "unknown mode: " << mode_str << "\n";
        return 2;
    }

    hwsim::Scenario scenario;
    try {
        scenario = hwsim::load_scenario(scenario_path);
    } catch (const hwsim::ScenarioError& e) {
        std::cerr << e.what() << "\n";
        for (const auto& v : e.violations()) std::cerr << "  - " << v << "\n";
        return 2;
    } catch (const hwsim::ScenarioParseError& e) {
        std::cerr << e.what() << "\n";
        return 4;
    }

    if (seed_set) scenario.seed = seed;
    if (epsilon > 0.0) scenario.epsilon = epsilon;
    if (!schedule_str.empty()) {
        if (schedule_str == "round_robin") scenario.schedule = hwsim::Schedule::RoundRobin;
        else if (schedule_str == "fifo_replay") scenario.schedule = hwsim::Schedule::FifoReplay;
        else if (schedule_str == "seeded_random") scenario.schedule = hwsim::Schedule::SeededRandom;
        else {
            std::cerr << "unknown schedule: " << schedule_str << "\n";
            return 2;
        }
    }

    hwsim::Simulation sim(scenario, scenario.seed,
                          mode == hwsim::RunMode::ClosedLoop);
    try {
        if (mode == hwsim::RunMode::SingleGame)
            sim.run_single_game();
        else
            sim.run(steps);
    } catch (const hwsim::NonConvergenceError& e) {
        std::cerr << e.what() << "\n";
        hwsim::write_outputs(sim, out_dir, scenario_path, scenario.seed, steps, mode);
        return 3;
    }

    hwsim::write_outputs(sim, out_dir, scenario_path, scenario.seed, steps, mode);
    hwsim::RunSummary sum = sim.summary();
    std::cout << "steps=" << sum.steps << " vehicles=" << sum.vehicles_played
              << " stoppers=" << sum.stoppers
              << " energy_sold=" << sum.total_energy_sold
              << " delay_h=" << sum.total_delay_h
              << " baseline_delay_h=" << sum.baseline_delay_h << "\n";
    return 0;
}
