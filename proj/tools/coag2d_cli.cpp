#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iterator>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "coag2d/errors.hpp"
#include "coag2d/experiments.hpp"
#include "coag2d/moments.hpp"
#include "coag2d/selfsim.hpp"
#include "coag2d/series.hpp"

using namespace coag2d;

namespace {

struct CommonFlags {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicas;
    std::optional<std::size_t> n_particles;
    std::optional<double> t_end;
    std::optional<std::string> frame;
    std::string out = "out";
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--seed", f.seed, "Base RNG seed");
    cmd->add_option("--replicas", f.replicas, "Number of independent replicas");
    cmd->add_option("--n-particles", f.n_particles, "Particles per replica");
    cmd->add_option("--t-end", f.t_end, "Final time");
    cmd->add_option("--frame", f.frame, "physical or selfsim")
        ->check(CLI::IsMember({"physical", "selfsim"}));
    cmd->add_option("--out", f.out, "Output directory");
}

void apply(const CommonFlags& f, ScenarioOverrides& o) {
    if (f.seed) o.seed = f.seed;
    if (f.replicas) o.replicas = f.replicas;
    if (f.n_particles) o.n_particles = f.n_particles;
    if (f.t_end) o.t_end = f.t_end;
    if (f.frame) o.frame = frame_from_string(*f.frame);
}

int execute(const Scenario& s, const std::string& out) {
    const auto outcome = run_scenario(s, out);
    std::cout << "scenario " << to_string(s.name) << " (" << to_string(s.engine.frame) << ", "
              << s.replicas << " replicas)\n"
              << outcome.report.table() << "\nresult: " << (outcome.passed ? "PASS" : "FAIL")
              << "\noutputs in " << out << '\n';
    return outcome.passed ? 0 : 1;
}

int analyze(const std::vector<std::string>& files, std::optional<double> gamma) {
    std::vector<MomentSeries> series;
    for (const auto& f : files) series.push_back(MomentSeries::read_csv(f));
    const auto summary = summarize(series);
    const auto& keys = summary.mean.keys();
    std::cout << "clock";
    for (const auto& k : keys) std::cout << ',' << k.name() << ',' << k.name() << "_sem";
    std::cout << '\n';
    const double xi = gamma ? scaling_xi(*gamma) : 0.0;
    for (std::size_t i = 0; i < summary.mean.size(); ++i) {
        const double t = summary.mean.rows()[i].clock;
        std::cout << format_double(t);
        for (std::size_t c = 0; c < keys.size(); ++c) {
            double scale = 1.0;
            if (gamma) scale = std::pow(1.0 + t, -xi * (2.0 * keys[c].k / 3.0 + keys[c].l - 1.0));
            std::cout << ',' << format_double(summary.mean.rows()[i].moments[c] * scale) << ','
                      << format_double(summary.sem.rows()[i].moments[c] * scale);
        }
        std::cout << '\n';
    }
    return 0;
}

int profile(const std::vector<std::string>& files) {
    std::vector<RescaledSnapshot> snaps;
    for (const auto& f : files) snaps.push_back(RescaledSnapshot::read_csv(f));
    std::cout << "clock_from,clock_to,l1_distance,overflow_fraction\n";
    for (std::size_t i = 0; i + 1 < snaps.size(); ++i) {
        std::cout << format_double(snaps[i].clock) << ',' << format_double(snaps[i + 1].clock) << ','
                  << format_double(profile_distance(snaps[i], snaps[i + 1])) << ','
                  << format_double(snaps[i + 1].overflow_mass / snaps[i + 1].total_mass) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-component coagulation with fusion: particle simulation and diagnostics"};
    app.require_subcommand(1);

    app.add_subcommand("list", "List the scenario presets");

    auto* run = app.add_subcommand("run", "Run a scenario preset and write its report");
    std::string scenario_name;
    run->add_option("scenario", scenario_name, "Scenario preset")->required();
    CommonFlags run_flags;
    add_common(run, run_flags);

    auto* sim = app.add_subcommand("simulate", "Run a scenario described by a JSON config");
    std::string config_path;
    sim->add_option("config", config_path, "JSON config with a 'scenario' key")
        ->required()
        ->check(CLI::ExistingFile);
    CommonFlags sim_flags;
    add_common(sim, sim_flags);

    auto* an = app.add_subcommand("analyze", "Replica mean and sem of recorded moment series");
    std::vector<std::string> series_files;
    an->add_option("series", series_files, "Series CSV files, one per replica")
        ->required()
        ->check(CLI::ExistingFile);
    std::optional<double> gamma;
    an->add_option("--rescale-gamma", gamma, "Print rescaled moments for this homogeneity");

    auto* pr = app.add_subcommand("profile", "Distances between successive rescaled profiles");
    std::vector<std::string> snapshot_files;
    pr->add_option("snapshots", snapshot_files, "Profile CSV files in time order")
        ->required()
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("list")) {
            for (auto n : {ScenarioName::SelfSimMuPos, ScenarioName::FastFusion, ScenarioName::Ramification,
                           ScenarioName::OracleConstantKernel, ScenarioName::PureFusion}) {
                const auto s = make_scenario(n);
                std::cout << to_string(n) << "  frame=" << to_string(s.engine.frame)
                          << " replicas=" << s.replicas << " n=" << s.engine.n_particles
                          << " t_end=" << s.engine.t_end << '\n';
            }
            return 0;
        }
        if (app.got_subcommand("run")) {
            ScenarioOverrides o;
            apply(run_flags, o);
            return execute(make_scenario(scenario_from_string(scenario_name), o), run_flags.out);
        }
        if (app.got_subcommand("simulate")) {
            Scenario base = scenario_from_config_file(config_path);
            ScenarioOverrides o;
            apply(sim_flags, o);
            const bool any = o.seed || o.replicas || o.n_particles || o.t_end || o.frame;
            if (!any) return execute(base, sim_flags.out);
            std::ifstream is(config_path);
            const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
            auto file = ScenarioOverrides::from_json(text);
            if (o.seed) file.seed = o.seed;
            if (o.replicas) file.replicas = o.replicas;
            if (o.n_particles) file.n_particles = o.n_particles;
            if (o.t_end) file.t_end = o.t_end;
            if (o.frame) file.frame = o.frame;
            return execute(make_scenario(base.name, file), sim_flags.out);
        }
        if (app.got_subcommand("analyze")) return analyze(series_files, gamma);
        if (app.got_subcommand("profile")) return profile(snapshot_files);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 2;
    }
    return 0;
}
