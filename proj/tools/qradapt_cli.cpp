// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qradapt/error.hpp"
#include "qradapt/pipeline.hpp"
#include "qradapt/protocol.hpp"
#include "qradapt/run_spec.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;
using namespace qradapt;

struct SpecFlags {
    std::string config_file;
    std::string geometry_file;
    std::string space_bits;
    std::string space_ranks;
    std::uint64_t budget_bytes = 0;
    double budget_avg_bits = 0.0;
    std::string preset;
    std::size_t pop = 0;
    std::size_t gens = 0;
    std::size_t bo_iters = 0;
    int proxy_steps = 0;
    std::uint64_t seed = 0;
    std::string evaluator_cmd;
    bool synthetic = false;
    std::size_t layers = 0;
    bool skip1 = false;
    bool skip2 = false;
    bool skip3 = false;
    std::string out;
    bool deterministic = false;
    std::size_t parallel = 1;
    double timeout_s = 0.0;
    bool no_baseline = false;
};

void add_spec_options(CLI::App* cmd, SpecFlags& f, bool phase_flags) {
    cmd->add_option("--config", f.config_file, "JSON run document; flags override its values");
    cmd->add_option("--geometry", f.geometry_file, "JSON model geometry document");
    cmd->add_option("--space-bits", f.space_bits, "Admissible bit-widths, e.g. 2,4,8");
    cmd->add_option("--space-ranks", f.space_ranks, "Admissible ranks, e.g. 2,4,6,8");
    auto* bytes = cmd->add_option("--budget-bytes", f.budget_bytes, "Memory budget in bytes");
    cmd->add_option("--budget-avg-bits", f.budget_avg_bits, "Memory budget as a target average bit-width")
        ->excludes(bytes);
    cmd->add_option("--preset", f.preset, "Hyperparameter preset")
        ->check(CLI::IsMember({"appendix", "main-text"}));
    cmd->add_option("--pop", f.pop, "Population size");
    cmd->add_option("--gens", f.gens, "Generations");
    cmd->add_option("--bo-iters", f.bo_iters, "Refinement rounds per front member");
    cmd->add_option("--proxy-steps", f.proxy_steps, "Proxy tuning steps per evaluation");
    cmd->add_option("--seed", f.seed, "Search seed (QR_SEED overrides the run document)");
    auto* ext = cmd->add_option("--evaluator-cmd", f.evaluator_cmd, "External evaluator command line");
    cmd->add_flag("--synthetic", f.synthetic, "Use the built-in synthetic evaluator")->excludes(ext);
    cmd->add_option("--layers", f.layers, "Layer count of the synthetic evaluator");
    if (phase_flags) {
        cmd->add_flag("--skip-phase1", f.skip1, "Start from the median config instead of profiling");
        cmd->add_flag("--skip-phase2", f.skip2, "Skip the evolutionary search");
        cmd->add_flag("--skip-phase3", f.skip3, "Skip the Bayesian refinement");
        cmd->add_flag("--no-baseline", f.no_baseline, "Skip the uniform-config baseline sweep");
    }
    cmd->add_option("--out", f.out, "Report directory");
    cmd->add_flag("--deterministic", f.deterministic, "Serial evaluation in index order");
    cmd->add_option("--parallel", f.parallel, "Concurrent evaluations / evaluator processes");
    cmd->add_option("--timeout", f.timeout_s, "Per-evaluation timeout in seconds for external evaluators");
}

RunSpec build_spec(const CLI::App* cmd, const SpecFlags& f) {
    auto given = [&](const char* name) { return cmd->count(name) > 0; };

    json file = json::object();
    std::filesystem::path base_dir;
    if (given("--config")) {
        file = load_json_file(f.config_file);
        base_dir = std::filesystem::path(f.config_file).parent_path();
    }
    json flags = json::object();
    if (given("--geometry")) flags["geometry"] = f.geometry_file;
    if (given("--space-bits")) flags["space_bits"] = f.space_bits;
    if (given("--space-ranks")) flags["space_ranks"] = f.space_ranks;
    if (given("--budget-bytes")) flags["budget_bytes"] = f.budget_bytes;
    if (given("--budget-avg-bits")) flags["budget_avg_bits"] = f.budget_avg_bits;
    if (given("--pop")) flags["pop"] = f.pop;
    if (given("--gens")) flags["gens"] = f.gens;
    if (given("--bo-iters")) flags["bo_iters"] = f.bo_iters;
    if (given("--proxy-steps")) flags["proxy_steps"] = f.proxy_steps;
    if (given("--seed")) flags["seed"] = f.seed;
    if (given("--evaluator-cmd")) flags["evaluator_cmd"] = f.evaluator_cmd;
    if (given("--synthetic")) flags["synthetic"] = true;
    if (given("--layers")) flags["synthetic"] = json{{"layers", f.layers}};
    if (cmd->get_option_no_throw("--skip-phase1") && given("--skip-phase1")) flags["skip_phase1"] = true;
    if (cmd->get_option_no_throw("--skip-phase2") && given("--skip-phase2")) flags["skip_phase2"] = true;
    if (cmd->get_option_no_throw("--skip-phase3") && given("--skip-phase3")) flags["skip_phase3"] = true;
    if (cmd->get_option_no_throw("--no-baseline") && given("--no-baseline")) flags["uniform_baseline"] = false;
    if (given("--out")) flags["out"] = f.out;
    if (given("--deterministic")) flags["deterministic"] = true;
    if (given("--parallel")) flags["parallel"] = f.parallel;
    if (given("--timeout")) flags["timeout_s"] = f.timeout_s;

    const char* env = std::getenv("QR_SEED");
    return layered_run_spec(file, flags, given("--preset") ? std::optional<std::string>(f.preset) : std::nullopt,
                            env ? std::optional<std::string>(env) : std::nullopt, base_dir);
}

void print_individual(const char* label, const Individual& ind, const ModelGeometry& geometry) {
    std::printf("%-10s perf %.6f  memory %llu B  avg bit %.3f  avg rank %.3f\n", label,
                ind.result->performance, static_cast<unsigned long long>(ind.result->memory_bytes),
                average_bit(ind.config, geometry), average_rank(ind.config, geometry));
}

void print_report(const RunReport& report) {
    std::printf("budget: %llu bytes, %zu layers\n",
                static_cast<unsigned long long>(report.budget_bytes), report.geometry.size());
    if (report.seed_individual && report.seed_individual->ok()) {
        print_individual("seed", *report.seed_individual, report.geometry);
    }
    if (report.best) {
        print_individual("best", *report.best, report.geometry);
        std::printf("allocation (bit/rank):");
        for (const auto& lc : report.best->config.layers) {
            std::printf(" %d/%d", lc.bit, lc.rank);
        }
        std::printf("\n");
    }
    if (report.uniform_best) {
        std::printf("uniform baseline: %d-bit rank %d  perf %.6f\n", report.uniform_best->layer.bit,
                    report.uniform_best->layer.rank, report.uniform_best->performance);
    }
    if (report.pearson_r) {
        std::printf("pearson r (bits vs sensitivity): %.4f\n", *report.pearson_r);
    }
    std::printf("front size %zu, evaluator calls %zu, failed %zu\n", report.front.size(),
                report.stats.evaluator_calls, report.stats.failures);
    for (const auto& w : report.warnings) {
        std::fprintf(stderr, "warning: %s\n", w.c_str());
    }
    for (const auto& e : report.errors) {
        std::fprintf(stderr, "error: %s\n", e.c_str());
    }
}

int run_search(const RunSpec& spec) {
    auto evaluator = make_evaluator(spec);
    const RunReport report = run(spec, *evaluator);
    print_report(report);
    if (!spec.report_dir.empty()) {
        emit_reports(report, spec.report_dir);
        std::printf("reports written to %s\n", spec.report_dir.string().c_str());
    }
    return report.succeeded() ? 0 : 1;
}

int show_report(const std::string& dir) {
    const json summary = load_json_file(std::filesystem::path(dir) / "summary.json");
    std::cout << summary.dump(2) << '\n';
    std::ifstream pareto(std::filesystem::path(dir) / "pareto.csv");
    if (pareto) {
        std::cout << "\npareto front:\n" << pareto.rdbuf();
    }
    return summary.value("status", "failed") == "ok" ? 0 : 1;
}

int run_pilot(std::size_t layers, const std::string& out) {
    auto evaluator = SyntheticEvaluator::make_default(layers);
    const ModelGeometry geometry = evaluator.meta().geometry;
    std::string csv = "config,description,perf,memory_bytes,avg_bit,avg_rank\n";
    for (const auto& pilot : pilot_configs(layers)) {
        const double perf = evaluator.evaluate(pilot.config, kProxyStepsFull);
        const auto mem = memory_footprint(pilot.config, geometry);
        std::printf("%s  %-42s perf %.4f  memory %llu B  avg bit %.2f\n", pilot.name.c_str(),
                    pilot.description.c_str(), perf, static_cast<unsigned long long>(mem),
                    average_bit(pilot.config, geometry));
        char row[256];
        std::snprintf(row, sizeof row, "%s,%s,%.10g,%llu,%.10g,%.10g\n", pilot.name.c_str(),
                      pilot.description.c_str(), perf, static_cast<unsigned long long>(mem),
                      average_bit(pilot.config, geometry), average_rank(pilot.config, geometry));
        csv += row;
    }
    if (!out.empty()) {
        std::filesystem::create_directories(out);
        std::ofstream(std::filesystem::path(out) / "pilot.csv") << csv;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint bit-width and adapter-rank search under a memory budget"};
    app.require_subcommand(1);

    SpecFlags profile_flags;
    auto* profile_cmd = app.add_subcommand("profile", "Sensitivity profiling and the seed config only");
    add_spec_options(profile_cmd, profile_flags, false);

    SpecFlags search_flags;
    auto* search_cmd = app.add_subcommand("search", "Run the full search pipeline");
    add_spec_options(search_cmd, search_flags, true);

    std::string report_dir;
    auto* report_cmd = app.add_subcommand("report", "Print a report directory's summary");
    report_cmd->add_option("--out", report_dir, "Report directory")->required();

    std::size_t pilot_layers = 28;
    std::string pilot_out;
    auto* pilot_cmd = app.add_subcommand("pilot", "Four-config shallow/deep study on the synthetic evaluator");
    pilot_cmd->add_option("--layers", pilot_layers, "Layer count (even)");
    pilot_cmd->add_option("--out", pilot_out, "Directory for pilot.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (profile_cmd->parsed()) {
            RunSpec spec = build_spec(profile_cmd, profile_flags);
            spec.skip_phase1 = false;
            spec.skip_phase2 = true;
            spec.skip_phase3 = true;
            spec.uniform_baseline = false;
            return run_search(spec);
        }
        if (search_cmd->parsed()) {
            return run_search(build_spec(search_cmd, search_flags));
        }
        if (report_cmd->parsed()) {
            return show_report(report_dir);
        }
        if (pilot_cmd->parsed()) {
            return run_pilot(pilot_layers, pilot_out);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "qradapt: %s\n", e.what());
        return 2;
    }
    return 0;
}
