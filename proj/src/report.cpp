// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qradapt/error.hpp"
#include "qradapt/pipeline.hpp"
#include "qradapt/protocol.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qradapt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kReferenceCorrelation = 0.8;

std::string num(double v) {
    if (!std::isfinite(v)) {
        return "";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string config_cell(const ModelConfig& c) {
    std::string out;
    for (std::size_t l = 0; l < c.size(); ++l) {
        if (l > 0) {
            out += ';';
        }
        out += std::to_string(c[l].bit) + '/' + std::to_string(c[l].rank);
    }
    return out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json individual_json(const Individual& ind, const ModelGeometry& geometry) {
    json j{{"config", protocol::config_to_json(ind.config)},
           {"avg_bit", average_bit(ind.config, geometry)},
           {"avg_rank", average_rank(ind.config, geometry)},
           {"mean_rank", mean_rank(ind.config)}};
    if (ind.result) {
        j["performance"] = finite_or_null(ind.result->performance);
        j["memory_bytes"] = ind.result->memory_bytes;
        j["failed"] = ind.result->failed;
    }
    return j;
}

void write_atomically(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot open " + tmp.string() + " for writing");
        }
        out << content;
        out.flush();
        if (!out) {
            throw Error("failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

} // namespace

json summary_json(const RunReport& report) {
    json s;
    s["status"] = report.succeeded() ? "ok" : "failed";
    s["seed"] = report.seed;
    s["budget_bytes"] = report.budget_bytes;
    s["layers"] = report.geometry.size();
    s["space"] = json{{"bits", report.space.bits()}, {"ranks", report.space.ranks()}};
    s["phases"] = json{{"profile", report.phase1}, {"evolve", report.phase2}, {"refine", report.phase3}};
    s["best"] = report.best ? individual_json(*report.best, report.geometry) : json(nullptr);
    s["seed_config"] = report.seed_individual ? individual_json(*report.seed_individual, report.geometry)
                                              : json(nullptr);
    if (report.uniform_best) {
        const auto& u = *report.uniform_best;
        s["uniform_baseline"] = json{{"bit", u.layer.bit},
                                     {"rank", u.layer.rank},
                                     {"performance", u.performance},
                                     {"memory_bytes", u.memory_bytes}};
    } else {
        s["uniform_baseline"] = nullptr;
    }
    s["pearson_r_bits_vs_sensitivity"] =
        report.pearson_r ? json(*report.pearson_r) : json(nullptr);
    s["pearson_r_reference"] = kReferenceCorrelation;
    s["front_size"] = report.front.size();
    s["archive_size"] = report.archive_size;
    s["evaluator_calls"] = report.stats.evaluator_calls;
    s["failed_evaluations"] = report.stats.failures;
    s["total_proxy_steps"] = report.stats.proxy_steps_total;
    s["baseline_evaluations"] = report.baseline_evaluations;
    s["refine_rounds"] = report.refine_rounds.size();
    s["warnings"] = report.warnings;
    s["errors"] = report.errors;
    return s;
}

void emit_reports(const RunReport& report, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error("cannot create report directory " + dir.string() + ": " + ec.message());
    }

    std::ostringstream profile;
    profile << "layer,sensitivity,normalized\n";
    if (report.profile) {
        for (std::size_t l = 0; l < report.profile->size(); ++l) {
            profile << l << ',' << num(report.profile->scores[l]) << ','
                    << num(report.profile->normalized[l]) << '\n';
        }
    }

    std::ostringstream trace;
    trace << "phase,step,best_perf,evals\n";
    for (const auto& row : report.trace) {
        trace << row.phase << ',' << row.step << ',' << num(row.best_performance) << ','
              << row.evaluations << '\n';
    }

    std::ostringstream pareto;
    pareto << "perf,memory_bytes,avg_bit,avg_rank,config\n";
    for (const auto& ind : report.front) {
        pareto << num(ind.result->performance) << ',' << ind.result->memory_bytes << ','
               << num(average_bit(ind.config, report.geometry)) << ','
               << num(average_rank(ind.config, report.geometry)) << ',' << config_cell(ind.config)
               << '\n';
    }

    std::ostringstream generations;
    generations << "generation,best_perf,front_size,evals\n";
    for (const auto& g : report.generations) {
        generations << g.generation << ',' << num(g.best_performance) << ',' << g.front_size << ','
                    << g.evaluations << '\n';
    }

    std::ostringstream rounds;
    rounds << "member,round,ei,perf,memory_bytes,failed,config\n";
    for (const auto& r : report.refine_rounds) {
        rounds << r.member << ',' << r.round << ',' << num(r.ei) << ',' << num(r.performance) << ','
               << r.memory_bytes << ',' << (r.failed ? 1 : 0) << ',' << config_cell(r.candidate)
               << '\n';
    }

    std::ostringstream allocation;
    allocation << "layer,bit,rank\n";
    json best_config = nullptr;
    if (report.best) {
        for (std::size_t l = 0; l < report.best->config.size(); ++l) {
            allocation << l << ',' << report.best->config[l].bit << ','
                       << report.best->config[l].rank << '\n';
        }
        best_config = protocol::config_to_json(report.best->config);
    }

    write_atomically(dir / "profile.csv", profile.str());
    write_atomically(dir / "trace.csv", trace.str());
    write_atomically(dir / "pareto.csv", pareto.str());
    write_atomically(dir / "allocation.csv", allocation.str());
    write_atomically(dir / "generations.csv", generations.str());
    write_atomically(dir / "refine.csv", rounds.str());
    write_atomically(dir / "best_config.json", best_config.dump(2) + "\n");
    write_atomically(dir / "summary.json", summary_json(report).dump(2) + "\n");
}

} // namespace qradapt
