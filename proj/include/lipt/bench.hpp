#pragma once

// Benchmark matrix over pre-training configurations: for each (config, seed)
// the pipeline runs init -> pretrain -> finetune -> evaluate from an
// identical seed-determined initialization, so rows differ only in their
// pre-training. Reports render as a text table (percentages, one decimal)
// or per-seed CSV rows with raw fractions.

#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "lipt/common.hpp"
#include "lipt/evaluation.hpp"
#include "lipt/training.hpp"

namespace lipt {

struct BenchConfig {
    std::string name;                  // "none", "POS+Syn", ...
    std::vector<Objective> objectives; // empty = no additional pre-training
};

// Accepts "none" or a '+'-joined combination of POS, PP, Syn.
inline BenchConfig bench_config_from_string(const std::string& s) {
    BenchConfig c;
    c.name = s;
    if (s == "none" || s.empty()) {
        c.name = "none";
        return c;
    }
    for (const auto& part : split(s, '+')) {
        Objective obj = objective_from_string(std::string(trim(part)));
        if (obj == Objective::Nli)
            throw ConfigError("bench config: NLI cannot be a pre-training objective");
        c.objectives.push_back(obj);
    }
    return c;
}

struct SeedRun {
    uint64_t seed = 0;
    Metrics metrics;
};

struct ReportRow {
    std::string config_name;
    std::vector<SeedRun> runs;
    std::vector<std::string> errors;

    double mean_accuracy() const { return mean([](const Metrics& m) { return m.accuracy; }); }
    double std_accuracy() const { return stddev([](const Metrics& m) { return m.accuracy; }); }
    double mean_f1(int cls) const {
        return mean([cls](const Metrics& m) { return m.f1[static_cast<size_t>(cls)]; });
    }
    double std_f1(int cls) const {
        return stddev([cls](const Metrics& m) { return m.f1[static_cast<size_t>(cls)]; });
    }

    template <class F>
    double mean(F f) const {
        if (runs.empty()) return 0.0;
        double s = 0.0;
        for (const auto& r : runs) s += f(r.metrics);
        return s / static_cast<double>(runs.size());
    }
    // Sample standard deviation; 0 for a single seed.
    template <class F>
    double stddev(F f) const {
        if (runs.size() < 2) return 0.0;
        const double mu = mean(f);
        double s = 0.0;
        for (const auto& r : runs) {
            const double d = f(r.metrics) - mu;
            s += d * d;
        }
        return std::sqrt(s / static_cast<double>(runs.size() - 1));
    }
};

struct RunReport {
    std::vector<ReportRow> rows;
    CombineMode combine_mode = CombineMode::Sequential;
};

struct BenchSetup {
    ModelConfig model_template; // head_dims must cover all three token objectives
    OptimizerConfig opt_pretrain;
    OptimizerConfig opt_finetune;
    TrainOptions topt;
    int pretrain_epochs = 3;
    int finetune_epochs = 3;
    CombineMode combine_mode = CombineMode::Sequential;
};

// One full run for one configuration and seed.
inline Metrics run_bench_cell(const BenchConfig& config, uint64_t seed,
                              const TrainData& data,
                              std::span<const EncodedSequence> test,
                              const BenchSetup& setup) {
    ModelConfig cfg = setup.model_template;
    cfg.seed = seed;
    Model model = init_model(cfg);
    if (!config.objectives.empty()) {
        Schedule schedule;
        schedule.combine_mode = setup.combine_mode;
        for (Objective obj : config.objectives)
            schedule.phases.push_back({obj, setup.pretrain_epochs});
        pretrain(model, data, schedule, setup.opt_pretrain, setup.topt, seed);
    }
    finetune(model, data, setup.opt_finetune, setup.finetune_epochs, setup.topt, seed);
    return evaluate(model, test, setup.topt.batch_size);
}

// Runs every (config, seed) cell; a baseline row is always included. A
// failing run is recorded on its row and does not abort the matrix.
inline RunReport benchmark_matrix(const TrainData& data,
                                  std::span<const EncodedSequence> test,
                                  const BenchSetup& setup,
                                  const std::vector<BenchConfig>& configs,
                                  const std::vector<uint64_t>& seeds) {
    if (configs.empty()) throw Error("benchmark_matrix: empty config list");
    if (seeds.empty()) throw Error("benchmark_matrix: empty seed list");

    std::vector<BenchConfig> all = configs;
    const bool has_baseline =
        std::any_of(all.begin(), all.end(),
                    [](const BenchConfig& c) { return c.objectives.empty(); });
    if (!has_baseline) all.insert(all.begin(), bench_config_from_string("none"));

    RunReport report;
    report.combine_mode = setup.combine_mode;
    for (const auto& config : all) {
        ReportRow row;
        row.config_name = config.name;
        for (uint64_t seed : seeds) {
            try {
                Metrics m = run_bench_cell(config, seed, data, test, setup);
                row.runs.push_back({seed, m});
            } catch (const std::exception& e) {
                row.errors.push_back(concat("seed ", seed, ": ", e.what()));
            }
            log_info(concat("bench: ", config.name, " seed ", seed, " done"));
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

enum class ReportFormat { TextTable, Csv };

namespace detail {

inline std::string pct1(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", fraction * 100.0);
    return buf;
}

inline std::string full(double fraction) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", fraction);
    return buf;
}

} // namespace detail

// Text layout mirrors the class-wise report table: Config, Acc., F1 per
// class, percentages to one decimal, mean +/- sample std over seeds.
inline std::string render_report(const RunReport& r, ReportFormat format) {
    std::string out;
    if (format == ReportFormat::Csv) {
        out += "config,seed,accuracy,f1_contradiction,f1_entailment,f1_neutral\n";
        for (const auto& row : r.rows)
            for (const auto& run : row.runs)
                out += concat(row.config_name, ',', run.seed, ',',
                              detail::full(run.metrics.accuracy), ',',
                              detail::full(run.metrics.f1[0]), ',',
                              detail::full(run.metrics.f1[1]), ',',
                              detail::full(run.metrics.f1[2]), '\n');
        return out;
    }

    auto cell = [](const ReportRow& row, double mean, double sd) {
        if (row.runs.size() < 2) return detail::pct1(mean);
        return concat(detail::pct1(mean), " ± ", detail::pct1(sd));
    };
    std::vector<std::array<std::string, 5>> lines;
    lines.push_back({"Config", "Acc.", "F1 (Cont.)", "F1 (Ent.)", "F1 (Neut.)"});
    for (const auto& row : r.rows) {
        if (row.runs.empty()) {
            lines.push_back({row.config_name, "-", "-", "-", "-"});
            continue;
        }
        lines.push_back({row.config_name, cell(row, row.mean_accuracy(), row.std_accuracy()),
                         cell(row, row.mean_f1(0), row.std_f1(0)),
                         cell(row, row.mean_f1(1), row.std_f1(1)),
                         cell(row, row.mean_f1(2), row.std_f1(2))});
    }
    std::array<size_t, 5> width{};
    for (const auto& line : lines)
        for (size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], line[c].size());
    for (const auto& line : lines) {
        for (size_t c = 0; c < 5; ++c) {
            out += line[c];
            if (c + 1 < 5) out.append(width[c] - line[c].size() + 2, ' ');
        }
        out += '\n';
    }
    out += concat("combine mode: ", to_string(r.combine_mode), "\n");
    for (const auto& row : r.rows)
        for (const auto& err : row.errors)
            out += concat("note: ", row.config_name, " run failed: ", err, "\n");
    return out;
}

} // namespace lipt
