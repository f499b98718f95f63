#pragma once

// Training orchestration: multi-objective pre-training (sequential phases or
// a joint summed loss) followed by NLI fine-tuning with best-dev checkpoint
// selection. Runs are bitwise reproducible for a fixed (seed, config, data)
// triple on a single thread.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lipt/common.hpp"
#include "lipt/dataset.hpp"
#include "lipt/evaluation.hpp"
#include "lipt/model.hpp"
#include "lipt/optimizer.hpp"

namespace lipt {

struct Phase {
    Objective objective = Objective::Pos;
    int epochs = 1;
};

enum class CombineMode { Sequential, JointSum };

inline CombineMode combine_mode_from_string(std::string_view s) {
    if (s == "sequential") return CombineMode::Sequential;
    if (s == "joint_sum") return CombineMode::JointSum;
    throw ConfigError(concat("unknown combine mode: '", std::string(s), "'"));
}

inline std::string_view to_string(CombineMode m) {
    return m == CombineMode::Sequential ? "sequential" : "joint_sum";
}

struct Schedule {
    std::vector<Phase> phases;
    CombineMode combine_mode = CombineMode::Sequential;

    void validate(bool finetune_requested = false) const {
        for (size_t i = 0; i < phases.size(); ++i) {
            if (phases[i].epochs < 1)
                throw ConfigError(concat("schedule: phase ", i + 1, " has epochs < 1"));
            if (phases[i].objective == Objective::Nli && i + 1 != phases.size())
                throw ConfigError("schedule: NLI must be the last phase");
        }
        if (finetune_requested &&
            (phases.empty() || phases.back().objective != Objective::Nli))
            throw ConfigError("schedule: fine-tuning requested but last phase is not NLI");
    }

    // The pre-training portion (everything before a trailing NLI phase).
    std::vector<Phase> pretrain_phases() const {
        std::vector<Phase> out;
        for (const auto& p : phases)
            if (p.objective != Objective::Nli) out.push_back(p);
        return out;
    }
};

struct StepRecord {
    int64_t step = 0;
    std::string phase;
    std::string objective;
    double loss = 0.0;
};

struct EpochRecord {
    int epoch = 0;
    std::string phase;
    std::string objective;
    double dev_accuracy = 0.0;
};

struct TrainLog {
    uint64_t seed = 0;
    std::string config_hash;
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    double wall_seconds = 0.0; // serialized to the sidecar only
    int64_t next_step = 0;

    void log_step(const std::string& phase, const std::string& objective, double loss) {
        steps.push_back({next_step++, phase, objective, loss});
    }
    void append(TrainLog&& other) {
        for (auto& s : other.steps) {
            s.step = next_step++;
            steps.push_back(std::move(s));
        }
        for (auto& e : other.epochs) epochs.push_back(std::move(e));
        wall_seconds += other.wall_seconds;
    }
};

// Step/epoch records as line-delimited JSON. Wall time goes to a separate
// sidecar so the main log is byte-identical across replays.
inline void save_trainlog(const std::filesystem::path& path, const TrainLog& log) {
    std::ofstream os(path);
    if (!os) throw Error(concat("cannot write train log: ", path.string()));
    nlohmann::json header;
    header["type"] = "header";
    header["seed"] = log.seed;
    header["config_hash"] = log.config_hash;
    os << header.dump() << '\n';
    for (const auto& s : log.steps) {
        nlohmann::json j;
        j["type"] = "step";
        j["step"] = s.step;
        j["phase"] = s.phase;
        j["objective"] = s.objective;
        j["loss"] = s.loss;
        os << j.dump() << '\n';
    }
    for (const auto& e : log.epochs) {
        nlohmann::json j;
        j["type"] = "epoch";
        j["epoch"] = e.epoch;
        j["phase"] = e.phase;
        j["objective"] = e.objective;
        j["dev_accuracy"] = e.dev_accuracy;
        os << j.dump() << '\n';
    }
}

inline void save_trainlog_sidecar(const std::filesystem::path& path, const TrainLog& log) {
    std::ofstream os(path);
    if (!os) throw Error(concat("cannot write train log sidecar: ", path.string()));
    nlohmann::json j;
    j["wall_seconds"] = log.wall_seconds;
    os << j.dump(2) << '\n';
}

struct TrainData {
    std::vector<EncodedSequence> train;
    std::vector<EncodedSequence> dev;
};

struct TrainOptions {
    size_t batch_size = 32;
    int patience = 3;           // fine-tuning early stop on dev accuracy
    bool lr_linear_decay = false;
    LossKind loss_kind = LossKind::BceOnehot;
};

namespace detail {

inline std::string objectives_name(const std::set<Objective>& objectives) {
    std::string out;
    for (Objective o : objectives) {
        if (!out.empty()) out += "+";
        out += std::string(to_string(o));
    }
    return out;
}

// One pass over the training data in shuffled batches, accumulating
// gradients for the given objectives and stepping the optimizer.
inline void run_epoch(Model& model, const std::vector<EncodedSequence>& train,
                      const std::set<Objective>& objectives, AdamW& opt,
                      const TrainOptions& topt, double lr_scale,
                      const std::string& phase_name, const std::string& objective_name,
                      TrainLog& log, std::mt19937_64& rng) {
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<EncodedSequence> slot;
    ForwardTrace trace;
    for (size_t start = 0; start < order.size(); start += topt.batch_size) {
        const size_t n = std::min(topt.batch_size, order.size() - start);
        slot.clear();
        for (size_t i = 0; i < n; ++i) slot.push_back(train[order[start + i]]);
        Batch batch = make_batch(slot);
        model.zero_grad();
        BatchLoss loss = batch_loss(model, batch, objectives, topt.loss_kind,
                                    /*grad=*/true, trace, /*train_mode=*/true, &rng);
        opt.step(lr_scale);
        log.log_step(phase_name, objective_name, loss.total);
    }
}

inline void check_labels_present(const TrainData& data, Objective obj) {
    for (const auto& seq : data.train)
        if (!seq.labels.count(obj))
            throw Error(concat("pretrain: objective ", to_string(obj),
                               " has no projected labels in the training data"));
}

} // namespace detail

// Multi-objective pre-training. Sequential mode runs each phase's objective
// to completion in order with a fresh optimizer per phase; joint mode
// optimizes the unweighted sum of all scheduled objectives for
// max-over-phases epochs. The NLI head is never part of a pre-training
// parameter group, so it stays bit-identical.
inline TrainLog pretrain(Model& model, const TrainData& data, const Schedule& schedule,
                         const OptimizerConfig& opt_cfg, const TrainOptions& topt,
                         uint64_t seed) {
    schedule.validate();
    TrainLog log;
    log.seed = seed;
    const auto phases = schedule.pretrain_phases();
    if (phases.empty()) return log;

    for (const auto& phase : phases) {
        if (!model.cfg.head_dims.count(phase.objective))
            throw Error(concat("pretrain: no head registered for objective ",
                               to_string(phase.objective)));
        detail::check_labels_present(data, phase.objective);
    }

    std::mt19937_64 rng(seed);

    auto dev_eval = [&](const std::set<Objective>& objectives, const std::string& phase_name,
                        int epoch) {
        if (data.dev.empty()) return;
        for (Objective obj : objectives) {
            double acc = token_accuracy(model, data.dev, obj, topt.batch_size);
            log.epochs.push_back({epoch, phase_name, std::string(to_string(obj)), acc});
        }
    };

    if (schedule.combine_mode == CombineMode::Sequential) {
        for (size_t pi = 0; pi < phases.size(); ++pi) {
            const auto& phase = phases[pi];
            const std::set<Objective> objectives = {phase.objective};
            const std::string phase_name =
                concat("pretrain:", pi + 1, ":", to_string(phase.objective));
            AdamW opt(model.parameters_for(phase.objective), opt_cfg);
            const int total_epochs = phase.epochs;
            for (int epoch = 1; epoch <= total_epochs; ++epoch) {
                const double lr_scale =
                    topt.lr_linear_decay
                        ? 1.0 - static_cast<double>(epoch - 1) / total_epochs
                        : 1.0;
                detail::run_epoch(model, data.train, objectives, opt, topt, lr_scale,
                                  phase_name, std::string(to_string(phase.objective)),
                                  log, rng);
                dev_eval(objectives, phase_name, epoch);
            }
        }
    } else {
        std::set<Objective> objectives;
        int total_epochs = 0;
        std::vector<Param*> group = model.encoder_parameters();
        for (const auto& phase : phases) {
            if (objectives.insert(phase.objective).second) {
                auto& head = model.heads.at(phase.objective);
                group.push_back(&head.w);
                group.push_back(&head.b);
            }
            total_epochs = std::max(total_epochs, phase.epochs);
        }
        const std::string combo = detail::objectives_name(objectives);
        const std::string phase_name = concat("pretrain:joint:", combo);
        AdamW opt(group, opt_cfg);
        for (int epoch = 1; epoch <= total_epochs; ++epoch) {
            const double lr_scale =
                topt.lr_linear_decay ? 1.0 - static_cast<double>(epoch - 1) / total_epochs
                                     : 1.0;
            detail::run_epoch(model, data.train, objectives, opt, topt, lr_scale,
                              phase_name, combo, log, rng);
            dev_eval(objectives, phase_name, epoch);
        }
    }
    return log;
}

struct FinetuneResult {
    TrainLog log;
    double best_dev_accuracy = 0.0;
    int best_epoch = 0;
};

// NLI fine-tuning at the [CLS] head over the whole network (token heads
// excluded from the parameter group). The parameters from the best dev-
// accuracy epoch are restored at the end; training stops early after
// `patience` epochs without improvement.
inline FinetuneResult finetune(Model& model, const TrainData& data,
                               const OptimizerConfig& opt_cfg, int epochs,
                               const TrainOptions& topt, uint64_t seed) {
    if (epochs < 1) throw Error("finetune: epochs must be >= 1");
    if (data.train.empty()) throw Error("finetune: empty training data");
    if (data.dev.empty()) throw Error("finetune: dev set required for checkpoint selection");

    FinetuneResult res;
    res.log.seed = seed;
    std::mt19937_64 rng(seed);
    const std::set<Objective> objectives = {Objective::Nli};
    AdamW opt(model.parameters_for(Objective::Nli), opt_cfg);

    auto snapshot = [&model]() {
        std::vector<Tensor> out;
        Model& m = model;
        for (Param* p : m.parameters()) out.push_back(p->w);
        return out;
    };
    auto restore = [&model](const std::vector<Tensor>& snap) {
        size_t i = 0;
        for (Param* p : model.parameters()) p->w = snap[i++];
    };

    std::vector<Tensor> best = snapshot();
    res.best_dev_accuracy = evaluate(model, data.dev, topt.batch_size).accuracy;
    res.best_epoch = 0;
    int since_best = 0;

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        const double lr_scale =
            topt.lr_linear_decay ? 1.0 - static_cast<double>(epoch - 1) / epochs : 1.0;
        detail::run_epoch(model, data.train, objectives, opt, topt, lr_scale,
                          "finetune", "NLI", res.log, rng);
        const double acc = evaluate(model, data.dev, topt.batch_size).accuracy;
        res.log.epochs.push_back({epoch, "finetune", "NLI", acc});
        if (acc > res.best_dev_accuracy) {
            res.best_dev_accuracy = acc;
            res.best_epoch = epoch;
            best = snapshot();
            since_best = 0;
        } else if (++since_best >= topt.patience) {
            break;
        }
    }
    restore(best);
    return res;
}

} // namespace lipt
