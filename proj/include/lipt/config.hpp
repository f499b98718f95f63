#pragma once

// Run configuration: JSON file parsing with defaults, canonical
// serialization (sorted keys, defaults materialized) and the stable hash
// every pipeline stage echoes.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lipt/common.hpp"
#include "lipt/model.hpp"
#include "lipt/optimizer.hpp"
#include "lipt/training.hpp"

namespace lipt {

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["layers"] = c.layers;
    j["heads"] = c.heads;
    j["hidden"] = c.hidden;
    j["ff_mult"] = c.ff_mult;
    j["vocab_size"] = c.vocab_size;
    j["max_len"] = c.max_len;
    j["dropout"] = c.dropout;
    j["seed"] = c.seed;
    nlohmann::json heads = nlohmann::json::object();
    for (const auto& [obj, dim] : c.head_dims) heads[std::string(to_string(obj))] = dim;
    j["head_dims"] = heads;
    return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.layers = j.value("layers", c.layers);
    c.heads = j.value("heads", c.heads);
    c.hidden = j.value("hidden", c.hidden);
    c.ff_mult = j.value("ff_mult", c.ff_mult);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.max_len = j.value("max_len", c.max_len);
    c.dropout = j.value("dropout", c.dropout);
    c.seed = j.value("seed", c.seed);
    if (j.contains("head_dims"))
        for (const auto& [key, dim] : j["head_dims"].items())
            c.head_dims[objective_from_string(key)] = dim.get<int>();
    return c;
}

inline nlohmann::json optimizer_config_to_json(const OptimizerConfig& c) {
    nlohmann::json j;
    j["lr"] = c.lr;
    j["betas"] = {c.betas.first, c.betas.second};
    j["eps"] = c.eps;
    j["weight_decay"] = c.weight_decay;
    return j;
}

inline OptimizerConfig optimizer_config_from_json(const nlohmann::json& j) {
    OptimizerConfig c;
    c.lr = j.value("lr", c.lr);
    if (j.contains("betas")) {
        c.betas.first = j["betas"].at(0).get<double>();
        c.betas.second = j["betas"].at(1).get<double>();
    }
    c.eps = j.value("eps", c.eps);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    return c;
}

struct DataConfig {
    std::string corpus;        // training split
    std::string format = "jsonl";
    std::string dev_corpus;    // optional; dev is split from train when empty
    std::string test_corpus;   // optional
    std::string wordnet_dir;
    bool wordnet_data = true;
    bool include_adverbs = true;
    double dev_fraction = 0.1;
    uint64_t split_seed = 1234;

    // <corpus-stem>.premise.conllu / <corpus-stem>.hypothesis.conllu
    static std::string conllu_path(const std::string& corpus_path, const char* side) {
        std::filesystem::path p(corpus_path);
        p.replace_extension();
        return p.string() + "." + side + ".conllu";
    }
};

struct VocabSection {
    size_t target_size = 2000;
    size_t min_freq = 2;
};

struct TrainSection {
    size_t batch_size = 32;
    int pretrain_epochs = 3;
    int finetune_epochs = 3;
    int patience = 3;
    std::string loss = "bce_onehot";
    bool first_subtoken_only = false;
    bool lr_linear_decay = false;
    std::string combine_mode = "sequential";
    std::vector<std::string> objectives; // pre-training combo, e.g. ["POS","Syn"]
};

struct DatagenSection {
    std::string kind = "captions";
    size_t train_pairs = 5000;
    size_t dev_pairs = 500;
    size_t test_pairs = 500;
    uint64_t seed = 7;
    std::string dir = "data";
};

struct RunConfig {
    DataConfig data;
    VocabSection vocab;
    ModelConfig model;
    OptimizerConfig opt_pretrain;
    OptimizerConfig opt_finetune;
    TrainSection training;
    DatagenSection datagen;
    std::vector<uint64_t> seeds{1, 2, 3};
    std::vector<std::string> bench_configs{"none", "POS", "PP",     "Syn",
                                           "POS+PP", "POS+Syn", "PP+Syn", "POS+PP+Syn"};
    std::string out_dir = "runs/default";

    RunConfig() {
        // Desk-scale optimizer defaults; the reference learning rates remain
        // available as OptimizerConfig::pretrain_paper()/finetune_paper().
        opt_pretrain.lr = 5e-4;
        opt_pretrain.weight_decay = 0.01;
        opt_finetune.lr = 3e-4;
        opt_finetune.weight_decay = 0.01;
    }
};

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json j;
    auto& d = j["data"] = nlohmann::json::object();
    d["corpus"] = c.data.corpus;
    d["format"] = c.data.format;
    d["dev_corpus"] = c.data.dev_corpus;
    d["test_corpus"] = c.data.test_corpus;
    d["wordnet_dir"] = c.data.wordnet_dir;
    d["wordnet_data"] = c.data.wordnet_data;
    d["include_adverbs"] = c.data.include_adverbs;
    d["dev_fraction"] = c.data.dev_fraction;
    d["split_seed"] = c.data.split_seed;
    auto& v = j["vocab"] = nlohmann::json::object();
    v["target_size"] = c.vocab.target_size;
    v["min_freq"] = c.vocab.min_freq;
    j["model"] = model_config_to_json(c.model);
    j["optimizer"]["pretrain"] = optimizer_config_to_json(c.opt_pretrain);
    j["optimizer"]["finetune"] = optimizer_config_to_json(c.opt_finetune);
    auto& t = j["training"] = nlohmann::json::object();
    t["batch_size"] = c.training.batch_size;
    t["pretrain_epochs"] = c.training.pretrain_epochs;
    t["finetune_epochs"] = c.training.finetune_epochs;
    t["patience"] = c.training.patience;
    t["loss"] = c.training.loss;
    t["first_subtoken_only"] = c.training.first_subtoken_only;
    t["lr_linear_decay"] = c.training.lr_linear_decay;
    t["combine_mode"] = c.training.combine_mode;
    t["objectives"] = c.training.objectives;
    auto& g = j["datagen"] = nlohmann::json::object();
    g["kind"] = c.datagen.kind;
    g["train_pairs"] = c.datagen.train_pairs;
    g["dev_pairs"] = c.datagen.dev_pairs;
    g["test_pairs"] = c.datagen.test_pairs;
    g["seed"] = c.datagen.seed;
    g["dir"] = c.datagen.dir;
    j["seeds"] = c.seeds;
    j["bench_configs"] = c.bench_configs;
    j["out_dir"] = c.out_dir;
    return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("data")) {
        const auto& d = j["data"];
        c.data.corpus = d.value("corpus", c.data.corpus);
        c.data.format = d.value("format", c.data.format);
        c.data.dev_corpus = d.value("dev_corpus", c.data.dev_corpus);
        c.data.test_corpus = d.value("test_corpus", c.data.test_corpus);
        c.data.wordnet_dir = d.value("wordnet_dir", c.data.wordnet_dir);
        c.data.wordnet_data = d.value("wordnet_data", c.data.wordnet_data);
        c.data.include_adverbs = d.value("include_adverbs", c.data.include_adverbs);
        c.data.dev_fraction = d.value("dev_fraction", c.data.dev_fraction);
        c.data.split_seed = d.value("split_seed", c.data.split_seed);
    }
    if (j.contains("vocab")) {
        c.vocab.target_size = j["vocab"].value("target_size", c.vocab.target_size);
        c.vocab.min_freq = j["vocab"].value("min_freq", c.vocab.min_freq);
    }
    if (j.contains("model")) c.model = model_config_from_json(j["model"]);
    if (j.contains("optimizer")) {
        if (j["optimizer"].contains("pretrain"))
            c.opt_pretrain = optimizer_config_from_json(j["optimizer"]["pretrain"]);
        if (j["optimizer"].contains("finetune"))
            c.opt_finetune = optimizer_config_from_json(j["optimizer"]["finetune"]);
    }
    if (j.contains("training")) {
        const auto& t = j["training"];
        c.training.batch_size = t.value("batch_size", c.training.batch_size);
        c.training.pretrain_epochs = t.value("pretrain_epochs", c.training.pretrain_epochs);
        c.training.finetune_epochs = t.value("finetune_epochs", c.training.finetune_epochs);
        c.training.patience = t.value("patience", c.training.patience);
        c.training.loss = t.value("loss", c.training.loss);
        c.training.first_subtoken_only =
            t.value("first_subtoken_only", c.training.first_subtoken_only);
        c.training.lr_linear_decay = t.value("lr_linear_decay", c.training.lr_linear_decay);
        c.training.combine_mode = t.value("combine_mode", c.training.combine_mode);
        if (t.contains("objectives"))
            c.training.objectives = t["objectives"].get<std::vector<std::string>>();
    }
    if (j.contains("datagen")) {
        const auto& g = j["datagen"];
        c.datagen.kind = g.value("kind", c.datagen.kind);
        c.datagen.train_pairs = g.value("train_pairs", c.datagen.train_pairs);
        c.datagen.dev_pairs = g.value("dev_pairs", c.datagen.dev_pairs);
        c.datagen.test_pairs = g.value("test_pairs", c.datagen.test_pairs);
        c.datagen.seed = g.value("seed", c.datagen.seed);
        c.datagen.dir = g.value("dir", c.datagen.dir);
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<uint64_t>>();
    if (j.contains("bench_configs"))
        c.bench_configs = j["bench_configs"].get<std::vector<std::string>>();
    c.out_dir = j.value("out_dir", c.out_dir);
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(concat("cannot open config file: ", path.string()));
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw ConfigError(concat("config file ", path.string(), " is not valid JSON"));
    try {
        return run_config_from_json(j);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(concat("config file ", path.string(), ": ", e.what()));
    }
}

// Canonical form: defaults materialized, keys sorted (nlohmann objects are
// ordered maps), compact dump. The hash is FNV-1a over those bytes.
inline std::string canonical_config(const RunConfig& c) {
    return run_config_to_json(c).dump();
}

inline std::string config_hash(const RunConfig& c) {
    return hex64(fnv1a64(canonical_config(c)));
}

} // namespace lipt
