// Command-line entry point for the full pipeline: data generation,
// vocabulary induction, annotation, multi-objective pre-training, NLI
// fine-tuning, evaluation, gradient checking and the benchmark matrix.
//
// Exit codes: 0 success, 1 run failure, 2 configuration error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lipt/bench.hpp"
#include "lipt/checkpoint.hpp"
#include "lipt/common.hpp"
#include "lipt/config.hpp"
#include "lipt/corpus.hpp"
#include "lipt/datagen.hpp"
#include "lipt/dataset.hpp"
#include "lipt/evaluation.hpp"
#include "lipt/model.hpp"
#include "lipt/tokenizer.hpp"
#include "lipt/training.hpp"
#include "lipt/wordnet.hpp"

namespace fs = std::filesystem;
using namespace lipt;

namespace {

struct CliArgs {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir;
};

RunConfig load_config(const CliArgs& args) {
    RunConfig cfg = load_run_config(args.config_path);
    if (args.seed) cfg.model.seed = *args.seed;
    if (args.out_dir) cfg.out_dir = *args.out_dir;
    return cfg;
}

void require_file(const std::string& path, const char* what) {
    if (path.empty())
        throw ConfigError(concat("config: no ", what, " configured"));
    if (!fs::exists(path))
        throw ConfigError(concat(what, " not found: ", path));
}

fs::path prepare_out_dir(const RunConfig& cfg) {
    fs::path out(cfg.out_dir);
    fs::create_directories(out);
    std::ofstream echo(out / "config.echo");
    echo << canonical_config(cfg) << '\n';
    return out;
}

void print_hash(const RunConfig& cfg) {
    std::cout << "config_hash " << config_hash(cfg) << "\n";
}

std::vector<std::string> corpus_words(const std::vector<NliPair>& pairs) {
    std::vector<std::string> words;
    for (const auto& p : pairs) {
        for (auto& w : split_ws(p.premise)) words.push_back(w);
        for (auto& w : split_ws(p.hypothesis)) words.push_back(w);
    }
    return words;
}

// Annotates one corpus split into labeled pairs, interning synsets.
std::vector<LabeledPair> annotate_split(const std::string& corpus_path,
                                        CorpusFormat format, const WordnetIndex& wn,
                                        bool include_adverbs, SynsetSpace& space) {
    auto loaded = load_nli_corpus(corpus_path, format);
    log_info(concat("corpus ", corpus_path, ": ", loaded.pairs.size(), " pairs, ",
                    loaded.skipped, " lines skipped"));
    auto premises = load_conllu(DataConfig::conllu_path(corpus_path, "premise"));
    auto hypotheses = load_conllu(DataConfig::conllu_path(corpus_path, "hypothesis"));
    auto merged = merge_annotations(loaded.pairs, premises, hypotheses, wn, include_adverbs);
    for (const auto& w : merged.warnings) log_info(w);
    if (merged.dropped > 0)
        log_info(concat(corpus_path, ": dropped ", merged.dropped,
                        " pairs with mismatched annotations"));
    std::vector<LabeledPair> out;
    out.reserve(merged.pairs.size());
    for (const auto& ap : merged.pairs) out.push_back(to_labeled_pair(ap, space));
    return out;
}

struct LoadedData {
    Vocab vocab;
    SynsetSpace space;
    TrainData data;                         // encoded train/dev
    std::vector<EncodedSequence> test;      // encoded test (may be empty)
};

EncodeOptions encode_options(const RunConfig& cfg) {
    EncodeOptions opt;
    opt.max_len = static_cast<size_t>(cfg.model.max_len);
    opt.objectives = {Objective::Pos, Objective::Parent, Objective::Synset};
    opt.first_subtoken_only = cfg.training.first_subtoken_only;
    return opt;
}

std::map<Objective, int> head_dims_for(const RunConfig& cfg, const SynsetSpace& space) {
    return {
        {Objective::Pos, kNumUpos},
        {Objective::Parent, parent_num_classes(static_cast<size_t>(cfg.model.max_len))},
        {Objective::Synset, static_cast<int>(space.size())},
    };
}

// Loads vocab + labels files from the run directory and encodes all splits.
LoadedData load_encoded(const RunConfig& cfg, const fs::path& out) {
    LoadedData d;
    const fs::path vocab_path = out / "vocab.txt";
    if (!fs::exists(vocab_path))
        throw ConfigError(concat("vocab file missing (run build-vocab first): ",
                                 vocab_path.string()));
    d.vocab = load_vocab(vocab_path);

    const fs::path labels_path = out / "labels.ldj";
    if (!fs::exists(labels_path))
        throw ConfigError(concat("labels file missing (run annotate first): ",
                                 labels_path.string()));
    LabelsFile train = read_labels_file(labels_path);
    d.space = train.space;

    EncodeOptions opt = encode_options(cfg);
    auto encode_split = [&](const std::vector<LabeledPair>& pairs) {
        EncodedDataset enc = encode_dataset(pairs, d.vocab, opt);
        if (enc.truncated_pairs || enc.failed_pairs)
            log_info(concat("encode: ", enc.truncated_pairs, " truncated, ",
                            enc.failed_pairs, " failed"));
        return std::move(enc.seqs);
    };

    const fs::path dev_path = out / "labels.dev.ldj";
    if (fs::exists(dev_path)) {
        d.data.train = encode_split(train.pairs);
        d.data.dev = encode_split(read_labels_file(dev_path).pairs);
    } else {
        auto encoded = encode_split(train.pairs);
        auto [train_idx, dev_idx] =
            split_indices(encoded.size(), cfg.data.dev_fraction, cfg.data.split_seed);
        for (size_t i : train_idx) d.data.train.push_back(encoded[i]);
        for (size_t i : dev_idx) d.data.dev.push_back(encoded[i]);
    }
    const fs::path test_path = out / "labels.test.ldj";
    if (fs::exists(test_path)) d.test = encode_split(read_labels_file(test_path).pairs);
    return d;
}

Schedule schedule_from_config(const RunConfig& cfg) {
    Schedule s;
    s.combine_mode = combine_mode_from_string(cfg.training.combine_mode);
    for (const auto& name : cfg.training.objectives)
        s.phases.push_back({objective_from_string(name), cfg.training.pretrain_epochs});
    s.validate();
    return s;
}

TrainOptions train_options(const RunConfig& cfg) {
    TrainOptions t;
    t.batch_size = cfg.training.batch_size;
    t.patience = cfg.training.patience;
    t.lr_linear_decay = cfg.training.lr_linear_decay;
    t.loss_kind = loss_kind_from_string(cfg.training.loss);
    return t;
}

void write_stage_log(const fs::path& out, const char* stage, const TrainLog& log) {
    save_trainlog(out / concat("trainlog.", stage, ".ldj"), log);
    save_trainlog_sidecar(out / concat("trainlog.", stage, ".meta.json"), log);
    save_trainlog(out / "trainlog.ldj", log);
}

int cmd_gen_data(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    print_hash(cfg);
    if (cfg.datagen.kind != "captions")
        throw ConfigError(concat("datagen.kind '", cfg.datagen.kind,
                                 "' not supported (use \"captions\")"));
    datagen::write_caption_corpus(cfg.datagen.dir, cfg.datagen.train_pairs,
                                  cfg.datagen.dev_pairs, cfg.datagen.test_pairs,
                                  cfg.datagen.seed);
    std::cout << "wrote " << cfg.datagen.train_pairs << "/" << cfg.datagen.dev_pairs << "/"
              << cfg.datagen.test_pairs << " train/dev/test pairs to " << cfg.datagen.dir
              << "\n";
    return 0;
}

int cmd_build_vocab(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    print_hash(cfg);
    require_file(cfg.data.corpus, "training corpus");
    fs::path out = prepare_out_dir(cfg);
    auto loaded = load_nli_corpus(cfg.data.corpus,
                                  corpus_format_from_string(cfg.data.format));
    Vocab vocab = build_vocab(corpus_words(loaded.pairs), cfg.vocab.target_size,
                              cfg.vocab.min_freq);
    save_vocab(out / "vocab.txt", vocab);
    std::cout << "vocab size " << vocab.size() << " (target " << cfg.vocab.target_size
              << ", min_freq " << cfg.vocab.min_freq << ")\n";
    return 0;
}

int cmd_annotate(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    print_hash(cfg);
    require_file(cfg.data.corpus, "training corpus");
    require_file(DataConfig::conllu_path(cfg.data.corpus, "premise"), "premise annotation");
    require_file(DataConfig::conllu_path(cfg.data.corpus, "hypothesis"),
                 "hypothesis annotation");
    if (cfg.data.wordnet_dir.empty() || !fs::is_directory(cfg.data.wordnet_dir))
        throw ConfigError(concat("wordnet directory not found: ", cfg.data.wordnet_dir));
    fs::path out = prepare_out_dir(cfg);

    WordnetIndex wn = load_wordnet(cfg.data.wordnet_dir, cfg.data.wordnet_data);
    log_info(concat("wordnet: ", wn.entries.size(), " lemma entries, ",
                    wn.stats.malformed_skipped, " malformed lines skipped"));

    const CorpusFormat format = corpus_format_from_string(cfg.data.format);
    SynsetSpace space;
    auto train = annotate_split(cfg.data.corpus, format, wn, cfg.data.include_adverbs, space);
    std::vector<LabeledPair> dev, test;
    if (!cfg.data.dev_corpus.empty()) {
        require_file(cfg.data.dev_corpus, "dev corpus");
        dev = annotate_split(cfg.data.dev_corpus, format, wn, cfg.data.include_adverbs, space);
    }
    if (!cfg.data.test_corpus.empty()) {
        require_file(cfg.data.test_corpus, "test corpus");
        test = annotate_split(cfg.data.test_corpus, format, wn, cfg.data.include_adverbs,
                              space);
    }

    write_labels_file(out / "labels.ldj", train, space);
    if (!dev.empty()) write_labels_file(out / "labels.dev.ldj", dev, space);
    if (!test.empty()) write_labels_file(out / "labels.test.ldj", test, space);

    std::cout << "label spaces: POS " << kNumUpos << ", PP "
              << parent_num_classes(static_cast<size_t>(cfg.model.max_len)) << ", Syn "
              << space.size() << "\n";
    std::cout << "annotated " << train.size() << " train";
    if (!dev.empty()) std::cout << ", " << dev.size() << " dev";
    if (!test.empty()) std::cout << ", " << test.size() << " test";
    std::cout << " pairs\n";
    return 0;
}

int cmd_pretrain(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    print_hash(cfg);
    fs::path out = prepare_out_dir(cfg);
    LoadedData d = load_encoded(cfg, out);
    if (cfg.training.objectives.empty())
        throw ConfigError("config: training.objectives is empty; nothing to pre-train");

    ModelConfig mc = cfg.model;
    mc.vocab_size = static_cast<int>(d.vocab.size());
    mc.head_dims = head_dims_for(cfg, d.space);
    Model model = init_model(mc);

    const auto t0 = std::chrono::steady_clock::now();
    TrainLog log = pretrain(model, d.data, schedule_from_config(cfg), cfg.opt_pretrain,
                            train_options(cfg), mc.seed);
    log.config_hash = config_hash(cfg);
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    save_checkpoint(out / "ckpt.pretrained", model);
    write_stage_log(out, "pretrain", log);
    for (const auto& e : log.epochs)
        std::cout << e.phase << " epoch " << e.epoch << " dev " << e.objective
                  << " accuracy " << e.dev_accuracy << "\n";
    std::cout << "pretrained " << log.steps.size() << " steps -> "
              << (out / "ckpt.pretrained").string() << "\n";
    return 0;
}

int cmd_finetune(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    print_hash(cfg);
    fs::path out = prepare_out_dir(cfg);
    LoadedData d = load_encoded(cfg, out);

    Model model = [&] {
        const fs::path pre = out / "ckpt.pretrained";
        if (fs::exists(pre)) {
            log_info(concat("finetune: starting from ", pre.string()));
            return load_checkpoint(pre);
        }
        log_info("finetune: no pre-trained checkpoint, starting from random init");
        ModelConfig mc = cfg.model;
        mc.vocab_size = static_cast<int>(d.vocab.size());
        mc.head_dims = head_dims_for(cfg, d.space);
        return init_model(mc);
    }();

    const auto t0 = std::chrono::steady_clock::now();
    FinetuneResult res = finetune(model, d.data, cfg.opt_finetune,
                                  cfg.training.finetune_epochs, train_options(cfg),
                                  cfg.model.seed);
    res.log.config_hash = config_hash(cfg);
    res.log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    save_checkpoint(out / "ckpt.finetuned", model);
    write_stage_log(out, "finetune", res.log);
    std::cout << "best dev accuracy " << res.best_dev_accuracy << " at epoch "
              << res.best_epoch << " -> " << (out / "ckpt.finetuned").string() << "\n";
    return 0;
}

int cmd_evaluate(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    print_hash(cfg);
    fs::path out = prepare_out_dir(cfg);
    const fs::path ckpt = out / "ckpt.finetuned";
    if (!fs::exists(ckpt))
        throw ConfigError(concat("checkpoint missing (run finetune first): ", ckpt.string()));
    LoadedData d = load_encoded(cfg, out);
    if (d.test.empty())
        throw ConfigError("no test split (configure data.test_corpus and re-run annotate)");

    Model model = load_checkpoint(ckpt);
    Metrics m = evaluate(model, d.test, cfg.training.batch_size);

    RunReport report;
    ReportRow row;
    row.config_name = "evaluate";
    row.runs.push_back({model.cfg.seed, m});
    report.rows.push_back(row);
    std::ofstream(out / "report.txt") << render_report(report, ReportFormat::TextTable);
    std::ofstream(out / "report.csv") << render_report(report, ReportFormat::Csv);

    std::cout << "test accuracy " << m.accuracy << " F1(cont/ent/neut) " << m.f1[0] << "/"
              << m.f1[1] << "/" << m.f1[2] << " over " << m.total() << " pairs\n";
    return 0;
}

int cmd_gradcheck(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    print_hash(cfg);

    // Fixed tiny double-precision setup; independent of the configured model
    // size so the check stays fast.
    ModelConfig mc;
    mc.layers = 1;
    mc.heads = 2;
    mc.hidden = 16;
    mc.ff_mult = 2;
    mc.vocab_size = 40;
    mc.max_len = 12;
    mc.dropout = 0.0;
    mc.head_dims = {{Objective::Pos, 5}, {Objective::Parent, 13}, {Objective::Synset, 7}};
    mc.seed = cfg.model.seed;
    Model model = init_model(mc);

    std::mt19937_64 rng(cfg.model.seed + 1);
    Batch b;
    b.batch = 2;
    b.len = 8;
    const size_t R = b.batch * b.len;
    b.ids.resize(R);
    b.segments.resize(R);
    b.attn_mask.assign(R, 1);
    b.loss_mask.assign(R, 1);
    for (size_t i = 0; i < R; ++i) {
        const size_t t = i % b.len;
        b.ids[i] = t == 0 ? Vocab::kCls
                          : (t == 7 ? Vocab::kSep
                                    : std::uniform_int_distribution<int32_t>(4, 39)(rng));
        b.segments[i] = t >= 4 ? 1 : 0;
        if (t == 0 || t == 7) b.loss_mask[i] = 0;
    }
    // one PAD tail position to exercise masking
    b.ids[R - 1] = Vocab::kPad;
    b.attn_mask[R - 1] = 0;
    b.loss_mask[R - 1] = 0;
    auto rand_labels = [&](int classes) {
        std::vector<int32_t> l(R);
        for (size_t i = 0; i < R; ++i)
            l[i] = std::uniform_int_distribution<int32_t>(0, classes - 1)(rng);
        return l;
    };
    b.labels[Objective::Pos] = rand_labels(5);
    b.labels[Objective::Parent] = rand_labels(13);
    b.labels[Objective::Synset] = rand_labels(7);
    b.nli_gold = {0, 2};

    const double eps = 1e-4, tol = 1e-4;
    GradCheckReport report = grad_check(model, b, eps, tol);
    for (const auto& t : report.tensors)
        std::cout << t.tensor << " rel err " << t.max_rel_err << "\n";
    std::cout << "max rel err " << report.max_rel_err << " (tol " << tol << ")\n";
    return report.passed(tol) ? 0 : 1;
}

int cmd_bench(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    print_hash(cfg);
    fs::path out = prepare_out_dir(cfg);
    LoadedData d = load_encoded(cfg, out);
    if (d.test.empty())
        throw ConfigError("no test split (configure data.test_corpus and re-run annotate)");
    if (cfg.seeds.empty()) throw ConfigError("config: seeds list is empty");

    BenchSetup setup;
    setup.model_template = cfg.model;
    setup.model_template.vocab_size = static_cast<int>(d.vocab.size());
    setup.model_template.head_dims = head_dims_for(cfg, d.space);
    setup.opt_pretrain = cfg.opt_pretrain;
    setup.opt_finetune = cfg.opt_finetune;
    setup.topt = train_options(cfg);
    setup.pretrain_epochs = cfg.training.pretrain_epochs;
    setup.finetune_epochs = cfg.training.finetune_epochs;
    setup.combine_mode = combine_mode_from_string(cfg.training.combine_mode);

    std::vector<BenchConfig> configs;
    for (const auto& name : cfg.bench_configs)
        configs.push_back(bench_config_from_string(name));

    RunReport report = benchmark_matrix(d.data, d.test, setup, configs, cfg.seeds);
    std::string text = render_report(report, ReportFormat::TextTable);
    std::ofstream(out / "report.txt") << text;
    std::ofstream(out / "report.csv") << render_report(report, ReportFormat::Csv);
    std::cout << text;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"linguistically informed multi-objective pre-training workbench"};
    app.require_subcommand(1);

    CliArgs args;
    app.add_option("--config", args.config_path, "path to the run config (JSON)")
        ->required();
    uint64_t seed_opt = 0;
    auto* seed_flag = app.add_option("--seed", seed_opt, "override the model seed");
    std::string out_opt;
    auto* out_flag = app.add_option("--out", out_opt, "override the output directory");

    struct Sub {
        const char* name;
        const char* desc;
        int (*fn)(const CliArgs&);
    };
    const Sub subs[] = {
        {"gen-data", "generate the synthetic annotated corpus", cmd_gen_data},
        {"build-vocab", "induce the subword vocabulary", cmd_build_vocab},
        {"annotate", "merge corpus, parses and wordnet into label files", cmd_annotate},
        {"pretrain", "run the scheduled token objectives", cmd_pretrain},
        {"finetune", "fine-tune the NLI head on the [CLS] token", cmd_finetune},
        {"evaluate", "score a fine-tuned checkpoint on the test split", cmd_evaluate},
        {"gradcheck", "verify analytic gradients against finite differences", cmd_gradcheck},
        {"bench", "run the pre-training configuration matrix", cmd_bench},
    };
    std::map<std::string, int (*)(const CliArgs&)> dispatch;
    for (const auto& s : subs) {
        app.add_subcommand(s.name, s.desc);
        dispatch[s.name] = s.fn;
    }

    CLI11_PARSE(app, argc, argv);
    if (*seed_flag) args.seed = seed_opt;
    if (*out_flag) args.out_dir = out_opt;

    try {
        return dispatch.at(app.get_subcommands().front()->get_name())(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
