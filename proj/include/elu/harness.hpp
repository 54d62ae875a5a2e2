#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "elu/common.hpp"
#include "elu/corpus.hpp"
#include "elu/metrics.hpp"
#include "elu/model.hpp"
#include "elu/probe.hpp"
#include "elu/svg.hpp"
#include "elu/unlearn.hpp"

namespace elu::harness {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct CorpusParams {
    std::uint64_t seed = 1;
    std::size_t n_entities = 10;
    std::size_t facts_per_entity = 20;
    std::size_t n_retain = 40;
    std::size_t n_world = 40;
};

struct ExperimentConfig {
    int schema_version = 1;
    CorpusParams corpus;
    lm::ModelConfig model;
    lm::TrainConfig train;
    lm::TrainConfig finetune;  // phase-2 injection in compare-phases
    probe::ProbeConfig probe_cfg;
    probe::DemoConfig demos;
    std::map<std::string, unlearn::UnlearnConfig> unlearn_cfgs;
    std::vector<double> coverage_ratios = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<int> size_axis = {5, 10, 15, 20};
    std::vector<std::string> analysis_algorithms = {"ga", "gd", "kl", "po", "npo_gd"};
    int entity_sample = 5;
    std::uint64_t seed = 1;
    std::string out_dir = "runs";
};

inline ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.model.layers = 2;
    cfg.model.width = 64;
    cfg.model.heads = 4;
    cfg.model.context_length = 64;
    cfg.train.learning_rate = 1e-3;
    cfg.train.weight_decay = 0.01;
    cfg.train.batch_size = 16;
    cfg.train.epochs = 40;
    cfg.train.warmup = 1.0;
    cfg.finetune = cfg.train;
    cfg.finetune.epochs = 25;
    for (auto a : {unlearn::Algorithm::GA, unlearn::Algorithm::GD, unlearn::Algorithm::KL,
                   unlearn::Algorithm::PO, unlearn::Algorithm::NPO_GD}) {
        unlearn::UnlearnConfig uc;
        uc.algorithm = a;
        cfg.unlearn_cfgs[unlearn::algorithm_name(a)] = uc;
    }
    return cfg;
}

/// Reseeds every component stream from one master seed.
inline void apply_master_seed(ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    cfg.corpus.seed = seed;
    cfg.train.seed = derive_seed(seed, 1);
    cfg.finetune.seed = derive_seed(seed, 2);
    cfg.probe_cfg.seed = derive_seed(seed, 3);
    cfg.demos.seed = derive_seed(seed, 4);
    for (auto& [name, uc] : cfg.unlearn_cfgs) uc.seed = derive_seed(seed, 5 + fnv1a64(name) % 97);
}

inline ordered_json train_to_json(const lm::TrainConfig& t) {
    return {{"learning_rate", t.learning_rate}, {"weight_decay", t.weight_decay},
            {"batch_size", t.batch_size},       {"epochs", t.epochs},
            {"warmup", t.warmup},               {"seed", t.seed}};
}

inline lm::TrainConfig train_from_json(const ordered_json& j, lm::TrainConfig t = {}) {
    if (j.contains("learning_rate")) t.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("weight_decay")) t.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("batch_size")) t.batch_size = j["batch_size"].get<int>();
    if (j.contains("epochs")) t.epochs = j["epochs"].get<int>();
    if (j.contains("warmup")) t.warmup = j["warmup"].get<double>();
    if (j.contains("seed")) t.seed = j["seed"].get<std::uint64_t>();
    return t;
}

inline ordered_json unlearn_to_json(const unlearn::UnlearnConfig& u) {
    return {{"algorithm", unlearn::algorithm_name(u.algorithm)},
            {"learning_rate", u.learning_rate},
            {"weight_decay", u.weight_decay},
            {"batch_size", u.batch_size},
            {"epochs", u.epochs},
            {"warmup", u.warmup},
            {"eval_every_steps", u.eval_every_steps},
            {"max_steps", u.max_steps},
            {"beta", u.beta},
            {"refusal_answers", u.refusal_answers},
            {"seed", u.seed}};
}

inline unlearn::UnlearnConfig unlearn_from_json(const ordered_json& j,
                                                unlearn::UnlearnConfig u = {}) {
    if (j.contains("algorithm")) u.algorithm = unlearn::parse_algorithm(j["algorithm"].get<std::string>());
    if (j.contains("learning_rate")) u.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("weight_decay")) u.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("batch_size")) u.batch_size = j["batch_size"].get<int>();
    if (j.contains("epochs")) u.epochs = j["epochs"].get<int>();
    if (j.contains("warmup")) u.warmup = j["warmup"].get<double>();
    if (j.contains("eval_every_steps")) u.eval_every_steps = j["eval_every_steps"].get<int>();
    if (j.contains("max_steps")) u.max_steps = j["max_steps"].get<long>();
    if (j.contains("beta")) u.beta = j["beta"].get<double>();
    if (j.contains("refusal_answers"))
        u.refusal_answers = j["refusal_answers"].get<std::vector<std::string>>();
    if (j.contains("seed")) u.seed = j["seed"].get<std::uint64_t>();
    return u;
}

inline ordered_json config_to_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["schema_version"] = cfg.schema_version;
    j["corpus"] = {{"seed", cfg.corpus.seed},
                   {"n_entities", cfg.corpus.n_entities},
                   {"facts_per_entity", cfg.corpus.facts_per_entity},
                   {"n_retain", cfg.corpus.n_retain},
                   {"n_world", cfg.corpus.n_world}};
    j["model"] = {{"layers", cfg.model.layers},
                  {"width", cfg.model.width},
                  {"heads", cfg.model.heads},
                  {"context_length", cfg.model.context_length},
                  {"init_std", cfg.model.init_std}};
    j["train"] = train_to_json(cfg.train);
    j["finetune"] = train_to_json(cfg.finetune);
    j["probe"] = {{"questions_per_round", cfg.probe_cfg.questions_per_round},
                  {"verify_rounds", cfg.probe_cfg.verify_rounds},
                  {"target_size", cfg.probe_cfg.target_size},
                  {"max_rounds", cfg.probe_cfg.max_rounds},
                  {"seed", cfg.probe_cfg.seed}};
    j["demos"] = {{"n_demo_entities", cfg.demos.n_demo_entities},
                  {"facts_per_demo", cfg.demos.facts_per_demo},
                  {"refusals_per_demo", cfg.demos.refusals_per_demo},
                  {"seed", cfg.demos.seed}};
    ordered_json ju;
    for (const auto& [name, uc] : cfg.unlearn_cfgs) ju[name] = unlearn_to_json(uc);
    j["unlearn"] = std::move(ju);
    j["coverage_ratios"] = cfg.coverage_ratios;
    j["size_axis"] = cfg.size_axis;
    j["analysis_algorithms"] = cfg.analysis_algorithms;
    j["entity_sample"] = cfg.entity_sample;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    return j;
}

inline ExperimentConfig config_from_json(const ordered_json& j) {
    ExperimentConfig cfg = default_config();
    if (j.contains("schema_version")) cfg.schema_version = j["schema_version"].get<int>();
    if (cfg.schema_version != 1)
        throw std::invalid_argument("config: unsupported schema_version");
    if (j.contains("corpus")) {
        const auto& c = j["corpus"];
        if (c.contains("seed")) cfg.corpus.seed = c["seed"].get<std::uint64_t>();
        if (c.contains("n_entities")) cfg.corpus.n_entities = c["n_entities"].get<std::size_t>();
        if (c.contains("facts_per_entity"))
            cfg.corpus.facts_per_entity = c["facts_per_entity"].get<std::size_t>();
        if (c.contains("n_retain")) cfg.corpus.n_retain = c["n_retain"].get<std::size_t>();
        if (c.contains("n_world")) cfg.corpus.n_world = c["n_world"].get<std::size_t>();
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        if (m.contains("layers")) cfg.model.layers = m["layers"].get<int>();
        if (m.contains("width")) cfg.model.width = m["width"].get<int>();
        if (m.contains("heads")) cfg.model.heads = m["heads"].get<int>();
        if (m.contains("context_length")) cfg.model.context_length = m["context_length"].get<int>();
        if (m.contains("init_std")) cfg.model.init_std = m["init_std"].get<double>();
    }
    if (j.contains("train")) cfg.train = train_from_json(j["train"], cfg.train);
    if (j.contains("finetune")) cfg.finetune = train_from_json(j["finetune"], cfg.finetune);
    if (j.contains("probe")) {
        const auto& p = j["probe"];
        if (p.contains("questions_per_round"))
            cfg.probe_cfg.questions_per_round = p["questions_per_round"].get<int>();
        if (p.contains("verify_rounds")) cfg.probe_cfg.verify_rounds = p["verify_rounds"].get<int>();
        if (p.contains("target_size")) cfg.probe_cfg.target_size = p["target_size"].get<int>();
        if (p.contains("max_rounds")) cfg.probe_cfg.max_rounds = p["max_rounds"].get<int>();
        if (p.contains("seed")) cfg.probe_cfg.seed = p["seed"].get<std::uint64_t>();
    }
    if (j.contains("demos")) {
        const auto& d = j["demos"];
        if (d.contains("n_demo_entities")) cfg.demos.n_demo_entities = d["n_demo_entities"].get<int>();
        if (d.contains("facts_per_demo")) cfg.demos.facts_per_demo = d["facts_per_demo"].get<int>();
        if (d.contains("refusals_per_demo"))
            cfg.demos.refusals_per_demo = d["refusals_per_demo"].get<int>();
        if (d.contains("seed")) cfg.demos.seed = d["seed"].get<std::uint64_t>();
    }
    if (j.contains("unlearn"))
        for (const auto& [name, ju] : j["unlearn"].items()) {
            unlearn::UnlearnConfig base = cfg.unlearn_cfgs.count(name)
                                              ? cfg.unlearn_cfgs[name]
                                              : unlearn::UnlearnConfig{};
            base.algorithm = unlearn::parse_algorithm(name);
            cfg.unlearn_cfgs[name] = unlearn_from_json(ju, base);
        }
    if (j.contains("coverage_ratios"))
        cfg.coverage_ratios = j["coverage_ratios"].get<std::vector<double>>();
    if (j.contains("size_axis")) cfg.size_axis = j["size_axis"].get<std::vector<int>>();
    if (j.contains("analysis_algorithms"))
        cfg.analysis_algorithms = j["analysis_algorithms"].get<std::vector<std::string>>();
    if (j.contains("entity_sample")) cfg.entity_sample = j["entity_sample"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    return cfg;
}

inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
    return fnv1a64(config_to_json(cfg).dump());
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline void write_text(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

inline void write_json(const fs::path& path, const ordered_json& j) {
    write_text(path, j.dump(2) + "\n");
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ordered_json read_json(const fs::path& path) {
    return ordered_json::parse(read_text(path));
}

inline void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

inline std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    return out;
}

inline std::uint64_t file_hash(const fs::path& path) {
    const auto bytes = read_bytes(path);
    return fnv1a64(bytes.data(), bytes.size());
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Runs tasks 0..n-1, across forked worker processes when workers > 1.
/// Tasks must communicate through deterministic output files only.
inline void run_tasks(std::size_t n, int workers,
                      const std::function<void(std::size_t)>& task) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    const int w = std::min<int>(workers, static_cast<int>(n));
    std::vector<pid_t> pids;
    for (int k = 0; k < w; ++k) {
        const pid_t pid = fork();
        if (pid < 0) throw std::runtime_error("fork failed");
        if (pid == 0) {
            int rc = 0;
            try {
                for (std::size_t i = static_cast<std::size_t>(k); i < n;
                     i += static_cast<std::size_t>(w))
                    task(i);
            } catch (const std::exception& e) {
                std::cerr << "worker " << k << ": " << e.what() << "\n";
                rc = 1;
            }
            _exit(rc);
        }
        pids.push_back(pid);
    }
    bool failed = false;
    for (pid_t pid : pids) {
        int status = 0;
        waitpid(pid, &status, 0);
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed = true;
    }
    if (failed) throw std::runtime_error("a parallel worker failed");
}

// ---------------------------------------------------------------------------
// Training material: corpus facts + bank facts + probe behavior demos under a
// shared vocabulary that covers every string the evaluation can score.
// ---------------------------------------------------------------------------

struct TrainingMaterial {
    std::vector<corpus::QAItem> items;
    lm::Vocab vocab;
};

struct TrainFilter {
    std::string exclude_entity;                          // drop this entity's facts
    std::optional<corpus::OriginPhase> only_phase;       // keep only this phase's entities
    bool include_banks = true;                           // retain/world facts
    bool include_demos = true;
};

inline lm::Vocab build_vocab(const corpus::Corpus& c, const probe::DemoConfig& dc,
                             const probe::ProbeConfig& pc) {
    std::vector<std::string> texts;
    auto add_eval = [&](const corpus::EvalItem& e) {
        texts.push_back(e.question);
        texts.push_back(e.answer);
        texts.push_back(e.paraphrase);
        for (const auto& p : e.perturbations) texts.push_back(p);
    };
    for (std::size_t i = 0; i < c.entities.size(); ++i)
        for (const auto& e : corpus::entity_eval_items(c, i)) add_eval(e);
    for (const auto& e : c.retain_facts) add_eval(e);
    for (const auto& e : c.world_facts) add_eval(e);
    for (const auto& qa : probe::build_probe_demos(dc, pc)) {
        texts.push_back(qa.question);
        texts.push_back(qa.answer);
    }
    for (const auto& r : unlearn::default_refusal_answers()) texts.push_back(r);
    // probe prompt scaffolding: index tokens beyond the demoed range stay
    // distinct so later rounds produce distinct prompts
    const int max_index = pc.questions_per_round * std::max(pc.max_rounds, 1);
    for (int i = 1; i <= std::max(max_index, 60); ++i) texts.push_back(std::to_string(i));
    if (!c.entities.empty()) {
        std::string qp = pc.question_prompt;
        texts.push_back(probe::detail::substitute(
            probe::detail::substitute(qp, "i", "1"), "name", c.entities[0].name));
    }
    return lm::Vocab::build(texts);
}

inline TrainingMaterial build_training_material(const corpus::Corpus& c,
                                                const probe::DemoConfig& dc,
                                                const probe::ProbeConfig& pc,
                                                const TrainFilter& filter = {}) {
    TrainingMaterial tm;
    tm.vocab = build_vocab(c, dc, pc);
    for (const auto& ep : c.entities) {
        if (ep.entity_id == filter.exclude_entity) continue;
        if (filter.only_phase && ep.origin_phase != *filter.only_phase) continue;
        for (const auto& f : ep.facts) tm.items.push_back({f.question, f.answer});
    }
    if (filter.include_banks) {
        for (const auto& e : c.retain_facts) tm.items.push_back({e.question, e.answer});
        for (const auto& e : c.world_facts) tm.items.push_back({e.question, e.answer});
    }
    if (filter.include_demos)
        for (auto& qa : probe::build_probe_demos(dc, pc)) tm.items.push_back(std::move(qa));
    return tm;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline fs::path cmd_gen_world(const ExperimentConfig& cfg) {
    const auto c = corpus::generate_world(cfg.corpus.seed, cfg.corpus.n_entities,
                                          cfg.corpus.facts_per_entity, cfg.corpus.n_retain,
                                          cfg.corpus.n_world);
    const fs::path path = fs::path(cfg.out_dir) / "corpus.json";
    write_json(path, corpus::corpus_to_json(c));
    std::cout << "corpus: " << c.entities.size() << " entities x "
              << (c.entities.empty() ? 0 : c.entities[0].facts.size()) << " facts, "
              << c.retain_facts.size() << " retain, " << c.world_facts.size()
              << " world facts -> " << path.string() << "\n";
    return path;
}

inline std::vector<lm::EpochLog> train_from_material(lm::ModelHandle& model,
                                                     const TrainingMaterial& tm,
                                                     const lm::TrainConfig& tc) {
    return lm::train(model, tm.items, tc);
}

/// Trains (or restores from cache) a model for the given corpus and filter.
/// Cached snapshots are keyed by the corpus file hash and the exact recipe.
inline fs::path train_cached(const ExperimentConfig& cfg, const fs::path& corpus_path,
                             const TrainFilter& filter, const lm::TrainConfig& tc,
                             const std::string& tag, std::vector<lm::EpochLog>* log_out = nullptr) {
    ordered_json key;
    key["corpus_file"] = hex64(file_hash(corpus_path));
    key["model"] = config_to_json(cfg)["model"];
    key["train"] = train_to_json(tc);
    key["demos"] = config_to_json(cfg)["demos"];
    key["exclude"] = filter.exclude_entity;
    key["phase"] = filter.only_phase ? (*filter.only_phase == corpus::OriginPhase::pretrain
                                            ? "pretrain"
                                            : "finetune")
                                     : "";
    key["banks"] = filter.include_banks;
    key["demos_on"] = filter.include_demos;
    const std::string h = hex64(fnv1a64(key.dump()));
    const fs::path path = fs::path(cfg.out_dir) / "models" / (tag + "_" + h + ".snap");
    if (fs::exists(path)) return path;

    const auto c = corpus::corpus_from_json(read_json(corpus_path));
    const auto tm = build_training_material(c, cfg.demos, cfg.probe_cfg, filter);
    auto model = lm::ModelHandle::init(tm.vocab, cfg.model, derive_seed(tc.seed, 99));
    const auto log = train_from_material(model, tm, tc);
    if (log_out) *log_out = log;
    const auto blob = model.snapshot();
    const fs::path tmp = path.string() + ".tmp." + std::to_string(getpid());
    write_bytes(tmp, blob);
    fs::rename(tmp, path);
    std::ofstream jl(path.string() + ".train_log.jsonl", std::ios::trunc);
    for (const auto& e : log)
        jl << ordered_json{{"epoch", e.epoch}, {"mean_loss", metrics::round6(e.mean_loss)}}.dump()
           << "\n";
    return path;
}

inline double memorization_rouge(const lm::ModelHandle& model,
                                 std::span<const corpus::QAItem> items, int max_tokens = 24) {
    double sum = 0.0;
    for (const auto& qa : items)
        sum += metrics::rouge_l_recall(qa.answer, model.greedy_decode(qa.question, max_tokens));
    return items.empty() ? 0.0 : sum / static_cast<double>(items.size());
}

inline fs::path cmd_train_target(const ExperimentConfig& cfg, const fs::path& corpus_path) {
    if (!fs::exists(corpus_path))
        throw std::runtime_error("train-target: corpus file not found: " + corpus_path.string());
    std::vector<lm::EpochLog> log;
    const auto path = train_cached(cfg, corpus_path, {}, cfg.train, "target", &log);
    const auto model = lm::ModelHandle::restore(read_bytes(path));
    const auto c = corpus::corpus_from_json(read_json(corpus_path));
    std::vector<corpus::QAItem> facts;
    for (const auto& ep : c.entities)
        for (const auto& f : ep.facts) facts.push_back({f.question, f.answer});
    std::cout << "target model -> " << path.string() << "\n"
              << "memorization ROUGE over " << facts.size()
              << " training answers: " << memorization_rouge(model, facts) << "\n";
    return path;
}

/// Retain-reference model for forget quality: the same recipe with the
/// target entity's facts left out.
inline fs::path reference_model_path(const ExperimentConfig& cfg, const fs::path& corpus_path,
                                     const std::string& entity_id) {
    TrainFilter f;
    f.exclude_entity = entity_id;
    return train_cached(cfg, corpus_path, f, cfg.train, "ref_" + entity_id);
}

inline fs::path cmd_probe(const ExperimentConfig& cfg, const fs::path& corpus_path,
                          const fs::path& model_path, const std::string& entity_id) {
    const auto c = corpus::corpus_from_json(read_json(corpus_path));
    const auto model = lm::ModelHandle::restore(read_bytes(model_path));
    const auto& entity = c.entities.at(corpus::entity_index_of(c, entity_id));
    const auto result = probe::build_forget_set(model, entity, cfg.probe_cfg);
    const fs::path path = fs::path(cfg.out_dir) / ("probe_" + entity_id + ".json");
    write_json(path, probe::probe_result_to_json(result));
    std::cout << "probe " << entity_id << ": " << result.forget_set.qa_items.size() << "/"
              << cfg.probe_cfg.target_size << " items in " << result.rounds_used << " rounds"
              << (result.shortfall ? " (shortfall)" : "") << " -> " << path.string() << "\n";
    return path;
}

inline metrics::MetricEngine make_engine(const ExperimentConfig& cfg, const corpus::Corpus& c,
                                         const std::string& entity_id,
                                         const std::optional<fs::path>& reference_snapshot) {
    auto sets = corpus::split_sets(c, entity_id);
    metrics::MetricEngine engine(std::move(sets));
    if (reference_snapshot) {
        const auto ref = lm::ModelHandle::restore(read_bytes(*reference_snapshot));
        const auto& target_items = engine.sets().at(corpus::Role::target).eval_items;
        std::vector<std::string> questions;
        for (const auto& item : target_items) questions.push_back(item.question);
        engine.set_reference_truth_ratios(metrics::MetricEngine::truth_ratios_of(ref, target_items),
                                          std::move(questions));
    }
    return engine;
}

inline ordered_json run_record_to_json(const unlearn::RunRecord& rec) {
    ordered_json j;
    j["schema_version"] = 1;
    j["config"] = unlearn_to_json(rec.config);
    j["checkpoints"] = ordered_json::array();
    for (const auto& cp : rec.checkpoints) {
        ordered_json jc;
        jc["step"] = cp.step;
        jc["metrics"] = metrics::metric_report_to_json(cp.report);
        jc["snapshot_ref"] = cp.snapshot_ref;
        j["checkpoints"].push_back(std::move(jc));
    }
    j["selected_checkpoint"] = rec.selected_checkpoint;
    if (rec.aborted_step)
        j["aborted_step"] = *rec.aborted_step;
    else
        j["aborted_step"] = nullptr;
    return j;
}

/// Persists a run: record.json, losses.jsonl, config.json, snapshots/.
inline fs::path persist_run(const fs::path& dir, unlearn::RunRecord& rec,
                            const ordered_json& experiment_config) {
    fs::create_directories(dir / "snapshots");
    for (auto& cp : rec.checkpoints) {
        cp.snapshot_ref = "snapshots/step_" + std::to_string(cp.step) + ".snap";
        write_bytes(dir / cp.snapshot_ref, cp.snapshot);
    }
    std::ostringstream losses;
    for (const auto& lt : rec.losses)
        losses << ordered_json{{"step", lt.step},
                               {"total", metrics::round6(lt.loss.total)},
                               {"forget_term", metrics::round6(lt.loss.forget_term)},
                               {"retain_term", metrics::round6(lt.loss.retain_term)},
                               {"regularizer", metrics::round6(lt.loss.regularizer)}}
                      .dump()
               << "\n";
    write_text(dir / "losses.jsonl", losses.str());
    write_json(dir / "config.json", experiment_config);
    write_json(dir / "record.json", run_record_to_json(rec));
    return dir / "record.json";
}

enum class ForgetSetType { target, constructed };

inline fs::path cmd_unlearn(const ExperimentConfig& cfg, const fs::path& corpus_path,
                            const fs::path& model_path, const std::string& entity_id,
                            const std::string& algorithm, ForgetSetType forget_type) {
    const auto c = corpus::corpus_from_json(read_json(corpus_path));
    const auto model = lm::ModelHandle::restore(read_bytes(model_path));
    auto it = cfg.unlearn_cfgs.find(algorithm);
    if (it == cfg.unlearn_cfgs.end())
        throw std::invalid_argument("unlearn: no config for algorithm " + algorithm);
    const auto& ucfg = it->second;

    auto engine = make_engine(cfg, c, entity_id, reference_model_path(cfg, corpus_path, entity_id));

    corpus::KnowledgeSet forget;
    if (forget_type == ForgetSetType::target) {
        const auto& target = engine.sets().at(corpus::Role::target);
        forget.role = corpus::Role::forget;
        forget.qa_items = target.qas();
        forget.source_entity = entity_id;
    } else {
        const auto& entity = c.entities.at(corpus::entity_index_of(c, entity_id));
        auto probe_result = probe::build_forget_set(model, entity, cfg.probe_cfg);
        forget = std::move(probe_result.forget_set);
        if (forget.qa_items.empty())
            throw std::runtime_error("unlearn: probe produced an empty forget set");
    }

    corpus::KnowledgeSet retain;
    retain.role = corpus::Role::retain;
    retain.qa_items = engine.sets().at(corpus::Role::retain).qas();

    auto rec = unlearn::unlearn_run(model, forget, retain, ucfg, engine);

    const std::string type_name = forget_type == ForgetSetType::target ? "target" : "constructed";
    const fs::path dir =
        fs::path(cfg.out_dir) / ("unlearn_" + entity_id + "_" + algorithm + "_" + type_name);
    const auto path = persist_run(dir, rec, config_to_json(cfg));
    const auto& sel = rec.selected();
    std::cout << "unlearn " << entity_id << " " << algorithm << " (" << type_name
              << "): selected step " << sel.step;
    if (sel.report.forget_quality) std::cout << " FQ=" << *sel.report.forget_quality;
    std::cout << " MU=" << sel.report.model_utility << " -> " << path.string() << "\n";
    return path;
}

// ---------------------------------------------------------------------------
// Analyses
// ---------------------------------------------------------------------------

struct AnalysisPoint {
    double axis = 0.0;
    ordered_json values;
};

struct AnalysisResult {
    std::string kind;
    std::string axis_label;
    std::vector<std::string> entity_ids;
    std::string config_hash;
    std::vector<AnalysisPoint> points;
};

inline ordered_json analysis_to_json(const AnalysisResult& a) {
    ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = a.kind;
    j["axis_label"] = a.axis_label;
    j["entities"] = a.entity_ids;
    j["config_hash"] = a.config_hash;
    j["points"] = ordered_json::array();
    for (const auto& p : a.points)
        j["points"].push_back({{"axis", p.axis}, {"values", p.values}});
    return j;
}

/// Deterministic entity sample for analyses (arithmetic means are computed
/// over the same sample at every axis point).
inline std::vector<std::string> sample_entities(const corpus::Corpus& c, int count,
                                                std::uint64_t seed) {
    Rng rng(derive_seed(seed, 77));
    const auto n = c.entities.size();
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(count), n);
    auto idx = rng.sample_indices(n, k);
    std::vector<std::string> ids;
    for (auto i : idx) ids.push_back(c.entities[i].entity_id);
    return ids;
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Coverage-replacement ablation: for each sampled entity, replace a ratio of
/// the constructed forget set with target items, then unlearn with each
/// algorithm; reports mean knowledge coverage, forget quality and model
/// utility per (ratio, algorithm).
inline fs::path cmd_ablate_coverage(const ExperimentConfig& cfg, const fs::path& corpus_path,
                                    const fs::path& model_path, int workers = 1) {
    const auto c = corpus::corpus_from_json(read_json(corpus_path));
    const auto entity_ids = sample_entities(c, cfg.entity_sample, cfg.seed);
    const fs::path tmp_dir = fs::path(cfg.out_dir) / "tmp_coverage";
    fs::create_directories(tmp_dir);

    run_tasks(entity_ids.size(), workers, [&](std::size_t ei) {
        const auto& entity_id = entity_ids[ei];
        const auto model = lm::ModelHandle::restore(read_bytes(model_path));
        auto engine =
            make_engine(cfg, c, entity_id, reference_model_path(cfg, corpus_path, entity_id));
        const auto& entity = c.entities.at(corpus::entity_index_of(c, entity_id));
        auto probe_result = probe::build_forget_set(model, entity, cfg.probe_cfg);
        const auto& target = engine.sets().at(corpus::Role::target);
        corpus::KnowledgeSet retain;
        retain.role = corpus::Role::retain;
        retain.qa_items = engine.sets().at(corpus::Role::retain).qas();

        ordered_json out = ordered_json::array();
        for (double ratio : cfg.coverage_ratios) {
            auto forget = probe::replace_with_target(probe_result.forget_set, target, ratio,
                                                     derive_seed(cfg.seed, 555));
            const double kc =
                metrics::knowledge_coverage(forget, target, metrics::token_f1_similarity);
            ordered_json row;
            row["ratio"] = ratio;
            row["knowledge_coverage"] = metrics::round6(kc);
            for (const auto& algo : cfg.analysis_algorithms) {
                const auto& ucfg = cfg.unlearn_cfgs.at(algo);
                auto rec = unlearn::unlearn_run(model, forget, retain, ucfg, engine);
                const auto& sel = rec.selected();
                row[algo] = {{"forget_quality",
                              metrics::round6(sel.report.forget_quality.value_or(0.0))},
                             {"model_utility", metrics::round6(sel.report.model_utility)}};
            }
            out.push_back(std::move(row));
        }
        write_json(tmp_dir / (entity_id + ".json"), out);
    });

    AnalysisResult res;
    res.kind = "coverage_replacement";
    res.axis_label = "replacement_ratio";
    res.entity_ids = entity_ids;
    res.config_hash = hex64(config_hash(cfg));
    for (std::size_t r = 0; r < cfg.coverage_ratios.size(); ++r) {
        AnalysisPoint pt;
        pt.axis = cfg.coverage_ratios[r];
        std::vector<double> kcs;
        std::map<std::string, std::vector<double>> fq, mu;
        for (const auto& entity_id : entity_ids) {
            const auto rows = read_json(tmp_dir / (entity_id + ".json"));
            const auto& row = rows.at(r);
            kcs.push_back(row.at("knowledge_coverage").get<double>());
            for (const auto& algo : cfg.analysis_algorithms) {
                fq[algo].push_back(row.at(algo).at("forget_quality").get<double>());
                mu[algo].push_back(row.at(algo).at("model_utility").get<double>());
            }
        }
        pt.values["knowledge_coverage"] = metrics::round6(mean_of(kcs));
        for (const auto& algo : cfg.analysis_algorithms)
            pt.values[algo] = {{"forget_quality", metrics::round6(mean_of(fq[algo]))},
                               {"model_utility", metrics::round6(mean_of(mu[algo]))}};
        res.points.push_back(std::move(pt));
    }
    const fs::path path = fs::path(cfg.out_dir) / "analysis_coverage.json";
    write_json(path, analysis_to_json(res));
    fs::remove_all(tmp_dir);
    std::cout << "ablate-coverage -> " << path.string() << "\n";
    return path;
}

/// Size ablation: probed forget sets of increasing target size; reports mean
/// knowledge coverage, probing rounds, and per-algorithm FQ/MU per size.
inline fs::path cmd_ablate_size(const ExperimentConfig& cfg, const fs::path& corpus_path,
                                const fs::path& model_path, int workers = 1) {
    const auto c = corpus::corpus_from_json(read_json(corpus_path));
    const auto entity_ids = sample_entities(c, cfg.entity_sample, cfg.seed);
    const fs::path tmp_dir = fs::path(cfg.out_dir) / "tmp_size";
    fs::create_directories(tmp_dir);

    run_tasks(entity_ids.size(), workers, [&](std::size_t ei) {
        const auto& entity_id = entity_ids[ei];
        const auto model = lm::ModelHandle::restore(read_bytes(model_path));
        auto engine =
            make_engine(cfg, c, entity_id, reference_model_path(cfg, corpus_path, entity_id));
        const auto& entity = c.entities.at(corpus::entity_index_of(c, entity_id));
        const auto& target = engine.sets().at(corpus::Role::target);
        corpus::KnowledgeSet retain;
        retain.role = corpus::Role::retain;
        retain.qa_items = engine.sets().at(corpus::Role::retain).qas();

        ordered_json out = ordered_json::array();
        for (int size : cfg.size_axis) {
            auto pc = cfg.probe_cfg;
            pc.target_size = size;
            auto probe_result = probe::build_forget_set(model, entity, pc);
            ordered_json row;
            row["size"] = size;
            row["rounds_used"] = probe_result.rounds_used;
            row["shortfall"] = probe_result.shortfall;
            row["knowledge_coverage"] =
                probe_result.forget_set.qa_items.empty()
                    ? 0.0
                    : metrics::round6(metrics::knowledge_coverage(probe_result.forget_set, target,
                                                                  metrics::token_f1_similarity));
            for (const auto& algo : cfg.analysis_algorithms) {
                if (probe_result.forget_set.qa_items.empty()) {
                    row[algo] = {{"forget_quality", 0.0}, {"model_utility", 0.0}};
                    continue;
                }
                const auto& ucfg = cfg.unlearn_cfgs.at(algo);
                auto rec = unlearn::unlearn_run(model, probe_result.forget_set, retain, ucfg,
                                                engine);
                const auto& sel = rec.selected();
                row[algo] = {{"forget_quality",
                              metrics::round6(sel.report.forget_quality.value_or(0.0))},
                             {"model_utility", metrics::round6(sel.report.model_utility)}};
            }
            out.push_back(std::move(row));
        }
        write_json(tmp_dir / (entity_id + ".json"), out);
    });

    AnalysisResult res;
    res.kind = "forget_set_size";
    res.axis_label = "constructed_set_size";
    res.entity_ids = entity_ids;
    res.config_hash = hex64(config_hash(cfg));
    for (std::size_t s = 0; s < cfg.size_axis.size(); ++s) {
        AnalysisPoint pt;
        pt.axis = cfg.size_axis[s];
        std::vector<double> kc, rounds;
        std::map<std::string, std::vector<double>> fq, mu;
        for (const auto& entity_id : entity_ids) {
            const auto rows = read_json(tmp_dir / (entity_id + ".json"));
            const auto& row = rows.at(s);
            kc.push_back(row.at("knowledge_coverage").get<double>());
            rounds.push_back(row.at("rounds_used").get<double>());
            for (const auto& algo : cfg.analysis_algorithms) {
                fq[algo].push_back(row.at(algo).at("forget_quality").get<double>());
                mu[algo].push_back(row.at(algo).at("model_utility").get<double>());
            }
        }
        pt.values["knowledge_coverage"] = metrics::round6(mean_of(kc));
        pt.values["rounds_used"] = metrics::round6(mean_of(rounds));
        for (const auto& algo : cfg.analysis_algorithms)
            pt.values[algo] = {{"forget_quality", metrics::round6(mean_of(fq[algo]))},
                               {"model_utility", metrics::round6(mean_of(mu[algo]))}};
        res.points.push_back(std::move(pt));
    }
    const fs::path path = fs::path(cfg.out_dir) / "analysis_size.json";
    write_json(path, analysis_to_json(res));
    fs::remove_all(tmp_dir);
    std::cout << "ablate-size -> " << path.string() << "\n";
    return path;
}

/// Step ablation: one algorithm on the target set, metrics at a fixed step
/// cadence, averaged over the entity sample.
inline fs::path cmd_ablate_steps(const ExperimentConfig& cfg, const fs::path& corpus_path,
                                 const fs::path& model_path, const std::string& algorithm,
                                 int workers = 1) {
    const auto c = corpus::corpus_from_json(read_json(corpus_path));
    const auto entity_ids = sample_entities(c, cfg.entity_sample, cfg.seed);
    const fs::path tmp_dir = fs::path(cfg.out_dir) / "tmp_steps";
    fs::create_directories(tmp_dir);
    auto ucfg = cfg.unlearn_cfgs.at(algorithm);
    if (ucfg.max_steps <= 0) ucfg.max_steps = 25;
    // enough epochs to reach max_steps
    ucfg.epochs = std::max(ucfg.epochs, static_cast<int>(ucfg.max_steps));

    run_tasks(entity_ids.size(), workers, [&](std::size_t ei) {
        const auto& entity_id = entity_ids[ei];
        const auto model = lm::ModelHandle::restore(read_bytes(model_path));
        auto engine =
            make_engine(cfg, c, entity_id, reference_model_path(cfg, corpus_path, entity_id));
        const auto& target = engine.sets().at(corpus::Role::target);
        corpus::KnowledgeSet forget;
        forget.role = corpus::Role::forget;
        forget.qa_items = target.qas();
        forget.source_entity = entity_id;
        corpus::KnowledgeSet retain;
        retain.role = corpus::Role::retain;
        retain.qa_items = engine.sets().at(corpus::Role::retain).qas();
        auto rec = unlearn::unlearn_run(model, forget, retain, ucfg, engine);
        ordered_json out = ordered_json::array();
        for (const auto& cp : rec.checkpoints) {
            ordered_json row;
            row["step"] = cp.step;
            row["metrics"] = metrics::metric_report_to_json(cp.report);
            out.push_back(std::move(row));
        }
        write_json(tmp_dir / (entity_id + ".json"), out);
    });

    AnalysisResult res;
    res.kind = "step_ablation_" + algorithm;
    res.axis_label = "unlearning_steps";
    res.entity_ids = entity_ids;
    res.config_hash = hex64(config_hash(cfg));
    const auto first = read_json(tmp_dir / (entity_ids[0] + ".json"));
    for (std::size_t si = 0; si < first.size(); ++si) {
        AnalysisPoint pt;
        pt.axis = first.at(si).at("step").get<double>();
        std::map<std::string, std::vector<double>> sums;  // "<set>.<metric>" -> values
        for (const auto& entity_id : entity_ids) {
            const auto rows = read_json(tmp_dir / (entity_id + ".json"));
            const auto& m = rows.at(si).at("metrics");
            for (const auto& metric : {"probability", "rouge", "accuracy", "set_scores"})
                for (const auto& [set_name, v] : m.at(metric).items())
                    sums[std::string(set_name) + "." + metric].push_back(v.get<double>());
            sums["model_utility"].push_back(m.at("model_utility").get<double>());
            if (!m.at("forget_quality").is_null())
                sums["forget_quality"].push_back(m.at("forget_quality").get<double>());
        }
        for (const auto& [key, vals] : sums) pt.values[key] = metrics::round6(mean_of(vals));
        res.points.push_back(std::move(pt));
    }
    const fs::path path = fs::path(cfg.out_dir) / ("analysis_steps_" + algorithm + ".json");
    write_json(path, analysis_to_json(res));
    fs::remove_all(tmp_dir);
    std::cout << "ablate-steps(" << algorithm << ") -> " << path.string() << "\n";
    return path;
}

/// Pretrain-vs-finetune comparison: phase-1 training installs half the
/// entities plus all banks and demos ("simulated pretraining"); phase-2
/// fine-tuning injects the other half. One entity of each origin is unlearned
/// and the collateral damage on same-phase entities is compared against the
/// mean damage on the three non-target sets.
inline fs::path cmd_compare_phases(const ExperimentConfig& cfg, const std::string& algorithm) {
    auto c = corpus::generate_world(cfg.corpus.seed, cfg.corpus.n_entities,
                                    cfg.corpus.facts_per_entity, cfg.corpus.n_retain,
                                    cfg.corpus.n_world);
    if (c.entities.size() < 4)
        throw std::invalid_argument("compare-phases: need at least 4 entities");
    const std::size_t half = c.entities.size() / 2;
    for (std::size_t i = 0; i < c.entities.size(); ++i)
        c.entities[i].origin_phase =
            i < half ? corpus::OriginPhase::pretrain : corpus::OriginPhase::finetune;
    for (const auto& ep : c.entities)
        if (ep.facts.size() != c.entities[0].facts.size())
            throw std::logic_error("compare-phases: per-entity QA counts differ across phases");

    const fs::path corpus_path = fs::path(cfg.out_dir) / "corpus_phases.json";
    write_json(corpus_path, corpus::corpus_to_json(c));

    // phase 1: simulated pretraining on the pretrain half + banks + demos
    TrainFilter phase1;
    phase1.only_phase = corpus::OriginPhase::pretrain;
    const auto tm1 = build_training_material(c, cfg.demos, cfg.probe_cfg, phase1);
    auto model = lm::ModelHandle::init(tm1.vocab, cfg.model, derive_seed(cfg.train.seed, 99));
    lm::train(model, tm1.items, cfg.train);
    // phase 2: inject the finetune half
    TrainFilter phase2;
    phase2.only_phase = corpus::OriginPhase::finetune;
    phase2.include_banks = false;
    phase2.include_demos = false;
    const auto tm2 = build_training_material(c, cfg.demos, cfg.probe_cfg, phase2);
    lm::train(model, tm2.items, cfg.finetune);

    Rng rng(derive_seed(cfg.seed, 88));
    const auto& pre_target = c.entities[rng.below(half)];
    const auto& fin_target = c.entities[half + rng.below(c.entities.size() - half)];

    auto ucfg = cfg.unlearn_cfgs.at(algorithm);
    if (ucfg.max_steps <= 0) ucfg.max_steps = 25;
    ucfg.epochs = std::max(ucfg.epochs, static_cast<int>(ucfg.max_steps));

    AnalysisResult res;
    res.kind = "phase_comparison_" + algorithm;
    res.axis_label = "origin_phase";
    res.entity_ids = {pre_target.entity_id, fin_target.entity_id};
    res.config_hash = hex64(config_hash(cfg));

    for (const auto* target_entity : {&pre_target, &fin_target}) {
        auto sets = corpus::split_sets(c, target_entity->entity_id);
        // other-entities set restricted to same-phase siblings
        corpus::KnowledgeSet others;
        others.role = corpus::Role::other_entities;
        for (std::size_t i = 0; i < c.entities.size(); ++i) {
            if (c.entities[i].entity_id == target_entity->entity_id) continue;
            if (c.entities[i].origin_phase != target_entity->origin_phase) continue;
            auto items = corpus::entity_eval_items(c, i);
            others.eval_items.insert(others.eval_items.end(), items.begin(), items.end());
        }
        sets[corpus::Role::other_entities] = std::move(others);
        metrics::MetricEngine engine(std::move(sets));

        corpus::KnowledgeSet forget;
        forget.role = corpus::Role::forget;
        forget.qa_items = engine.sets().at(corpus::Role::target).qas();
        forget.source_entity = target_entity->entity_id;
        corpus::KnowledgeSet retain;
        retain.role = corpus::Role::retain;
        retain.qa_items = engine.sets().at(corpus::Role::retain).qas();

        auto rec = unlearn::unlearn_run(model, forget, retain, ucfg, engine);
        const auto& first = rec.checkpoints.front().report;
        const auto& last = rec.checkpoints.back().report;
        auto drop = [&](corpus::Role role) {
            return first.set_scores.at(role) - last.set_scores.at(role);
        };
        const double other_drop = drop(corpus::Role::other_entities);
        const double non_target_mean =
            (drop(corpus::Role::retain) + drop(corpus::Role::real_authors_analog) +
             drop(corpus::Role::world_facts)) /
            3.0;
        AnalysisPoint pt;
        pt.axis = target_entity->origin_phase == corpus::OriginPhase::pretrain ? 0.0 : 1.0;
        pt.values["phase"] =
            target_entity->origin_phase == corpus::OriginPhase::pretrain ? "pretrain" : "finetune";
        pt.values["entity"] = target_entity->entity_id;
        pt.values["other_entities_drop"] = metrics::round6(other_drop);
        pt.values["non_target_mean_drop"] = metrics::round6(non_target_mean);
        pt.values["start_scores"] = metrics::metric_report_to_json(first)["set_scores"];
        pt.values["end_scores"] = metrics::metric_report_to_json(last)["set_scores"];
        res.points.push_back(std::move(pt));
    }
    const fs::path path = fs::path(cfg.out_dir) / ("analysis_phases_" + algorithm + ".json");
    write_json(path, analysis_to_json(res));
    std::cout << "compare-phases(" << algorithm << ") -> " << path.string() << "\n";
    return path;
}

// ---------------------------------------------------------------------------
// Reporting: SVG plots plus a summary table per input file
// ---------------------------------------------------------------------------

inline std::string markdown_table(const std::vector<std::string>& header,
                                  const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    out << "|";
    for (const auto& h : header) out << " " << h << " |";
    out << "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) out << "---|";
    out << "\n";
    for (const auto& row : rows) {
        out << "|";
        for (const auto& cell : row) out << " " << cell << " |";
        out << "\n";
    }
    return out.str();
}

inline std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::vector<fs::path> report_run_record(const fs::path& record_path, const fs::path& out) {
    const auto j = read_json(record_path);
    std::vector<fs::path> written;
    const auto& cps = j.at("checkpoints");
    std::vector<double> steps;
    for (const auto& cp : cps) steps.push_back(cp.at("step").get<double>());
    // one plot per metric, one series per set
    for (const auto& metric : {"probability", "rouge", "accuracy", "set_scores"}) {
        std::map<std::string, svg::Series> by_set;
        for (std::size_t i = 0; i < cps.size(); ++i)
            for (const auto& [set_name, v] :
                 cps.at(i).at("metrics").at(metric).items()) {
                auto& s = by_set[set_name];
                s.label = set_name;
                s.xs.push_back(steps[i]);
                s.ys.push_back(v.get<double>());
            }
        std::vector<svg::Series> series;
        for (auto& [name, s] : by_set) series.push_back(std::move(s));
        const fs::path p = out / (std::string("run_") + metric + ".svg");
        write_text(p, svg::line_plot(metric, "step", metric, series));
        written.push_back(p);
    }
    {
        svg::Series fq{"forget_quality", {}, {}}, mu{"model_utility", {}, {}};
        for (std::size_t i = 0; i < cps.size(); ++i) {
            const auto& m = cps.at(i).at("metrics");
            if (!m.at("forget_quality").is_null()) {
                fq.xs.push_back(steps[i]);
                fq.ys.push_back(m.at("forget_quality").get<double>());
            }
            mu.xs.push_back(steps[i]);
            mu.ys.push_back(m.at("model_utility").get<double>());
        }
        std::vector<svg::Series> series{mu};
        if (!fq.xs.empty()) series.push_back(fq);
        const fs::path p = out / "run_quality.svg";
        write_text(p, svg::line_plot("forget quality / model utility", "step", "value", series));
        written.push_back(p);
    }
    // summary table at the selected checkpoint
    const auto sel = j.at("selected_checkpoint").get<std::size_t>();
    const auto& m = cps.at(sel).at("metrics");
    std::vector<std::vector<std::string>> rows;
    for (const auto& [set_name, v] : m.at("probability").items())
        rows.push_back({set_name, fmt6(v.get<double>()),
                        fmt6(m.at("rouge").at(set_name).get<double>()),
                        fmt6(m.at("accuracy").at(set_name).get<double>()),
                        fmt6(m.at("set_scores").at(set_name).get<double>())});
    std::ostringstream md;
    md << "# Run summary\n\nselected checkpoint: step "
       << cps.at(sel).at("step").get<long>() << "\n\n";
    md << markdown_table({"set", "probability", "rouge", "accuracy", "set_score"}, rows);
    md << "\nmodel_utility: " << fmt6(m.at("model_utility").get<double>()) << "\n";
    if (!m.at("forget_quality").is_null())
        md << "forget_quality: " << fmt6(m.at("forget_quality").get<double>()) << "\n";
    const fs::path p = out / "run_summary.md";
    write_text(p, md.str());
    written.push_back(p);
    return written;
}

inline std::vector<fs::path> report_analysis(const fs::path& analysis_path, const fs::path& out) {
    const auto j = read_json(analysis_path);
    const std::string kind = j.at("kind").get<std::string>();
    std::vector<fs::path> written;
    const auto& points = j.at("points");
    // flatten numeric leaf values into series keyed by dotted path
    std::map<std::string, svg::Series> series_map;
    for (const auto& pt : points) {
        const double axis = pt.at("axis").get<double>();
        const std::function<void(const std::string&, const ordered_json&)> walk =
            [&](const std::string& prefix, const ordered_json& v) {
                if (v.is_number()) {
                    auto& s = series_map[prefix];
                    s.label = prefix;
                    s.xs.push_back(axis);
                    s.ys.push_back(v.get<double>());
                } else if (v.is_object()) {
                    for (const auto& [k, sub] : v.items())
                        walk(prefix.empty() ? k : prefix + "." + k, sub);
                }
            };
        walk("", pt.at("values"));
    }
    // group series by their top-level key family for readable plots
    std::map<std::string, std::vector<svg::Series>> groups;
    for (auto& [key, s] : series_map) {
        const auto dot = key.rfind('.');
        const std::string group = dot == std::string::npos ? key : key.substr(dot + 1);
        groups[group].push_back(s);
    }
    for (auto& [group, series] : groups) {
        const fs::path p = out / (kind + "_" + group + ".svg");
        write_text(p, svg::line_plot(kind + ": " + group,
                                     j.at("axis_label").get<std::string>(), group, series));
        written.push_back(p);
    }
    // table
    std::vector<std::string> header{j.at("axis_label").get<std::string>()};
    for (const auto& [key, s] : series_map) header.push_back(key);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::vector<std::string> row{fmt6(points.at(i).at("axis").get<double>())};
        for (const auto& [key, s] : series_map)
            row.push_back(i < s.ys.size() ? fmt6(s.ys[i]) : "");
        rows.push_back(std::move(row));
    }
    std::ostringstream md;
    md << "# " << kind << "\n\n" << markdown_table(header, rows);
    const fs::path p = out / (kind + "_summary.md");
    write_text(p, md.str());
    written.push_back(p);
    return written;
}

inline std::vector<fs::path> cmd_report(const std::vector<fs::path>& inputs,
                                        const fs::path& out_dir) {
    std::vector<fs::path> written;
    const fs::path plots = out_dir / "plots";
    fs::create_directories(plots);
    for (const auto& input : inputs) {
        const auto j = read_json(input);
        const auto files = j.contains("checkpoints") ? report_run_record(input, plots)
                                                     : report_analysis(input, plots);
        written.insert(written.end(), files.begin(), files.end());
    }
    for (const auto& f : written) std::cout << "report -> " << f.string() << "\n";
    return written;
}

}  // namespace elu::harness
