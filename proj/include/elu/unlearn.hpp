#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "elu/common.hpp"
#include "elu/corpus.hpp"
#include "elu/losses.hpp"
#include "elu/metrics.hpp"
#include "elu/model.hpp"

namespace elu::unlearn {

enum class Algorithm { GA, GD, KL, PO, NPO_GD };

inline const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::GA: return "ga";
        case Algorithm::GD: return "gd";
        case Algorithm::KL: return "kl";
        case Algorithm::PO: return "po";
        case Algorithm::NPO_GD: return "npo_gd";
    }
    return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
    for (Algorithm a : {Algorithm::GA, Algorithm::GD, Algorithm::KL, Algorithm::PO,
                        Algorithm::NPO_GD})
        if (s == algorithm_name(a)) return a;
    throw std::invalid_argument("unknown algorithm: " + s);
}

struct UnlearnConfig {
    Algorithm algorithm = Algorithm::GA;
    double learning_rate = 1e-3;
    double weight_decay = 0.01;
    int batch_size = 4;
    int epochs = 5;
    double warmup = 1.0;
    int eval_every_steps = 5;
    long max_steps = 0;  // 0 = bounded by epochs only
    double beta = 0.1;
    std::vector<std::string> refusal_answers = default_refusal_answers();
    std::uint64_t seed = 0;
};

struct Checkpoint {
    long step = 0;
    metrics::MetricReport report;
    std::vector<std::uint8_t> snapshot;
    std::string snapshot_ref;  // filled when persisted
};

struct LossTrace {
    long step;
    LossBreakdown loss;
};

struct RunRecord {
    UnlearnConfig config;
    std::vector<Checkpoint> checkpoints;
    std::size_t selected_checkpoint = 0;
    std::optional<long> aborted_step;
    std::vector<LossTrace> losses;

    const Checkpoint& selected() const { return checkpoints.at(selected_checkpoint); }
};

/// First index i with fq[i-1] < fq[i] >= fq[i+1], boundaries at -infinity.
inline std::size_t select_first_peak(std::span<const double> fq) {
    if (fq.empty()) throw std::invalid_argument("select_first_peak: no checkpoints");
    const double neg_inf = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < fq.size(); ++i) {
        const double prev = i == 0 ? neg_inf : fq[i - 1];
        const double next = i + 1 == fq.size() ? neg_inf : fq[i + 1];
        if (prev < fq[i] && fq[i] >= next) return i;
    }
    return 0;  // unreachable: the global max always qualifies
}

/// Runs one unlearning trajectory. The input model is copied; a frozen
/// reference copy taken at the start backs the KL/PO/NPO losses. A metric
/// checkpoint (with snapshot) is recorded at step 0, every
/// `eval_every_steps` updates, and at the final step.
inline RunRecord unlearn_run(lm::ModelHandle model, const corpus::KnowledgeSet& forget,
                             const corpus::KnowledgeSet& retain,
                             const UnlearnConfig& cfg, const metrics::MetricEngine& engine) {
    const auto forget_items = forget.qas();
    if (forget_items.empty()) throw std::invalid_argument("unlearn_run: empty forget set");
    const auto retain_items = retain.qas();
    const bool needs_retain = cfg.algorithm != Algorithm::GA;
    if (needs_retain && retain_items.empty())
        throw std::invalid_argument("unlearn_run: this algorithm requires a retain set");
    if (cfg.eval_every_steps < 1)
        throw std::invalid_argument("unlearn_run: eval_every_steps must be >= 1");

    const lm::ModelHandle reference = model;  // frozen state at unlearning start

    RunRecord rec;
    rec.config = cfg;

    auto checkpoint = [&](long step) {
        Checkpoint cp;
        cp.step = step;
        cp.report = engine.evaluate(model);
        cp.snapshot = model.snapshot();
        rec.checkpoints.push_back(std::move(cp));
    };
    checkpoint(0);

    lm::TrainConfig opt_cfg;
    opt_cfg.learning_rate = cfg.learning_rate;
    opt_cfg.weight_decay = cfg.weight_decay;
    opt_cfg.batch_size = cfg.batch_size;
    opt_cfg.warmup = cfg.warmup;
    opt_cfg.seed = cfg.seed;
    const int steps_per_epoch = static_cast<int>(
        (forget_items.size() + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size));
    lm::GradientStepper stepper(model.n_params(), opt_cfg, steps_per_epoch);

    Rng retain_rng(derive_seed(cfg.seed, 30));
    std::vector<double> grad(model.n_params());
    std::vector<std::size_t> order(forget_items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    long step = 0;
    bool done = false;
    for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        for (std::size_t b = 0; b < forget_items.size() && !done;
             b += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t e =
                std::min(forget_items.size(), b + static_cast<std::size_t>(cfg.batch_size));
            std::vector<corpus::QAItem> fb;
            for (std::size_t i = b; i < e; ++i) fb.push_back(forget_items[order[i]]);
            std::vector<corpus::QAItem> rb;
            if (needs_retain)
                for (std::size_t i = b; i < e; ++i)
                    rb.push_back(retain_items[retain_rng.below(retain_items.size())]);

            std::fill(grad.begin(), grad.end(), 0.0);
            LossBreakdown loss;
            switch (cfg.algorithm) {
                case Algorithm::GA: loss = loss_ga(model, fb, &grad); break;
                case Algorithm::GD: loss = loss_gd(model, fb, rb, &grad); break;
                case Algorithm::KL: loss = loss_kl(model, reference, fb, rb, &grad); break;
                case Algorithm::PO:
                    loss = loss_po(model, reference, fb, rb, cfg.beta, cfg.refusal_answers,
                                   cfg.seed, &grad);
                    break;
                case Algorithm::NPO_GD:
                    loss = loss_npo_gd(model, reference, fb, rb, cfg.beta, &grad);
                    break;
            }
            if (!std::isfinite(loss.total)) {
                rec.aborted_step = step;
                done = true;
                break;
            }
            stepper.apply(model, grad, algorithm_name(cfg.algorithm));
            ++step;
            rec.losses.push_back({step, loss});
            if (step % cfg.eval_every_steps == 0) checkpoint(step);
            if (cfg.max_steps > 0 && step >= cfg.max_steps) done = true;
        }
    }
    if (rec.checkpoints.back().step != step && !rec.aborted_step) checkpoint(step);

    std::vector<double> fq;
    for (const auto& cp : rec.checkpoints)
        if (cp.report.forget_quality) fq.push_back(*cp.report.forget_quality);
    if (fq.size() == rec.checkpoints.size() && !fq.empty())
        rec.selected_checkpoint = select_first_peak(fq);
    else
        rec.selected_checkpoint = rec.checkpoints.size() - 1;
    return rec;
}

}  // namespace elu::unlearn
