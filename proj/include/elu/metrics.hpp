#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "elu/corpus.hpp"
#include "elu/model.hpp"
#include "elu/text.hpp"

namespace elu::metrics {

using corpus::EvalItem;
using corpus::KnowledgeSet;
using corpus::QAItem;
using corpus::Role;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// ROUGE-L recall
// ---------------------------------------------------------------------------

/// LCS(reference, hypothesis) / |reference| over normalized word tokens.
inline double rouge_l_recall(const std::string& reference, const std::string& hypothesis) {
    const auto ref = text::normalized_words(reference);
    const auto hyp = text::normalized_words(hypothesis);
    if (ref.empty()) throw std::domain_error("rouge_l_recall: empty reference");
    if (hyp.empty()) return 0.0;
    std::vector<std::size_t> prev(hyp.size() + 1, 0), cur(hyp.size() + 1, 0);
    for (std::size_t i = 1; i <= ref.size(); ++i) {
        for (std::size_t j = 1; j <= hyp.size(); ++j) {
            cur[j] = ref[i - 1] == hyp[j - 1] ? prev[j - 1] + 1
                                              : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[hyp.size()]) / static_cast<double>(ref.size());
}

// ---------------------------------------------------------------------------
// Probability forms (log-domain throughout)
// ---------------------------------------------------------------------------

/// Mean per-token log-probability of `a` given `q`; the log of the
/// length-normalized conditional probability.
inline double log_norm_prob(const lm::ModelHandle& model, const std::string& q,
                            const std::string& a) {
    auto sc = model.score(q, a);
    if (sc.degenerate) throw std::domain_error("norm_prob: empty answer");
    return sc.total_logprob / static_cast<double>(sc.per_token_logprob.size());
}

/// Length-normalized conditional probability P(a|q)^(1/|a|).
inline double norm_prob(const lm::ModelHandle& model, const std::string& q, const std::string& a) {
    return std::exp(log_norm_prob(model, q, a));
}

inline double log_sum_exp(std::span<const double> xs) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : xs) mx = std::max(mx, x);
    double s = 0.0;
    for (double x : xs) s += std::exp(x - mx);
    return mx + std::log(s);
}

/// Normalized share of the correct answer among itself and the five
/// perturbations, each length-normalized.
inline double norm_prob_ratio(const lm::ModelHandle& model, const EvalItem& item) {
    std::vector<double> lps;
    lps.push_back(log_norm_prob(model, item.question, item.answer));
    for (const auto& p : item.perturbations)
        lps.push_back(log_norm_prob(model, item.question, p));
    return std::exp(lps[0] - log_sum_exp(lps));
}

// ---------------------------------------------------------------------------
// Accuracy (argmax over paraphrase vs perturbations; ties count as incorrect)
// ---------------------------------------------------------------------------

inline bool accuracy_pick(double paraphrase_score, std::span<const double> perturbed_scores) {
    for (double s : perturbed_scores)
        if (!(paraphrase_score > s)) return false;
    return true;
}

inline double accuracy(const lm::ModelHandle& model, std::span<const EvalItem> items) {
    if (items.empty()) throw std::domain_error("accuracy: empty item list");
    std::size_t correct = 0;
    for (const auto& item : items) {
        const double para = log_norm_prob(model, item.question, item.paraphrase);
        std::vector<double> perts;
        for (const auto& p : item.perturbations)
            perts.push_back(log_norm_prob(model, item.question, p));
        if (accuracy_pick(para, perts)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(items.size());
}

// ---------------------------------------------------------------------------
// Truth ratio: min(R, 1/R), R = mean perturbed norm-prob / paraphrase norm-prob
// ---------------------------------------------------------------------------

inline double truth_ratio(const lm::ModelHandle& model, const EvalItem& item) {
    std::vector<double> pert_lps;
    for (const auto& p : item.perturbations)
        pert_lps.push_back(log_norm_prob(model, item.question, p));
    const double para_lp = log_norm_prob(model, item.question, item.paraphrase);
    const double log_r = log_sum_exp(pert_lps) - std::log(5.0) - para_lp;
    return std::exp(-std::abs(log_r));
}

// ---------------------------------------------------------------------------
// Two-sample Kolmogorov-Smirnov test
// ---------------------------------------------------------------------------

struct KsResult {
    double statistic;
    double p_value;
};

/// Survival function of the Kolmogorov distribution, Q(lambda).
inline double kolmogorov_q(double lambda) {
    const double a2 = -2.0 * lambda * lambda;
    double fac = 2.0, sum = 0.0, prev_term = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = fac * std::exp(a2 * k * k);
        sum += term;
        if (std::abs(term) <= 1e-3 * prev_term || std::abs(term) <= 1e-10 * sum)
            return std::clamp(sum, 0.0, 1.0);
        fac = -fac;
        prev_term = std::abs(term);
    }
    return 1.0;  // series failed to converge; lambda is tiny
}

/// D = sup |ECDF_x - ECDF_y|; p from the asymptotic Kolmogorov distribution
/// with effective sample size n_e = n_x n_y / (n_x + n_y) and the standard
/// small-sample correction.
inline KsResult ks_two_sample(std::span<const double> xs, std::span<const double> ys) {
    if (xs.empty() || ys.empty()) throw std::domain_error("ks_two_sample: empty sample");
    std::vector<double> x(xs.begin(), xs.end()), y(ys.begin(), ys.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const auto nx = static_cast<double>(x.size());
    const auto ny = static_cast<double>(y.size());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= v) ++i;
        while (j < y.size() && y[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    if (d == 0.0) return {0.0, 1.0};
    const double ne = nx * ny / (nx + ny);
    const double sq = std::sqrt(ne);
    const double lambda = (sq + 0.12 + 0.11 / sq) * d;
    return {d, kolmogorov_q(lambda)};
}

/// Forget quality: KS p-value between the truth-ratio distributions of the
/// unlearned model and a reference model never trained on the target items.
inline double forget_quality(const lm::ModelHandle& unlearned,
                             const lm::ModelHandle& reference_retain_model,
                             std::span<const EvalItem> target_items) {
    if (target_items.empty()) throw std::invalid_argument("forget_quality: empty target items");
    std::vector<double> a, b;
    for (const auto& item : target_items) {
        a.push_back(truth_ratio(unlearned, item));
        b.push_back(truth_ratio(reference_retain_model, item));
    }
    return ks_two_sample(a, b).p_value;
}

// ---------------------------------------------------------------------------
// Knowledge coverage
// ---------------------------------------------------------------------------

using SimilarityScorer = std::function<double(const QAItem&, const QAItem&)>;

/// Token-multiset F1 over the concatenated question+answer texts. The default
/// stand-in for an embedding similarity scorer.
inline double token_f1_similarity(const QAItem& x, const QAItem& y) {
    auto xt = text::normalized_words(x.question + " " + x.answer);
    auto yt = text::normalized_words(y.question + " " + y.answer);
    if (xt.empty() && yt.empty()) return 0.0;
    if (xt.empty() || yt.empty()) return 0.0;
    std::map<std::string, std::size_t> counts;
    for (const auto& t : xt) ++counts[t];
    std::size_t overlap = 0;
    for (const auto& t : yt) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    return 2.0 * static_cast<double>(overlap) / static_cast<double>(xt.size() + yt.size());
}

inline SimilarityScorer exact_match_scorer() {
    return [](const QAItem& a, const QAItem& b) {
        return a.question == b.question && a.answer == b.answer ? 1.0 : 0.0;
    };
}

/// Each forget item maps to its best-matching target item; each target item
/// scores the best similarity among forget items mapped to it (0 when none).
/// Coverage is the mean of those per-target scores.
inline double knowledge_coverage(const KnowledgeSet& forget, const KnowledgeSet& target,
                                 const SimilarityScorer& scorer) {
    const auto fs = forget.qas();
    const auto ts = target.qas();
    if (fs.empty() || ts.empty())
        throw std::invalid_argument("knowledge_coverage: empty set");
    std::vector<double> best(ts.size(), 0.0);
    for (const auto& f : fs) {
        std::size_t arg = 0;
        double mx = -1.0;
        for (std::size_t j = 0; j < ts.size(); ++j) {
            const double s = scorer(f, ts[j]);
            if (s > mx) {
                mx = s;
                arg = j;
            }
        }
        best[arg] = std::max(best[arg], mx);
    }
    double sum = 0.0;
    for (double v : best) sum += v;
    return sum / static_cast<double>(ts.size());
}

// ---------------------------------------------------------------------------
// Harmonic aggregates
// ---------------------------------------------------------------------------

/// n / sum(1/v). Values <= 0 dominate: the mean is defined as 0 and the
/// caller records a flag.
inline double harmonic_mean(std::span<const double> values, bool* zero_dominated = nullptr) {
    if (values.empty()) throw std::domain_error("harmonic_mean: empty input");
    double inv = 0.0;
    for (double v : values) {
        if (v <= 0.0) {
            if (zero_dominated) *zero_dominated = true;
            return 0.0;
        }
        inv += 1.0 / v;
    }
    return static_cast<double>(values.size()) / inv;
}

// ---------------------------------------------------------------------------
// MetricReport and the evaluation engine
// ---------------------------------------------------------------------------

struct SetMetrics {
    double probability = 0.0;
    double rouge = 0.0;
    double accuracy = 0.0;
};

struct MetricReport {
    std::map<Role, SetMetrics> per_set;
    std::map<Role, std::vector<double>> truth_ratios;
    std::optional<double> forget_quality;
    std::map<Role, double> set_scores;
    double model_utility = 0.0;
    std::vector<std::string> flags;
};

inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

inline ordered_json metric_report_to_json(const MetricReport& r) {
    ordered_json j;
    ordered_json prob, rouge, acc, ratios, scores;
    for (const auto& [role, m] : r.per_set) {
        prob[corpus::role_name(role)] = round6(m.probability);
        rouge[corpus::role_name(role)] = round6(m.rouge);
        acc[corpus::role_name(role)] = round6(m.accuracy);
    }
    for (const auto& [role, v] : r.truth_ratios) {
        ordered_json arr = ordered_json::array();
        for (double t : v) arr.push_back(round6(t));
        ratios[corpus::role_name(role)] = std::move(arr);
    }
    for (const auto& [role, v] : r.set_scores) scores[corpus::role_name(role)] = round6(v);
    j["probability"] = std::move(prob);
    j["rouge"] = std::move(rouge);
    j["accuracy"] = std::move(acc);
    j["truth_ratios"] = std::move(ratios);
    if (r.forget_quality)
        j["forget_quality"] = round6(*r.forget_quality);
    else
        j["forget_quality"] = nullptr;
    j["set_scores"] = std::move(scores);
    j["model_utility"] = round6(r.model_utility);
    j["flags"] = r.flags;
    return j;
}

/// Evaluates a model over role-tagged evaluation sets. When reference
/// truth-ratios for the target set are installed, reports forget quality
/// against them.
class MetricEngine {
public:
    explicit MetricEngine(std::map<Role, KnowledgeSet> eval_sets, int decode_max_tokens = 24)
        : sets_(std::move(eval_sets)), decode_max_tokens_(decode_max_tokens) {
        for (const auto& [role, ks] : sets_)
            if (ks.eval_items.empty())
                throw std::invalid_argument(std::string("MetricEngine: set '") +
                                            corpus::role_name(role) + "' has no eval items");
    }

    /// Installs the frozen truth-ratio list of the retain-only reference model
    /// on the target items. Questions are kept to validate item alignment.
    void set_reference_truth_ratios(std::vector<double> ratios,
                                    std::vector<std::string> questions) {
        const auto it = sets_.find(Role::target);
        if (it == sets_.end())
            throw std::invalid_argument("MetricEngine: no target set to reference");
        if (ratios.size() != it->second.eval_items.size() || ratios.size() != questions.size())
            throw std::invalid_argument("MetricEngine: reference item list mismatch");
        for (std::size_t i = 0; i < questions.size(); ++i)
            if (questions[i] != it->second.eval_items[i].question)
                throw std::invalid_argument("MetricEngine: reference question mismatch at " +
                                            std::to_string(i));
        reference_ratios_ = std::move(ratios);
    }

    bool has_reference() const { return !reference_ratios_.empty(); }
    const std::map<Role, KnowledgeSet>& sets() const { return sets_; }

    static std::vector<double> truth_ratios_of(const lm::ModelHandle& model,
                                               std::span<const EvalItem> items) {
        std::vector<double> out;
        out.reserve(items.size());
        for (const auto& item : items) out.push_back(truth_ratio(model, item));
        return out;
    }

    MetricReport evaluate(const lm::ModelHandle& model) const {
        MetricReport r;
        for (const auto& [role, ks] : sets_) {
            const auto& items = ks.eval_items;
            const bool ratio_form = role == Role::world_facts || role == Role::real_authors_analog;
            double prob_sum = 0.0, rouge_sum = 0.0;
            std::size_t correct = 0;
            std::vector<double> ratios;
            ratios.reserve(items.size());
            for (const auto& item : items) {
                prob_sum += ratio_form ? norm_prob_ratio(model, item)
                                       : norm_prob(model, item.question, item.answer);
                rouge_sum += rouge_l_recall(item.answer,
                                            model.greedy_decode(item.question, decode_max_tokens_));
                const double para = log_norm_prob(model, item.question, item.paraphrase);
                std::vector<double> perts;
                perts.reserve(5);
                for (const auto& p : item.perturbations)
                    perts.push_back(log_norm_prob(model, item.question, p));
                if (accuracy_pick(para, perts)) ++correct;
                ratios.push_back(truth_ratio(model, item));
            }
            SetMetrics m;
            const auto n = static_cast<double>(items.size());
            m.probability = prob_sum / n;
            m.rouge = rouge_sum / n;
            m.accuracy = static_cast<double>(correct) / n;
            bool zero = false;
            const double values[3] = {m.probability, m.rouge, m.accuracy};
            r.set_scores[role] = harmonic_mean(values, &zero);
            if (zero) r.flags.push_back(std::string("zero_dominated:") + corpus::role_name(role));
            r.per_set[role] = m;
            r.truth_ratios[role] = std::move(ratios);
        }
        if (!reference_ratios_.empty()) {
            const auto& tr = r.truth_ratios.at(Role::target);
            r.forget_quality = ks_two_sample(tr, reference_ratios_).p_value;
        }
        // Model utility: harmonic mean of the nine values from the three
        // pretraining-analog sets.
        static constexpr Role utility_roles[3] = {Role::retain, Role::real_authors_analog,
                                                  Role::world_facts};
        std::vector<double> nine;
        for (Role role : utility_roles) {
            auto it = r.per_set.find(role);
            if (it == r.per_set.end()) continue;
            nine.push_back(it->second.probability);
            nine.push_back(it->second.rouge);
            nine.push_back(it->second.accuracy);
        }
        if (nine.size() == 9) {
            bool zero = false;
            r.model_utility = harmonic_mean(nine, &zero);
            if (zero) r.flags.push_back("zero_dominated:model_utility");
        }
        return r;
    }

private:
    std::map<Role, KnowledgeSet> sets_;
    int decode_max_tokens_;
    std::vector<double> reference_ratios_;
};

}  // namespace elu::metrics
