#pragma once

#include <concepts>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "elu/common.hpp"
#include "elu/corpus.hpp"
#include "elu/losses.hpp"
#include "elu/text.hpp"

namespace elu::probe {

using corpus::EntityProfile;
using corpus::KnowledgeSet;
using corpus::QAItem;
using ordered_json = nlohmann::ordered_json;

/// Anything that can answer a prompt by greedy decoding. Satisfied by
/// lm::ModelHandle and by scripted stubs in tests.
template <typename M>
concept TextModel = requires(const M& m, const std::string& prompt, int max_tokens) {
    { m.greedy_decode(prompt, max_tokens) } -> std::convertible_to<std::string>;
};

// Versioned copies of these prompt surfaces live in templates/.
inline const char* question_prompt_v1() { return "Ask question {i} about {name}"; }
inline const char* verify_prompt_v1() {
    return "Check {question} {answer} Options A {first} B {second}";
}

struct ProbeConfig {
    int questions_per_round = 5;
    int verify_rounds = 5;
    int target_size = 20;
    int max_rounds = 12;
    std::uint64_t seed = 0;
    std::string question_prompt = question_prompt_v1();
    std::string verify_prompt = verify_prompt_v1();
    int decode_max_tokens = 24;
};

enum class RejectReason { duplicate, missing_name, failed_verification };

inline const char* reject_reason_name(RejectReason r) {
    switch (r) {
        case RejectReason::duplicate: return "duplicate";
        case RejectReason::missing_name: return "missing_name";
        case RejectReason::failed_verification: return "failed_verification";
    }
    return "?";
}

struct RejectedItem {
    std::string question;
    std::string answer;  // empty for stage-1 rejections
    RejectReason reason;
};

struct ProbeResult {
    KnowledgeSet forget_set;
    int rounds_used = 0;
    std::vector<RejectedItem> rejected;
    bool shortfall = false;
};

namespace detail {

inline std::string substitute(std::string s, const std::string& key, const std::string& value) {
    const std::string slot = "{" + key + "}";
    for (auto pos = s.find(slot); pos != std::string::npos; pos = s.find(slot))
        s.replace(pos, slot.size(), value);
    return s;
}

}  // namespace detail

/// Stage 1: prompt the model for entity-related questions. The seed selects
/// the deterministic prompt slice (indices seed*k+1 .. seed*k+k); candidates
/// must contain the entity name verbatim and be pairwise distinct after
/// normalization. Rejections are appended to `rejected` when provided.
template <TextModel M>
std::vector<std::string> generate_questions(const M& model, const std::string& entity_name, int k,
                                            std::uint64_t seed,
                                            std::vector<RejectedItem>* rejected = nullptr,
                                            const ProbeConfig& cfg = {}) {
    if (k < 1) throw std::invalid_argument("generate_questions: k must be >= 1");
    std::vector<std::string> kept;
    std::set<std::string> seen;
    for (int j = 0; j < k; ++j) {
        const std::uint64_t index = seed * static_cast<std::uint64_t>(k) + 1 + static_cast<std::uint64_t>(j);
        std::string prompt = detail::substitute(cfg.question_prompt, "i", std::to_string(index));
        prompt = detail::substitute(prompt, "name", entity_name);
        const std::string out = model.greedy_decode(prompt, cfg.decode_max_tokens);
        if (out.empty()) continue;
        if (!text::contains_name(out, entity_name)) {
            if (rejected) rejected->push_back({out, "", RejectReason::missing_name});
            continue;
        }
        const std::string norm = text::normalize(out);
        if (!seen.insert(norm).second) {
            if (rejected) rejected->push_back({out, "", RejectReason::duplicate});
            continue;
        }
        kept.push_back(out);
    }
    return kept;
}

/// Stage 2: greedy answers; empty decodes are dropped into `rejected`.
template <TextModel M>
std::vector<QAItem> answer_questions(const M& model, std::span<const std::string> questions,
                                     std::vector<RejectedItem>* rejected = nullptr,
                                     const ProbeConfig& cfg = {}) {
    std::vector<QAItem> out;
    for (const auto& q : questions) {
        std::string a = model.greedy_decode(q, cfg.decode_max_tokens);
        if (a.empty()) {
            if (rejected) rejected->push_back({q, "", RejectReason::failed_verification});
            continue;
        }
        out.push_back({q, std::move(a)});
    }
    return out;
}

/// Stage 3: multi-round yes/no confirmation with independently shuffled
/// option positions. True only when the model picks the Yes option in every
/// round; output that is neither option letter counts as No.
template <TextModel M>
bool self_verify(const M& model, const QAItem& item, int rounds, std::uint64_t seed,
                 const ProbeConfig& cfg = {}) {
    if (rounds < 1) throw std::invalid_argument("self_verify: rounds must be >= 1");
    Rng rng(derive_seed(seed, 17));
    for (int r = 0; r < rounds; ++r) {
        const bool yes_first = rng.below(2) == 0;
        std::string prompt = detail::substitute(cfg.verify_prompt, "question", item.question);
        prompt = detail::substitute(prompt, "answer", item.answer);
        prompt = detail::substitute(prompt, "first", yes_first ? "Yes" : "No");
        prompt = detail::substitute(prompt, "second", yes_first ? "No" : "Yes");
        const std::string out = model.greedy_decode(prompt, 2);
        const auto ws = text::words(out);
        const std::string choice = ws.empty() ? "" : ws.front();
        const bool chose_yes =
            (choice == "A" && yes_first) || (choice == "B" && !yes_first);
        if (!chose_yes) return false;
    }
    return true;
}

/// Full construction loop: generate -> answer -> verify rounds until
/// target_size verified items or max_rounds. Uses only the entity's name.
template <TextModel M>
ProbeResult build_forget_set(const M& model, const EntityProfile& entity,
                             const ProbeConfig& cfg) {
    if (cfg.verify_rounds < 1 || cfg.target_size < 1)
        throw std::invalid_argument("build_forget_set: bad config");
    ProbeResult res;
    res.forget_set.role = corpus::Role::forget;
    res.forget_set.source_entity = entity.entity_id;

    std::set<std::string> seen_norm;
    std::uint64_t verify_counter = 0;
    for (int round = 0; round < cfg.max_rounds; ++round) {
        if (static_cast<int>(res.forget_set.qa_items.size()) >= cfg.target_size) break;
        res.rounds_used = round + 1;
        auto qs = generate_questions(model, entity.name, cfg.questions_per_round,
                                     static_cast<std::uint64_t>(round), &res.rejected, cfg);
        // cross-round repetition check
        std::vector<std::string> fresh;
        for (auto& q : qs) {
            const std::string norm = text::normalize(q);
            if (!seen_norm.insert(norm).second) {
                res.rejected.push_back({q, "", RejectReason::duplicate});
                continue;
            }
            fresh.push_back(std::move(q));
        }
        auto answered = answer_questions(model, fresh, &res.rejected, cfg);
        for (auto& item : answered) {
            if (static_cast<int>(res.forget_set.qa_items.size()) >= cfg.target_size) break;
            const bool ok = self_verify(model, item, cfg.verify_rounds,
                                        derive_seed(cfg.seed, 900 + verify_counter++), cfg);
            if (ok)
                res.forget_set.qa_items.push_back(std::move(item));
            else
                res.rejected.push_back(
                    {item.question, item.answer, RejectReason::failed_verification});
        }
    }
    res.shortfall = static_cast<int>(res.forget_set.qa_items.size()) < cfg.target_size;
    return res;
}

/// Replaces round(ratio * |forget|) items of the forget set with distinct
/// target-set items. Replacement positions and incoming items are nested
/// across ratios for a fixed seed: raising the ratio only adds replacements.
inline KnowledgeSet replace_with_target(const KnowledgeSet& forget, const KnowledgeSet& target,
                                        double ratio, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0))
        throw std::domain_error("replace_with_target: ratio outside [0,1]");
    auto out_items = forget.qas();
    const auto targets = target.qas();
    const auto n = out_items.size();
    const auto m = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    if (m > targets.size())
        throw std::invalid_argument("replace_with_target: target set too small");
    Rng pos_rng(derive_seed(seed, 1));
    Rng item_rng(derive_seed(seed, 2));
    auto positions = pos_rng.sample_indices(n, n);
    auto incoming = item_rng.sample_indices(targets.size(), targets.size());
    for (std::size_t i = 0; i < m; ++i) out_items[positions[i]] = targets[incoming[i]];
    KnowledgeSet out;
    out.role = corpus::Role::forget;
    out.qa_items = std::move(out_items);
    out.source_entity = target.source_entity;
    return out;
}

// ---------------------------------------------------------------------------
// Behavior installation: training demos that make a from-scratch model
// productive under the probe prompts (question asking, yes/no checking,
// refusals for unknown attributes). Demo identities are disjoint from the
// corpus entities, so a target entity's facts remain its entire exposure.
// ---------------------------------------------------------------------------

struct DemoConfig {
    int n_demo_entities = 4;
    int facts_per_demo = 20;
    int refusals_per_demo = 2;
    std::uint64_t seed = 0;
};

inline std::vector<QAItem> build_probe_demos(const DemoConfig& dc, const ProbeConfig& pc = {}) {
    const auto n_templates = corpus::author_template_count();
    if (dc.facts_per_demo < 1 ||
        static_cast<std::size_t>(dc.facts_per_demo + dc.refusals_per_demo) > n_templates)
        throw std::invalid_argument("build_probe_demos: bad demo fact count");
    const auto names = corpus::demo_names(static_cast<std::size_t>(dc.n_demo_entities));
    const auto& refusals = unlearn::default_refusal_answers();
    std::vector<QAItem> out;
    for (std::size_t d = 0; d < names.size(); ++d) {
        Rng rng(derive_seed(dc.seed, 40 + d));
        const auto& name = names[d];
        for (int f = 0; f < dc.facts_per_demo; ++f) {
            const auto& t = corpus::author_template(static_cast<std::size_t>(f));
            const auto& values = corpus::template_pool(t);
            const std::size_t vi = rng.below(values.size());
            std::size_t wi = rng.below(values.size() - 1);
            if (wi >= vi) ++wi;
            const QAItem fact{corpus::render_question(t, name),
                              corpus::render_answer(t, name, values[vi])};
            out.push_back(fact);
            // index -> question demo ("Ask question {i} about {name}")
            std::string prompt = detail::substitute(pc.question_prompt, "i", std::to_string(f + 1));
            prompt = detail::substitute(prompt, "name", name);
            out.push_back({prompt, fact.question});
            // verification demos: one true pair and one false pair per fact,
            // with alternating option orders
            const bool yes_first = f % 2 == 0;
            auto verify_demo = [&](const QAItem& qa, bool truthful, bool yf) {
                std::string vp = detail::substitute(pc.verify_prompt, "question", qa.question);
                vp = detail::substitute(vp, "answer", qa.answer);
                vp = detail::substitute(vp, "first", yf ? "Yes" : "No");
                vp = detail::substitute(vp, "second", yf ? "No" : "Yes");
                const bool pick_first = truthful == yf;
                out.push_back({vp, pick_first ? "A" : "B"});
            };
            verify_demo(fact, true, yes_first);
            verify_demo({fact.question, corpus::render_answer(t, name, values[wi])}, false,
                        !yes_first);
        }
        // refusal demos on attributes this identity never learned
        for (int j = 0; j < dc.refusals_per_demo; ++j) {
            const auto& t = corpus::author_template(static_cast<std::size_t>(dc.facts_per_demo + j));
            out.push_back({corpus::render_question(t, name),
                           refusals[static_cast<std::size_t>(j) % refusals.size()]});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline ordered_json probe_result_to_json(const ProbeResult& r) {
    ordered_json j;
    j["source_entity"] = r.forget_set.source_entity.value_or("");
    j["items"] = ordered_json::array();
    for (const auto& qa : r.forget_set.qa_items)
        j["items"].push_back({{"question", qa.question}, {"answer", qa.answer}});
    j["rounds_used"] = r.rounds_used;
    j["shortfall"] = r.shortfall;
    j["rejected"] = ordered_json::array();
    for (const auto& rej : r.rejected)
        j["rejected"].push_back({{"question", rej.question},
                                 {"answer", rej.answer},
                                 {"reason", reject_reason_name(rej.reason)}});
    return j;
}

inline ProbeResult probe_result_from_json(const ordered_json& j) {
    ProbeResult r;
    r.forget_set.role = corpus::Role::forget;
    const std::string src = j.at("source_entity").get<std::string>();
    if (!src.empty()) r.forget_set.source_entity = src;
    for (const auto& ji : j.at("items"))
        r.forget_set.qa_items.push_back(
            {ji.at("question").get<std::string>(), ji.at("answer").get<std::string>()});
    r.rounds_used = j.at("rounds_used").get<int>();
    r.shortfall = j.at("shortfall").get<bool>();
    for (const auto& jr : j.at("rejected")) {
        RejectedItem item;
        item.question = jr.at("question").get<std::string>();
        item.answer = jr.at("answer").get<std::string>();
        const std::string reason = jr.at("reason").get<std::string>();
        if (reason == "duplicate") item.reason = RejectReason::duplicate;
        else if (reason == "missing_name") item.reason = RejectReason::missing_name;
        else item.reason = RejectReason::failed_verification;
        r.rejected.push_back(std::move(item));
    }
    return r;
}

}  // namespace elu::probe
