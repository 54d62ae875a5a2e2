#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "elu/common.hpp"
#include "elu/corpus.hpp"
#include "elu/model.hpp"

namespace elu::unlearn {

using corpus::QAItem;

struct LossBreakdown {
    double total = 0.0;
    double forget_term = 0.0;
    double retain_term = 0.0;
    double regularizer = 0.0;
};

namespace detail {

inline double softplus(double x) {
    // log(1 + exp(x)), overflow-safe
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Mean over the batch of per-item answer-token cross-entropy (per-token
/// averaged within an item; the end marker counts as an answer token).
/// When grad is set, accumulates coeff * dL/dtheta.
inline double batch_cross_entropy(const lm::ModelHandle& model, std::span<const QAItem> batch,
                                  double coeff, std::vector<double>* grad) {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    double total = 0.0;
    const double item_w = 1.0 / static_cast<double>(batch.size());
    for (const auto& qa : batch) {
        const auto ex = model.encode_example(qa.question, qa.answer, true);
        const auto fwd = model.forward(ex);
        const double tok_w = 1.0 / static_cast<double>(ex.answer_len());
        double item_ce = 0.0;
        for (long r = 0; r < fwd.probs().rows(); ++r)
            item_ce -= std::log(
                fwd.probs()(r, ex.tokens[static_cast<std::size_t>(ex.first_target + r)]));
        total += item_ce * tok_w;
        if (grad) {
            lm::RowMat dlogits = fwd.probs() * (coeff * item_w * tok_w);
            for (long r = 0; r < dlogits.rows(); ++r)
                dlogits(r, ex.tokens[static_cast<std::size_t>(ex.first_target + r)]) -=
                    coeff * item_w * tok_w;
            fwd.backward(dlogits, *grad);
        }
    }
    return total * item_w;
}

/// Total (summed) answer-token log-probability of `qa` under `model`;
/// the sequence probability used by the preference losses. When grad is set,
/// accumulates coeff * d(log pi)/dtheta.
inline double sequence_logprob(const lm::ModelHandle& model, const QAItem& qa, double coeff,
                               std::vector<double>* grad) {
    const auto ex = model.encode_example(qa.question, qa.answer, true);
    const auto fwd = model.forward(ex);
    double lp = 0.0;
    for (long r = 0; r < fwd.probs().rows(); ++r)
        lp += std::log(fwd.probs()(r, ex.tokens[static_cast<std::size_t>(ex.first_target + r)]));
    if (grad && coeff != 0.0) {
        lm::RowMat dlogits = fwd.probs() * (-coeff);
        for (long r = 0; r < dlogits.rows(); ++r)
            dlogits(r, ex.tokens[static_cast<std::size_t>(ex.first_target + r)]) += coeff;
        fwd.backward(dlogits, *grad);
    }
    return lp;
}

inline double sequence_logprob(const lm::ModelHandle& model, const QAItem& qa) {
    return sequence_logprob(model, qa, 0.0, nullptr);
}

}  // namespace detail

/// Gradient ascent: minimizing the returned total maximizes the forget-set
/// cross-entropy.
inline LossBreakdown loss_ga(const lm::ModelHandle& model, std::span<const QAItem> forget_batch,
                             std::vector<double>* grad = nullptr) {
    LossBreakdown b;
    b.forget_term = -detail::batch_cross_entropy(model, forget_batch, -1.0, grad);
    b.total = b.forget_term;
    return b;
}

/// Gradient difference: ascent on the forget set, descent on the retain set.
inline LossBreakdown loss_gd(const lm::ModelHandle& model, std::span<const QAItem> forget_batch,
                             std::span<const QAItem> retain_batch,
                             std::vector<double>* grad = nullptr) {
    LossBreakdown b;
    b.forget_term = -detail::batch_cross_entropy(model, forget_batch, -1.0, grad);
    b.retain_term = detail::batch_cross_entropy(model, retain_batch, 1.0, grad);
    b.total = b.forget_term + b.retain_term;
    return b;
}

/// KL minimization: ascent on the forget set plus, per retain item, the KL
/// divergence from the frozen reference distribution to the current one,
/// summed over answer positions and averaged over items.
inline LossBreakdown loss_kl(const lm::ModelHandle& model, const lm::ModelHandle& reference_model,
                             std::span<const QAItem> forget_batch,
                             std::span<const QAItem> retain_batch,
                             std::vector<double>* grad = nullptr) {
    if (retain_batch.empty()) throw std::invalid_argument("loss_kl: empty retain batch");
    LossBreakdown b;
    b.forget_term = -detail::batch_cross_entropy(model, forget_batch, -1.0, grad);
    const double item_w = 1.0 / static_cast<double>(retain_batch.size());
    double reg = 0.0;
    for (const auto& qa : retain_batch) {
        const auto ex = model.encode_example(qa.question, qa.answer, true);
        const auto fwd = model.forward(ex);
        const auto ref_fwd = reference_model.forward(ex);
        const auto& p_cur = fwd.probs();
        const auto& p_ref = ref_fwd.probs();
        for (long r = 0; r < p_cur.rows(); ++r) {
            for (long c = 0; c < p_cur.cols(); ++c) {
                const double q = p_ref(r, c);
                if (q > 0.0) reg += q * (std::log(q) - std::log(p_cur(r, c))) * item_w;
            }
        }
        if (grad) {
            const lm::RowMat dlogits = (p_cur - p_ref) * item_w;
            fwd.backward(dlogits, *grad);
        }
    }
    b.regularizer = reg;
    b.total = b.forget_term + b.regularizer;
    return b;
}

inline const std::vector<std::string>& default_refusal_answers() {
    static const std::vector<std::string> v = {
        "I don't know.", "I cannot say.", "I have no idea.", "That is not something I know.",
        "I am not sure."};
    return v;
}

/// Preference optimization: DPO on (refusal answer preferred over the
/// original answer) for each forget item, plus descent on the retain set.
/// The refusal for item i is drawn deterministically from the pool by seed.
inline LossBreakdown loss_po(const lm::ModelHandle& model, const lm::ModelHandle& reference_model,
                             std::span<const QAItem> forget_batch,
                             std::span<const QAItem> retain_batch, double beta,
                             std::span<const std::string> refusal_answers, std::uint64_t seed,
                             std::vector<double>* grad = nullptr) {
    if (forget_batch.empty()) throw std::invalid_argument("loss_po: empty forget batch");
    if (refusal_answers.empty()) throw std::invalid_argument("loss_po: no refusal answers");
    if (beta <= 0.0) throw std::invalid_argument("loss_po: beta must be > 0");
    LossBreakdown b;
    const double item_w = 1.0 / static_cast<double>(forget_batch.size());
    for (std::size_t i = 0; i < forget_batch.size(); ++i) {
        const auto& qa = forget_batch[i];
        const QAItem preferred{qa.question,
                               refusal_answers[derive_seed(seed, i) % refusal_answers.size()]};
        const double lp_pref = detail::sequence_logprob(model, preferred);
        const double lp_disp = detail::sequence_logprob(model, qa);
        const double ref_pref = detail::sequence_logprob(reference_model, preferred);
        const double ref_disp = detail::sequence_logprob(reference_model, qa);
        const double margin = beta * ((lp_pref - ref_pref) - (lp_disp - ref_disp));
        b.forget_term += detail::softplus(-margin) * item_w;
        if (grad) {
            // d/dtheta -log sigmoid(margin) = -sigmoid(-margin) * d(margin)/dtheta
            const double c = detail::sigmoid(-margin) * beta * item_w;
            detail::sequence_logprob(model, preferred, -c, grad);
            detail::sequence_logprob(model, qa, c, grad);
        }
    }
    b.retain_term = detail::batch_cross_entropy(model, retain_batch, 1.0, grad);
    b.total = b.forget_term + b.retain_term;
    return b;
}

/// Negative preference optimization with retain descent:
/// (2/beta) mean log(1 + (pi/pi_ref)^beta) + L(retain).
inline LossBreakdown loss_npo_gd(const lm::ModelHandle& model,
                                 const lm::ModelHandle& reference_model,
                                 std::span<const QAItem> forget_batch,
                                 std::span<const QAItem> retain_batch, double beta,
                                 std::vector<double>* grad = nullptr) {
    if (forget_batch.empty()) throw std::invalid_argument("loss_npo_gd: empty forget batch");
    if (beta <= 0.0) throw std::invalid_argument("loss_npo_gd: beta must be > 0");
    LossBreakdown b;
    const double item_w = 1.0 / static_cast<double>(forget_batch.size());
    for (const auto& qa : forget_batch) {
        const double lp = detail::sequence_logprob(model, qa);
        const double ref_lp = detail::sequence_logprob(reference_model, qa);
        const double u = beta * (lp - ref_lp);
        b.forget_term += (2.0 / beta) * detail::softplus(u) * item_w;
        if (grad) {
            const double c = 2.0 * detail::sigmoid(u) * item_w;
            detail::sequence_logprob(model, qa, c, grad);
        }
    }
    b.retain_term = detail::batch_cross_entropy(model, retain_batch, 1.0, grad);
    b.total = b.forget_term + b.retain_term;
    return b;
}

}  // namespace elu::unlearn
