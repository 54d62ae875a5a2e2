#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "elu/common.hpp"
#include "elu/corpus.hpp"
#include "elu/text.hpp"

namespace elu::lm {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

class DeserializationError : public std::runtime_error {
public:
    explicit DeserializationError(const std::string& what)
        : std::runtime_error("snapshot: " + what) {}
};

// ---------------------------------------------------------------------------
// Vocabulary: word-level over the corpus text, sorted for canonical ids.
// ---------------------------------------------------------------------------

class Vocab {
public:
    static constexpr int eos_id = 0;
    static constexpr int unk_id = 1;
    static constexpr int q_id = 2;   // question marker, renders as "Q:"
    static constexpr int a_id = 3;   // answer marker, renders as "\nA:"

    static Vocab build(const std::vector<std::string>& texts) {
        std::set<std::string> words;
        for (const auto& t : texts)
            for (auto& w : text::words(t)) words.insert(std::move(w));
        Vocab v;
        v.tokens_ = {"<eos>", "<unk>", "Q:", "\nA:"};
        for (const auto& w : words) v.tokens_.push_back(w);
        for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.ids_[v.tokens_[i]] = static_cast<int>(i);
        return v;
    }

    static Vocab from_tokens(std::vector<std::string> tokens) {
        Vocab v;
        v.tokens_ = std::move(tokens);
        for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.ids_[v.tokens_[i]] = static_cast<int>(i);
        return v;
    }

    int id(const std::string& w) const {
        auto it = ids_.find(w);
        return it == ids_.end() ? unk_id : it->second;
    }
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    std::vector<int> encode_words(const std::string& s) const {
        std::vector<int> out;
        for (const auto& w : text::words(s)) out.push_back(id(w));
        return out;
    }

    std::string decode_words(std::span<const int> ids) const {
        std::vector<std::string> ws;
        for (int t : ids)
            if (t > a_id) ws.push_back(token(t));
        return text::join_words(ws);
    }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ModelConfig {
    int layers = 2;
    int width = 64;
    int heads = 4;
    int context_length = 64;
    double init_std = 0.08;
};

struct TrainConfig {
    double learning_rate = 3e-4;
    double weight_decay = 0.01;
    int batch_size = 16;
    int epochs = 30;
    double warmup = 1.0;  // fraction of the first epoch spent in linear warmup
    std::uint64_t seed = 0;
};

struct ScoredContinuation {
    std::vector<int> prompt_tokens;
    std::vector<int> continuation_tokens;
    std::vector<double> per_token_logprob;  // nats, each <= 0
    double total_logprob = 0.0;
    bool degenerate = false;  // empty continuation: total defined as 0
};

struct EpochLog {
    int epoch;
    double mean_loss;
};

/// A tokenized QA example. Tokens before `first_target` condition the model;
/// tokens from `first_target` on are predicted (the answer span).
struct SeqExample {
    std::vector<int> tokens;
    int first_target = 0;

    int answer_len() const { return static_cast<int>(tokens.size()) - first_target; }
};

// ---------------------------------------------------------------------------
// ModelHandle: a from-scratch causal transformer LM
// ---------------------------------------------------------------------------

class ModelHandle {
public:
    static ModelHandle init(Vocab vocab, ModelConfig cfg, std::uint64_t seed) {
        if (vocab.size() <= a_id_guard()) throw std::invalid_argument("init: vocab too small");
        if (cfg.width % cfg.heads != 0)
            throw std::invalid_argument("init: width must be divisible by heads");
        if (cfg.layers < 1 || cfg.context_length < 4)
            throw std::invalid_argument("init: bad config");
        ModelHandle m;
        m.vocab_ = std::move(vocab);
        m.cfg_ = cfg;
        m.build_layout();
        m.params_.assign(m.n_params_, 0.0);
        if (cfg.init_std > 0.0) {
            Rng rng(derive_seed(seed, 7));
            for (double& p : m.params_) p = rng.normal(0.0, cfg.init_std);
        }
        return m;
    }

    const Vocab& vocab() const { return vocab_; }
    const ModelConfig& config() const { return cfg_; }
    std::size_t n_params() const { return n_params_; }
    long step_counter() const { return step_counter_; }
    void bump_step() { ++step_counter_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    // -- tokenization of the fixed QA serialization "Q: {q}\nA: {a}<eos>" --

    SeqExample encode_example(const std::string& question, const std::string& answer,
                              bool with_eos) const {
        SeqExample ex;
        ex.tokens.push_back(Vocab::q_id);
        for (int t : vocab_.encode_words(question)) ex.tokens.push_back(t);
        ex.tokens.push_back(Vocab::a_id);
        ex.first_target = static_cast<int>(ex.tokens.size());
        for (int t : vocab_.encode_words(answer)) ex.tokens.push_back(t);
        if (with_eos) ex.tokens.push_back(Vocab::eos_id);
        if (static_cast<int>(ex.tokens.size()) > cfg_.context_length)
            throw std::length_error("encode_example: sequence of " +
                                    std::to_string(ex.tokens.size()) + " tokens exceeds context " +
                                    std::to_string(cfg_.context_length));
        return ex;
    }

    // -- forward pass with cached activations ------------------------------

    struct Forward {
        const ModelHandle* model = nullptr;
        std::vector<int> tokens;
        int first_target = 0;
        // caches, one per layer
        struct Layer {
            RowMat x_in, a, q, k, v, o, x_mid, m, z1;
            Vec r1, r2;
            std::vector<RowMat> att;  // per head, TxT
        };
        std::vector<Layer> layers;
        RowMat x_final_in, xf;
        Vec rf;
        RowMat probs_;  // P x V, rows aligned with predicted tokens

        const RowMat& probs() const { return probs_; }

        /// Log-probabilities of the realized answer tokens.
        std::vector<double> realized_logprobs() const {
            std::vector<double> out;
            const int P = static_cast<int>(probs_.rows());
            out.reserve(static_cast<std::size_t>(P));
            for (int i = 0; i < P; ++i) {
                const int target = tokens[static_cast<std::size_t>(first_target + i)];
                out.push_back(std::log(probs_(i, target)));
            }
            return out;
        }

        double realized_logprob_sum() const {
            double s = 0.0;
            for (double v : realized_logprobs()) s += v;
            return s;
        }

        /// Backpropagates d(loss)/d(logits) at the predicted positions into a
        /// flat parameter-gradient accumulator.
        void backward(const RowMat& dlogits, std::vector<double>& grad) const {
            model->backward_impl(*this, dlogits, grad);
        }
    };

    Forward forward(const SeqExample& ex) const { return forward_impl(ex.tokens, ex.first_target); }

    // -- spec operations ----------------------------------------------------

    /// Teacher-forced per-token log-probabilities of `continuation` given
    /// `prompt` under the QA serialization.
    ScoredContinuation score(const std::string& prompt, const std::string& continuation) const {
        ScoredContinuation sc;
        sc.prompt_tokens = vocab_.encode_words(prompt);
        sc.continuation_tokens = vocab_.encode_words(continuation);
        if (sc.continuation_tokens.empty()) {
            sc.degenerate = true;
            sc.total_logprob = 0.0;
            return sc;
        }
        auto ex = encode_example(prompt, continuation, /*with_eos=*/false);
        auto fwd = forward(ex);
        sc.per_token_logprob = fwd.realized_logprobs();
        for (double v : sc.per_token_logprob) sc.total_logprob += v;
        return sc;
    }

    /// Deterministic argmax decoding; ties break toward the lowest token id.
    std::string greedy_decode(const std::string& prompt, int max_tokens) const {
        if (max_tokens < 1) throw std::invalid_argument("greedy_decode: max_tokens must be >= 1");
        std::vector<int> seq;
        seq.push_back(Vocab::q_id);
        for (int t : vocab_.encode_words(prompt)) seq.push_back(t);
        seq.push_back(Vocab::a_id);
        if (static_cast<int>(seq.size()) >= cfg_.context_length)
            throw std::length_error("greedy_decode: prompt exceeds context");
        std::vector<int> out;
        for (int i = 0; i < max_tokens; ++i) {
            const int next = argmax_next(seq);
            if (next == Vocab::eos_id) break;
            out.push_back(next);
            seq.push_back(next);
            if (static_cast<int>(seq.size()) >= cfg_.context_length) break;
        }
        return vocab_.decode_words(out);
    }

    /// Next-token distribution given a raw token context (diagnostic surface).
    Vec next_token_distribution(std::span<const int> ctx) const {
        std::vector<int> tokens(ctx.begin(), ctx.end());
        if (tokens.empty()) throw std::invalid_argument("next_token_distribution: empty context");
        const Vec logits = trunk_logits_last(tokens);
        const double mx = logits.maxCoeff();
        const Vec e = (logits.array() - mx).exp().matrix();
        return e / e.sum();
    }

    // -- persistence ---------------------------------------------------------

    std::vector<std::uint8_t> snapshot() const {
        std::vector<std::uint8_t> out;
        auto put_u32 = [&](std::uint32_t v) {
            for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        };
        auto put_u64 = [&](std::uint64_t v) {
            for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        };
        auto put_f64 = [&](double d) {
            std::uint64_t bits;
            std::memcpy(&bits, &d, 8);
            put_u64(bits);
        };
        out.push_back('E'); out.push_back('L'); out.push_back('U'); out.push_back('S');
        put_u32(1);  // version
        put_u32(static_cast<std::uint32_t>(cfg_.layers));
        put_u32(static_cast<std::uint32_t>(cfg_.width));
        put_u32(static_cast<std::uint32_t>(cfg_.heads));
        put_u32(static_cast<std::uint32_t>(cfg_.context_length));
        put_f64(cfg_.init_std);
        put_u64(static_cast<std::uint64_t>(step_counter_));
        put_u32(static_cast<std::uint32_t>(vocab_.size()));
        for (const auto& t : vocab_.tokens()) {
            put_u32(static_cast<std::uint32_t>(t.size()));
            out.insert(out.end(), t.begin(), t.end());
        }
        put_u64(n_params_);
        for (double p : params_) put_f64(p);
        return out;
    }

    static ModelHandle restore(std::span<const std::uint8_t> blob) {
        std::size_t pos = 0;
        auto need = [&](std::size_t n) {
            if (pos + n > blob.size()) throw DeserializationError("truncated blob");
        };
        auto get_u32 = [&]() {
            need(4);
            std::uint32_t v = 0;
            for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(blob[pos + i]) << (8 * i);
            pos += 4;
            return v;
        };
        auto get_u64 = [&]() {
            need(8);
            std::uint64_t v = 0;
            for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(blob[pos + i]) << (8 * i);
            pos += 8;
            return v;
        };
        auto get_f64 = [&]() {
            const std::uint64_t bits = get_u64();
            double d;
            std::memcpy(&d, &bits, 8);
            return d;
        };
        need(4);
        if (blob[0] != 'E' || blob[1] != 'L' || blob[2] != 'U' || blob[3] != 'S')
            throw DeserializationError("bad magic");
        pos = 4;
        if (get_u32() != 1) throw DeserializationError("unsupported version");
        ModelConfig cfg;
        cfg.layers = static_cast<int>(get_u32());
        cfg.width = static_cast<int>(get_u32());
        cfg.heads = static_cast<int>(get_u32());
        cfg.context_length = static_cast<int>(get_u32());
        cfg.init_std = get_f64();
        const auto steps = static_cast<long>(get_u64());
        const auto vs = get_u32();
        std::vector<std::string> tokens;
        tokens.reserve(vs);
        for (std::uint32_t i = 0; i < vs; ++i) {
            const auto len = get_u32();
            need(len);
            tokens.emplace_back(reinterpret_cast<const char*>(blob.data() + pos), len);
            pos += len;
        }
        ModelHandle m;
        m.vocab_ = Vocab::from_tokens(std::move(tokens));
        m.cfg_ = cfg;
        m.build_layout();
        const auto np = get_u64();
        if (np != m.n_params_) throw DeserializationError("parameter count mismatch");
        m.params_.resize(m.n_params_);
        for (std::size_t i = 0; i < m.n_params_; ++i) m.params_[i] = get_f64();
        if (pos != blob.size()) throw DeserializationError("trailing bytes");
        m.step_counter_ = steps;
        return m;
    }

    std::uint64_t checksum() const {
        const auto bytes = snapshot();
        return fnv1a64(bytes.data(), bytes.size());
    }

private:
    static constexpr int a_id_guard() { return Vocab::a_id; }

    Vocab vocab_;
    ModelConfig cfg_;
    std::vector<double> params_;
    std::size_t n_params_ = 0;
    long step_counter_ = 0;

    struct LayerOffsets {
        std::size_t wq, wk, wv, wo, w1, w2;
    };
    struct Layout {
        std::size_t wte, wpe, lm;
        std::vector<LayerOffsets> layer;
    } off_;

    void build_layout() {
        const auto V = static_cast<std::size_t>(vocab_.size());
        const auto D = static_cast<std::size_t>(cfg_.width);
        const auto C = static_cast<std::size_t>(cfg_.context_length);
        std::size_t cur = 0;
        off_.wte = cur; cur += V * D;
        off_.wpe = cur; cur += C * D;
        off_.layer.clear();
        for (int l = 0; l < cfg_.layers; ++l) {
            LayerOffsets lo;
            lo.wq = cur; cur += D * D;
            lo.wk = cur; cur += D * D;
            lo.wv = cur; cur += D * D;
            lo.wo = cur; cur += D * D;
            lo.w1 = cur; cur += 4 * D * D;
            lo.w2 = cur; cur += 4 * D * D;
            off_.layer.push_back(lo);
        }
        off_.lm = cur; cur += V * D;
        n_params_ = cur;
    }

    using CMap = Eigen::Map<const RowMat>;
    using MMap = Eigen::Map<RowMat>;

    CMap view(std::size_t off, long rows, long cols) const {
        return CMap(params_.data() + off, rows, cols);
    }
    static MMap gview(std::vector<double>& g, std::size_t off, long rows, long cols) {
        return MMap(g.data() + off, rows, cols);
    }

    static constexpr double rms_eps = 1e-5;

    static void rmsnorm_rows(const RowMat& x, RowMat& y, Vec& r) {
        const long T = x.rows();
        const long D = x.cols();
        y.resize(T, D);
        r.resize(T);
        for (long i = 0; i < T; ++i) {
            const double ms = x.row(i).squaredNorm() / static_cast<double>(D);
            r(i) = 1.0 / std::sqrt(ms + rms_eps);
            y.row(i) = x.row(i) * r(i);
        }
    }

    static void rmsnorm_backward(const RowMat& x, const Vec& r, const RowMat& dy, RowMat& dx) {
        const long T = x.rows();
        const long D = x.cols();
        dx.resize(T, D);
        for (long i = 0; i < T; ++i) {
            const double dot = dy.row(i).dot(x.row(i));
            dx.row(i) = dy.row(i) * r(i) -
                        x.row(i) * (r(i) * r(i) * r(i) * dot / static_cast<double>(D));
        }
    }

    /// Trunk (embedding + blocks + final norm) over the whole sequence.
    void run_trunk(const std::vector<int>& tokens, Forward& f) const {
        const long T = static_cast<long>(tokens.size());
        const long D = cfg_.width;
        const long H = cfg_.heads;
        const long hd = D / H;
        const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
        const auto wte = view(off_.wte, vocab_.size(), D);
        const auto wpe = view(off_.wpe, cfg_.context_length, D);

        RowMat x(T, D);
        for (long t = 0; t < T; ++t)
            x.row(t) = wte.row(tokens[static_cast<std::size_t>(t)]) + wpe.row(t);

        f.layers.resize(static_cast<std::size_t>(cfg_.layers));
        for (int l = 0; l < cfg_.layers; ++l) {
            auto& L = f.layers[static_cast<std::size_t>(l)];
            const auto& lo = off_.layer[static_cast<std::size_t>(l)];
            L.x_in = x;
            rmsnorm_rows(L.x_in, L.a, L.r1);
            L.q.noalias() = L.a * view(lo.wq, D, D).transpose();
            L.k.noalias() = L.a * view(lo.wk, D, D).transpose();
            L.v.noalias() = L.a * view(lo.wv, D, D).transpose();
            L.o.resize(T, D);
            L.att.assign(static_cast<std::size_t>(H), RowMat());
            for (long h = 0; h < H; ++h) {
                auto qh = L.q.middleCols(h * hd, hd);
                auto kh = L.k.middleCols(h * hd, hd);
                auto vh = L.v.middleCols(h * hd, hd);
                RowMat& p = L.att[static_cast<std::size_t>(h)];
                p = RowMat::Zero(T, T);
                for (long i = 0; i < T; ++i) {
                    double mx = -1e300;
                    for (long j = 0; j <= i; ++j) {
                        const double s = qh.row(i).dot(kh.row(j)) * scale;
                        p(i, j) = s;
                        mx = std::max(mx, s);
                    }
                    double sum = 0.0;
                    for (long j = 0; j <= i; ++j) {
                        p(i, j) = std::exp(p(i, j) - mx);
                        sum += p(i, j);
                    }
                    for (long j = 0; j <= i; ++j) p(i, j) /= sum;
                }
                L.o.middleCols(h * hd, hd).noalias() = p * vh;
            }
            x.noalias() = L.x_in + L.o * view(lo.wo, D, D).transpose();
            L.x_mid = x;
            rmsnorm_rows(L.x_mid, L.m, L.r2);
            L.z1.noalias() = L.m * view(lo.w1, 4 * D, D).transpose();
            x.noalias() = L.x_mid + L.z1.cwiseMax(0.0) * view(lo.w2, D, 4 * D).transpose();
        }
        f.x_final_in = x;
        rmsnorm_rows(f.x_final_in, f.xf, f.rf);
    }

    Forward forward_impl(const std::vector<int>& tokens, int first_target) const {
        if (static_cast<int>(tokens.size()) > cfg_.context_length)
            throw std::length_error("forward: sequence exceeds context");
        Forward f;
        f.model = this;
        f.tokens = tokens;
        f.first_target = first_target;
        run_trunk(tokens, f);

        const long T = static_cast<long>(tokens.size());
        const long P = T - first_target;
        const auto lm = view(off_.lm, vocab_.size(), cfg_.width);
        f.probs_.resize(std::max<long>(P, 0), vocab_.size());
        for (long i = 0; i < P; ++i) {
            const long pos = first_target - 1 + i;  // position whose logits predict token pos+1
            Eigen::RowVectorXd logits = f.xf.row(pos) * lm.transpose();
            const double mx = logits.maxCoeff();
            Eigen::RowVectorXd e = (logits.array() - mx).exp().matrix();
            f.probs_.row(i) = e / e.sum();
        }
        return f;
    }

    /// Logits of the next token after the full context (greedy decoding).
    Vec trunk_logits_last(const std::vector<int>& tokens) const {
        Forward f;
        f.model = this;
        f.tokens = tokens;
        run_trunk(tokens, f);
        const auto lm = view(off_.lm, vocab_.size(), cfg_.width);
        Eigen::RowVectorXd logits = f.xf.row(static_cast<long>(tokens.size()) - 1) * lm.transpose();
        return logits.transpose();
    }

    int argmax_next(const std::vector<int>& seq) const {
        const Vec logits = trunk_logits_last(seq);
        int best = 0;
        for (int i = 1; i < logits.size(); ++i)
            if (logits(i) > logits(best)) best = i;
        return best;
    }

    void backward_impl(const Forward& f, const RowMat& dlogits, std::vector<double>& grad) const {
        if (grad.size() != n_params_) throw std::invalid_argument("backward: bad grad size");
        const long T = static_cast<long>(f.tokens.size());
        const long D = cfg_.width;
        const long H = cfg_.heads;
        const long hd = D / H;
        const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
        const long P = dlogits.rows();
        if (P != f.probs_.rows()) throw std::invalid_argument("backward: bad dlogits rows");

        const auto lm = view(off_.lm, vocab_.size(), D);
        auto dlm = gview(grad, off_.lm, vocab_.size(), D);

        RowMat dxf = RowMat::Zero(T, D);
        for (long i = 0; i < P; ++i) {
            const long pos = f.first_target - 1 + i;
            dxf.row(pos).noalias() = dlogits.row(i) * lm;
            dlm.noalias() += dlogits.row(i).transpose() * f.xf.row(pos);
        }

        RowMat dx;
        rmsnorm_backward(f.x_final_in, f.rf, dxf, dx);

        for (int l = cfg_.layers - 1; l >= 0; --l) {
            const auto& L = f.layers[static_cast<std::size_t>(l)];
            const auto& lo = off_.layer[static_cast<std::size_t>(l)];

            // MLP sublayer: x2 = x_mid + relu(m W1^T) W2^T
            const RowMat h = L.z1.cwiseMax(0.0);
            const RowMat& df = dx;  // gradient wrt the mlp output branch
            gview(grad, lo.w2, D, 4 * D).noalias() += df.transpose() * h;
            RowMat dh = df * view(lo.w2, D, 4 * D);
            RowMat dz1 = dh.cwiseProduct((L.z1.array() > 0.0).cast<double>().matrix());
            gview(grad, lo.w1, 4 * D, D).noalias() += dz1.transpose() * L.m;
            RowMat dm = dz1 * view(lo.w1, 4 * D, D);
            RowMat dx_mid;
            rmsnorm_backward(L.x_mid, L.r2, dm, dx_mid);
            dx_mid += dx;  // residual path

            // Attention sublayer: x_mid = x_in + (heads -> o) Wo^T
            const RowMat& datt_out = dx_mid;
            gview(grad, lo.wo, D, D).noalias() += datt_out.transpose() * L.o;
            RowMat do_ = datt_out * view(lo.wo, D, D);

            RowMat dq = RowMat::Zero(T, D), dk = RowMat::Zero(T, D), dv = RowMat::Zero(T, D);
            for (long hh = 0; hh < H; ++hh) {
                const auto& p = L.att[static_cast<std::size_t>(hh)];
                auto kh = L.k.middleCols(hh * hd, hd);
                auto qh = L.q.middleCols(hh * hd, hd);
                auto vh = L.v.middleCols(hh * hd, hd);
                auto doh = do_.middleCols(hh * hd, hd);
                RowMat dp = doh * vh.transpose();           // T x T
                dv.middleCols(hh * hd, hd).noalias() = p.transpose() * doh;
                // softmax backward row-wise (masked entries have p == 0)
                RowMat ds(T, T);
                for (long i = 0; i < T; ++i) {
                    const double dot = dp.row(i).dot(p.row(i));
                    ds.row(i) = p.row(i).cwiseProduct((dp.row(i).array() - dot).matrix());
                }
                dq.middleCols(hh * hd, hd).noalias() = ds * kh * scale;
                dk.middleCols(hh * hd, hd).noalias() = ds.transpose() * qh * scale;
            }
            gview(grad, lo.wq, D, D).noalias() += dq.transpose() * L.a;
            gview(grad, lo.wk, D, D).noalias() += dk.transpose() * L.a;
            gview(grad, lo.wv, D, D).noalias() += dv.transpose() * L.a;
            RowMat da = dq * view(lo.wq, D, D);
            da.noalias() += dk * view(lo.wk, D, D);
            da.noalias() += dv * view(lo.wv, D, D);
            RowMat dx_in;
            rmsnorm_backward(L.x_in, L.r1, da, dx_in);
            dx = dx_in + dx_mid;  // residual path
        }

        auto dwte = gview(grad, off_.wte, vocab_.size(), D);
        auto dwpe = gview(grad, off_.wpe, cfg_.context_length, D);
        for (long t = 0; t < T; ++t) {
            dwte.row(f.tokens[static_cast<std::size_t>(t)]) += dx.row(t);
            dwpe.row(t) += dx.row(t);
        }
    }
};

// ---------------------------------------------------------------------------
// Optimizer: decoupled weight decay with linear warmup (AdamW update rule)
// ---------------------------------------------------------------------------

class GradientStepper {
public:
    GradientStepper(std::size_t n_params, const TrainConfig& cfg, int steps_per_epoch)
        : cfg_(cfg),
          warmup_steps_(std::max(1, static_cast<int>(std::llround(cfg.warmup * steps_per_epoch)))),
          m_(n_params, 0.0),
          v_(n_params, 0.0) {}

    /// One optimizer update. Throws NumericError on non-finite gradients.
    void apply(ModelHandle& model, std::span<const double> grad,
               const std::string& term_name = "gradient") {
        if (grad.size() != model.n_params())
            throw std::invalid_argument("GradientStepper: gradient size mismatch");
        for (double g : grad)
            if (!std::isfinite(g)) throw NumericError(term_name, "non-finite gradient entry");
        ++t_;
        const double lr =
            cfg_.learning_rate * std::min(1.0, static_cast<double>(t_) / warmup_steps_);
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        auto& p = model.params();
        for (std::size_t i = 0; i < p.size(); ++i) {
            m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
            v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
            const double mhat = m_[i] / c1;
            const double vhat = v_[i] / c2;
            p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + cfg_.weight_decay * p[i]);
        }
        model.bump_step();
    }

    long steps_taken() const { return t_; }

private:
    TrainConfig cfg_;
    int warmup_steps_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

// ---------------------------------------------------------------------------
// Training loop: answer-token cross-entropy over the QA serialization
// ---------------------------------------------------------------------------

/// Fine-tunes the model on QA pairs. Loss covers answer tokens (including the
/// end marker) only. Returns the per-epoch loss log.
inline std::vector<EpochLog> train(ModelHandle& model, std::span<const corpus::QAItem> dataset,
                                   const TrainConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("train: dataset empty");
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate must be > 0");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

    std::vector<SeqExample> examples;
    examples.reserve(dataset.size());
    for (const auto& qa : dataset) examples.push_back(model.encode_example(qa.question, qa.answer, true));

    const int steps_per_epoch =
        static_cast<int>((examples.size() + cfg.batch_size - 1) / cfg.batch_size);
    GradientStepper stepper(model.n_params(), cfg, steps_per_epoch);

    std::vector<EpochLog> log;
    std::vector<double> grad(model.n_params());
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    long global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        double epoch_ce = 0.0;
        long epoch_tokens = 0;
        for (std::size_t b = 0; b < examples.size(); b += cfg.batch_size) {
            const std::size_t e = std::min(examples.size(), b + cfg.batch_size);
            long batch_tokens = 0;
            for (std::size_t i = b; i < e; ++i) batch_tokens += examples[order[i]].answer_len();
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_ce = 0.0;
            for (std::size_t i = b; i < e; ++i) {
                const auto& ex = examples[order[i]];
                auto fwd = model.forward(ex);
                RowMat dlogits = fwd.probs() / static_cast<double>(batch_tokens);
                for (long r = 0; r < dlogits.rows(); ++r) {
                    const int target = ex.tokens[static_cast<std::size_t>(ex.first_target + r)];
                    batch_ce -= std::log(fwd.probs()(r, target));
                    dlogits(r, target) -= 1.0 / static_cast<double>(batch_tokens);
                }
                fwd.backward(dlogits, grad);
            }
            const double batch_loss = batch_ce / static_cast<double>(batch_tokens);
            if (!std::isfinite(batch_loss))
                throw TrainingDivergence(global_step, "batch loss non-finite");
            stepper.apply(model, grad, "cross_entropy");
            ++global_step;
            epoch_ce += batch_ce;
            epoch_tokens += batch_tokens;
        }
        log.push_back({epoch, epoch_ce / static_cast<double>(epoch_tokens)});
    }
    return log;
}

}  // namespace elu::lm
