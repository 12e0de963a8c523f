#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "ornn/corpus.hpp"

// Skip-gram with negative sampling, trained with hand-written gradients
// (the autodiff tape would be needless overhead for axpy-sized updates).

namespace ornn {

struct SgnsConfig {
    int window = 5;
    int negatives = 100;
    int epochs = 50;
    int batch = 16;  // center-word positions per parameter update
    double lr = 0.2;
    int dim = 128;
    int threads = 1;  // >1 trains lock-free and forfeits reproducibility
    std::uint64_t seed = 1;
};

// The downstream artifact: input vectors plus the token index. Output
// vectors exist only while training runs.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::vector<std::string> tokens, std::size_t dim)
        : dim_(dim), tokens_(std::move(tokens)),
          vectors_(tokens_.size() * dim, 0.0) {
        for (std::size_t i = 0; i < tokens_.size(); ++i)
            index_[tokens_[i]] = static_cast<std::uint32_t>(i);
    }

    std::size_t size() const { return tokens_.size(); }
    std::size_t dim() const { return dim_; }
    const std::vector<std::string>& tokens() const { return tokens_; }

    std::optional<std::uint32_t> id(const std::string& token) const {
        auto it = index_.find(token);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::span<double> vec(std::uint32_t id) {
        return {vectors_.data() + id * dim_, dim_};
    }
    std::span<const double> vec(std::uint32_t id) const {
        return {vectors_.data() + id * dim_, dim_};
    }

    std::vector<double>& raw() { return vectors_; }
    const std::vector<double>& raw() const { return vectors_; }

    std::span<const double> lookup(const std::string& token) const {
        auto i = id(token);
        if (!i) throw DataError("token not in vocabulary: " + token);
        return vec(*i);
    }

    // m nearest in-vocabulary tokens by descending cosine, query excluded
    std::vector<std::pair<std::string, double>> nearest(
        const std::string& token, std::size_t m) const {
        auto qi = id(token);
        if (!qi) throw DataError("token not in vocabulary: " + token);
        return nearest_to(vec(*qi), m, *qi);
    }

    std::vector<std::pair<std::string, double>> nearest_to(
        std::span<const double> query, std::size_t m,
        std::optional<std::uint32_t> exclude = std::nullopt) const {
        std::vector<std::pair<double, std::uint32_t>> scored;
        scored.reserve(size());
        for (std::uint32_t i = 0; i < size(); ++i) {
            if (exclude && i == *exclude) continue;
            scored.emplace_back(cosine_span(query, vec(i)), i);
        }
        std::sort(scored.begin(), scored.end(), [](auto& a, auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        if (scored.size() > m) scored.resize(m);
        std::vector<std::pair<std::string, double>> out;
        out.reserve(scored.size());
        for (auto& [c, i] : scored) out.emplace_back(tokens_[i], c);
        return out;
    }

    static double cosine_span(std::span<const double> a,
                              std::span<const double> b) {
        double ab = 0.0, aa = 0.0, bb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            ab += a[i] * b[i];
            aa += a[i] * a[i];
            bb += b[i] * b[i];
        }
        if (aa == 0.0 || bb == 0.0) return 0.0;
        return ab / (std::sqrt(aa) * std::sqrt(bb));
    }

private:
    std::size_t dim_ = 0;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::vector<double> vectors_;
};

namespace sgns {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -log s(u_ctx . v) - sum_j log s(-u_nj . v)
inline double pair_loss(std::span<const double> v_center,
                        std::span<const double> u_context,
                        const std::vector<std::span<const double>>& u_neg) {
    auto dot_sp = [](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };
    double loss = -std::log(logistic(dot_sp(u_context, v_center)));
    for (const auto& u : u_neg)
        loss -= std::log(logistic(-dot_sp(u, v_center)));
    return loss;
}

// Accumulates dL/dv, dL/du_ctx and per-negative dL/du_nj.
inline void pair_backward(std::span<const double> v_center,
                          std::span<const double> u_context,
                          const std::vector<std::span<const double>>& u_neg,
                          std::span<double> g_center,
                          std::span<double> g_context,
                          std::vector<std::span<double>>& g_neg) {
    std::size_t d = v_center.size();
    auto dot_sp = [&](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += a[i] * b[i];
        return s;
    };
    double coef = logistic(dot_sp(u_context, v_center)) - 1.0;
    for (std::size_t i = 0; i < d; ++i) {
        g_context[i] += coef * v_center[i];
        g_center[i] += coef * u_context[i];
    }
    for (std::size_t j = 0; j < u_neg.size(); ++j) {
        double c = logistic(dot_sp(u_neg[j], v_center));
        for (std::size_t i = 0; i < d; ++i) {
            g_neg[j][i] += c * v_center[i];
            g_center[i] += c * u_neg[j][i];
        }
    }
}

}  // namespace sgns

struct SgnsReport {
    std::vector<double> epoch_loss;  // mean per-pair loss
    std::uint64_t pairs_per_epoch = 0;
};

namespace detail {

// Sparse gradient buffer for one minibatch of center positions.
class DeltaBuffer {
public:
    explicit DeltaBuffer(std::size_t dim) : dim_(dim) {}

    std::span<double> slot(std::uint32_t id) {
        auto [it, fresh] = index_.try_emplace(id, pool_.size());
        if (fresh) pool_.resize(pool_.size() + dim_, 0.0);
        return {pool_.data() + it->second, dim_};
    }

    void apply(std::vector<double>& matrix, double lr) {
        for (auto& [id, off] : index_) {
            double* dst = matrix.data() + static_cast<std::size_t>(id) * dim_;
            const double* src = pool_.data() + off;
            for (std::size_t i = 0; i < dim_; ++i) dst[i] -= lr * src[i];
        }
        index_.clear();
        pool_.clear();
    }

private:
    std::size_t dim_;
    std::unordered_map<std::uint32_t, std::size_t> index_;
    std::vector<double> pool_;
};

inline void sgns_train_range(
    const std::vector<TokenSequence>& corpus, std::size_t begin,
    std::size_t end, const Vocabulary& vocab, const SgnsConfig& cfg,
    std::vector<double>& input, std::vector<double>& output, double lr,
    std::uint64_t seed, double& loss_sum, std::uint64_t& pair_count) {
    std::size_t d = static_cast<std::size_t>(cfg.dim);
    Rng rng(seed);
    DeltaBuffer delta_in(d), delta_out(d);
    int centers_in_batch = 0;
    std::uint64_t pairs_in_batch = 0;
    std::vector<std::uint32_t> negs(cfg.negatives);

    auto vec = [&](std::vector<double>& m, std::uint32_t id) {
        return std::span<double>(m.data() + id * d, d);
    };
    // batch update is the mean over the batch's pairs
    auto flush = [&]() {
        if (pairs_in_batch == 0) return;
        double step = lr / static_cast<double>(pairs_in_batch);
        delta_in.apply(input, step);
        delta_out.apply(output, step);
        pairs_in_batch = 0;
        centers_in_batch = 0;
    };

    for (std::size_t s = begin; s < end; ++s) {
        const auto& toks = corpus[s].tokens;
        for (std::size_t c = 0; c < toks.size(); ++c) {
            std::uint32_t center = toks[c];
            for (int off = -cfg.window; off <= cfg.window; ++off) {
                if (off == 0) continue;
                std::ptrdiff_t p = static_cast<std::ptrdiff_t>(c) + off;
                if (p < 0 || p >= static_cast<std::ptrdiff_t>(toks.size()))
                    continue;
                std::uint32_t ctx = toks[p];
                for (int j = 0; j < cfg.negatives; ++j)
                    negs[j] = vocab.sample_noise(rng);

                std::span<const double> v = vec(input, center);
                std::vector<std::span<const double>> u_negs;
                u_negs.reserve(negs.size());
                for (auto n : negs) u_negs.emplace_back(vec(output, n));
                std::span<const double> u_ctx = vec(output, ctx);

                loss_sum += sgns::pair_loss(v, u_ctx, u_negs);
                ++pair_count;
                ++pairs_in_batch;

                // touch every slot before taking spans: slot() may grow
                // the pool and invalidate previously returned spans
                delta_in.slot(center);
                delta_out.slot(ctx);
                for (auto n : negs) delta_out.slot(n);
                std::vector<std::span<double>> g_negs;
                g_negs.reserve(negs.size());
                for (auto n : negs) g_negs.push_back(delta_out.slot(n));
                sgns::pair_backward(v, u_ctx, u_negs,
                                    delta_in.slot(center),
                                    delta_out.slot(ctx), g_negs);
            }
            if (++centers_in_batch >= cfg.batch) flush();
        }
    }
    flush();
}

}  // namespace detail

inline EmbeddingMatrix train_sgns(const std::vector<TokenSequence>& corpus,
                                  const Vocabulary& vocab,
                                  const SgnsConfig& cfg,
                                  SgnsReport* report = nullptr) {
    bool has_tokens = false;
    for (const auto& s : corpus)
        if (!s.tokens.empty()) has_tokens = true;
    if (!has_tokens) throw DataError("empty corpus");

    std::size_t d = static_cast<std::size_t>(cfg.dim);
    std::size_t n = vocab.size();
    std::vector<double> input(n * d), output(n * d, 0.0);
    {
        Rng rng(derive_seed(cfg.seed, 0));
        for (auto& v : input) v = uniform(rng, -0.5 / d, 0.5 / d);
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // linear decay from lr to lr/100 across epochs
        double frac = cfg.epochs > 1
                          ? static_cast<double>(epoch) / (cfg.epochs - 1)
                          : 0.0;
        double lr = cfg.lr * (1.0 - frac * 0.99);

        double loss_sum = 0.0;
        std::uint64_t pairs = 0;
        if (cfg.threads <= 1) {
            detail::sgns_train_range(corpus, 0, corpus.size(), vocab, cfg,
                                     input, output, lr,
                                     derive_seed(cfg.seed, 1 + epoch),
                                     loss_sum, pairs);
        } else {
            // hogwild: shards update shared matrices without locks
            std::size_t t = static_cast<std::size_t>(cfg.threads);
            std::vector<double> losses(t, 0.0);
            std::vector<std::uint64_t> counts(t, 0);
            std::vector<std::thread> workers;
            for (std::size_t w = 0; w < t; ++w) {
                std::size_t lo = corpus.size() * w / t;
                std::size_t hi = corpus.size() * (w + 1) / t;
                workers.emplace_back([&, w, lo, hi] {
                    detail::sgns_train_range(
                        corpus, lo, hi, vocab, cfg, input, output, lr,
                        derive_seed(cfg.seed, 1000 + epoch * t + w),
                        losses[w], counts[w]);
                });
            }
            for (auto& th : workers) th.join();
            for (std::size_t w = 0; w < t; ++w) {
                loss_sum += losses[w];
                pairs += counts[w];
            }
        }
        if (report) {
            report->epoch_loss.push_back(
                pairs ? loss_sum / static_cast<double>(pairs) : 0.0);
            report->pairs_per_epoch = pairs;
        }
    }

    EmbeddingMatrix m(vocab.tokens(), d);
    m.raw() = std::move(input);
    return m;
}

inline void save_embeddings(const std::string& path,
                            const EmbeddingMatrix& emb) {
    if (emb.size() == 0) throw DataError("refusing to save empty embeddings");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << emb.size() << " " << emb.dim() << "\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::uint32_t i = 0; i < emb.size(); ++i) {
        out << emb.tokens()[i];
        for (double v : emb.vec(i)) out << " " << v;
        out << "\n";
    }
}

inline EmbeddingMatrix load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    std::istringstream head(line);
    std::size_t n = 0, d = 0;
    if (!(head >> n >> d) || n == 0 || d == 0)
        throw DataError(path + ": malformed header, expected \"|V| d\"");

    std::vector<std::string> tokens;
    tokens.reserve(n);
    std::vector<double> vectors;
    vectors.reserve(n * d);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string tok;
        if (!(row >> tok))
            throw DataError(path + ": line " + std::to_string(line_no) +
                            ": missing token");
        std::vector<double> vals;
        double v;
        while (row >> v) vals.push_back(v);
        if (vals.size() != d)
            throw DataError(path + ": line " + std::to_string(line_no) +
                            ": expected " + std::to_string(d) +
                            " values, got " + std::to_string(vals.size()));
        tokens.push_back(std::move(tok));
        vectors.insert(vectors.end(), vals.begin(), vals.end());
    }
    if (tokens.size() != n)
        throw DataError(path + ": header declares " + std::to_string(n) +
                        " rows, file has " + std::to_string(tokens.size()));
    EmbeddingMatrix m(std::move(tokens), d);
    m.raw() = std::move(vectors);
    return m;
}

}  // namespace ornn
