#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ornn/autodiff.hpp"
#include "ornn/corpus.hpp"

// Prediction heads. The ordinal head is k-1 sigmoid binary classifiers
// (neuron i estimates P(rank > i)) trained with per-task MSE plus an
// order penalty
//   lambda * sum_i max(p[i+1] - p[i], 0)
// that discourages conflicting binary predictions. Softmax
// classification and rounded scalar regression are the ablation
// alternatives.

namespace ornn {

struct OrdinalPrediction {
    std::vector<double> probs;  // k-1 threshold probabilities
    int rank = 1;
    bool conflict = false;
    double score = 0.0;  // sum of probs, continuous triage key
};

// rank = 1 + #{i : p_i rounds to 1}, half rounds up; conflict flags any
// strict adjacent inversion p[i+1] > p[i].
inline std::pair<int, bool> decode_rank(const std::vector<double>& probs) {
    int rank = 1;
    bool conflict = false;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] >= 0.5) ++rank;
        if (i + 1 < probs.size() && probs[i + 1] > probs[i]) conflict = true;
    }
    return {rank, conflict};
}

inline OrdinalPrediction make_ordinal_prediction(std::vector<double> probs) {
    OrdinalPrediction p;
    auto [rank, conflict] = decode_rank(probs);
    p.rank = rank;
    p.conflict = conflict;
    p.score = 0.0;
    for (double v : probs) p.score += v;
    p.probs = std::move(probs);
    return p;
}

// Order penalty evaluated on plain values (the graph path mirrors this).
inline double order_penalty(const std::vector<double>& probs) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i)
        s += std::max(probs[i + 1] - probs[i], 0.0);
    return s;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (auto& v : p) v /= z;
    return p;
}

enum class HeadKind { Ordinal, Classification, Regression };

inline HeadKind head_from_name(const std::string& name) {
    if (name == "ordinal") return HeadKind::Ordinal;
    if (name == "classification") return HeadKind::Classification;
    if (name == "regression") return HeadKind::Regression;
    throw UsageError("unknown head type: " + name);
}

inline std::string head_name(HeadKind k) {
    switch (k) {
        case HeadKind::Ordinal: return "ordinal";
        case HeadKind::Classification: return "classification";
        default: return "regression";
    }
}

class Head {
public:
    Head() = default;

    Head(HeadKind kind, std::size_t feature_dim, int k, double lambda,
         Rng& rng)
        : kind_(kind), k_(k), lambda_(lambda) {
        if (k < 2) throw UsageError("k must be >= 2");
        if (lambda < 0.0) throw UsageError("lambda must be >= 0");
        std::size_t out = out_dim();
        double bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
        w_ = parameter(Tensor::uniform(feature_dim, out, -bound, bound, rng));
        b_ = parameter(Tensor(1, out));
        task_weights_.assign(k_ - 1, 1.0);  // uniform scheme
    }

    HeadKind kind() const { return kind_; }
    int k() const { return k_; }
    double lambda() const { return lambda_; }
    void set_lambda(double l) { lambda_ = l; }
    const std::vector<double>& task_weights() const { return task_weights_; }

    std::size_t out_dim() const {
        switch (kind_) {
            case HeadKind::Ordinal: return static_cast<std::size_t>(k_ - 1);
            case HeadKind::Classification:
                return static_cast<std::size_t>(k_);
            default: return 1;
        }
    }

    std::vector<NodePtr> parameters() const { return {w_, b_}; }
    std::vector<std::pair<std::string, NodePtr>> named_parameters() const {
        return {{"head.W", w_}, {"head.b", b_}};
    }

    NodePtr linear(const NodePtr& features) const {
        return add_row_bias(matmul(features, w_), b_);
    }

    // Ordinal probabilities p_i = sigmoid(w_i . x + b_i).
    NodePtr forward(const NodePtr& features) const {
        if (kind_ != HeadKind::Ordinal)
            throw UsageError("forward() is the ordinal head surface");
        return sigmoid(linear(features));
    }

    // Mean per-sample training loss for a labeled batch.
    NodePtr build_loss(const NodePtr& features,
                       const std::vector<int>& labels) const {
        detail::shape_check(labels.size() == features->value.rows(),
                            "head labels");
        switch (kind_) {
            case HeadKind::Ordinal: {
                NodePtr probs = forward(features);
                return ordinal_loss(probs, labels);
            }
            case HeadKind::Classification: {
                std::vector<std::size_t> zero_based;
                zero_based.reserve(labels.size());
                for (int y : labels) {
                    if (y < 1 || y > k_)
                        throw DataError("label out of range");
                    zero_based.push_back(static_cast<std::size_t>(y - 1));
                }
                return mean_all(softmax_cross_entropy(linear(features),
                                                      std::move(zero_based)));
            }
            default: {
                NodePtr out = linear(features);
                Tensor target(labels.size(), 1);
                for (std::size_t i = 0; i < labels.size(); ++i)
                    target.data[i] = static_cast<double>(labels[i]);
                NodePtr diff = sub(out, constant(std::move(target)));
                return mean_all(mul(diff, diff));
            }
        }
    }

    // MSE averaged over the k-1 tasks plus the order penalty, averaged
    // over the batch.
    NodePtr ordinal_loss(const NodePtr& probs,
                         const std::vector<int>& labels) const {
        std::size_t n = probs->value.rows();
        std::size_t km1 = static_cast<std::size_t>(k_ - 1);
        Tensor targets(n, km1);
        for (std::size_t i = 0; i < n; ++i) {
            auto bits = encode_label(labels[i], k_).bits;
            for (std::size_t c = 0; c < km1; ++c)
                targets.at(i, c) = bits[c];
        }
        Tensor tw(1, km1);
        for (std::size_t c = 0; c < km1; ++c) tw.data[c] = task_weights_[c];

        NodePtr diff = sub(probs, constant(std::move(targets)));
        NodePtr weighted_sq = mul_row_broadcast(mul(diff, diff),
                                                constant(std::move(tw)));
        NodePtr per_sample =
            scale(row_sums(weighted_sq), 1.0 / static_cast<double>(km1));
        if (lambda_ > 0.0 && km1 >= 2) {
            NodePtr upper = slice_cols(probs, 1, km1);
            NodePtr lower = slice_cols(probs, 0, km1 - 1);
            NodePtr penalty = row_sums(relu(sub(upper, lower)));
            per_sample = add(per_sample, scale(penalty, lambda_));
        }
        return mean_all(per_sample);
    }

    // Eval-mode prediction from a plain feature matrix row.
    OrdinalPrediction predict_row(const std::vector<double>& linear_out)
        const {
        switch (kind_) {
            case HeadKind::Ordinal: {
                std::vector<double> probs(linear_out.size());
                for (std::size_t i = 0; i < probs.size(); ++i)
                    probs[i] = 1.0 / (1.0 + std::exp(-linear_out[i]));
                return make_ordinal_prediction(std::move(probs));
            }
            case HeadKind::Classification: {
                auto p = softmax(linear_out);
                OrdinalPrediction pred;
                pred.probs = p;
                pred.rank = 1 + static_cast<int>(std::max_element(p.begin(),
                                                                  p.end()) -
                                                 p.begin());
                // expected rank as the continuous key
                pred.score = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i)
                    pred.score += p[i] * static_cast<double>(i + 1);
                return pred;
            }
            default: {
                OrdinalPrediction pred;
                double out = linear_out[0];
                pred.probs = {out};
                pred.score = out;
                pred.rank = static_cast<int>(
                    std::clamp<long long>(std::llround(out), 1, k_));
                return pred;
            }
        }
    }

private:
    HeadKind kind_ = HeadKind::Ordinal;
    int k_ = 7;
    double lambda_ = 0.5;
    std::vector<double> task_weights_;
    NodePtr w_, b_;
};

}  // namespace ornn
