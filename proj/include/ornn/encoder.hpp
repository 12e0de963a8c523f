#pragma once

#include <map>
#include <string>
#include <vector>

#include "ornn/autodiff.hpp"
#include "ornn/corpus.hpp"

// Stacked recurrent document encoder. Cell dynamics are LSTM-style; in
// gfrnn mode layer j's recurrent input is
//   sum_i g(i->j) * (h_prev[i] @ U[i][j])
// with a scalar feedback gate per (source, target) layer pair,
//   g(i->j) = sigmoid(x_j @ wg + hstar_prev @ ug),
// where hstar concatenates every layer's previous hidden state. A batch
// is bucketed by sequence length so no padding is ever processed, then
// mean-pooled over time on the top layer.

namespace ornn {

struct EncoderConfig {
    enum class Cell { GfRnn, Lstm };
    Cell cell = Cell::GfRnn;
    int layers = 3;
    int hidden = 128;
    double dropout = 0.2;
    bool residual = true;
    bool batch_norm = true;
};

inline EncoderConfig::Cell cell_from_name(const std::string& name) {
    if (name == "gfrnn") return EncoderConfig::Cell::GfRnn;
    if (name == "lstm") return EncoderConfig::Cell::Lstm;
    throw UsageError("unknown cell type: " + name);
}

inline std::string cell_name(EncoderConfig::Cell c) {
    return c == EncoderConfig::Cell::GfRnn ? "gfrnn" : "lstm";
}

class Encoder {
public:
    Encoder() = default;

    Encoder(EncoderConfig cfg, std::size_t emb_dim, Rng& rng)
        : cfg_(cfg), emb_dim_(emb_dim) {
        if (cfg.layers < 1) throw UsageError("layers must be >= 1");
        if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
            throw UsageError("dropout must be in [0, 1)");
        if (cfg.hidden < 1) throw UsageError("hidden must be positive");

        std::size_t h = static_cast<std::size_t>(cfg.hidden);
        std::size_t L = static_cast<std::size_t>(cfg.layers);
        double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
        auto init = [&](std::size_t r, std::size_t c) {
            return parameter(Tensor::uniform(r, c, -bound, bound, rng));
        };

        for (std::size_t j = 0; j < L; ++j) {
            std::size_t in_j = (j == 0) ? emb_dim_ : h;
            w_.push_back(init(in_j, 4 * h));
            Tensor bias(1, 4 * h);
            for (std::size_t c = h; c < 2 * h; ++c) bias.data[c] = 1.0;
            b_.push_back(parameter(std::move(bias)));
        }
        if (cfg.cell == EncoderConfig::Cell::Lstm) {
            for (std::size_t j = 0; j < L; ++j)
                u_self_.push_back(init(h, 4 * h));
        } else {
            u_.assign(L, {});
            wg_.assign(L, {});
            ug_.assign(L, {});
            for (std::size_t i = 0; i < L; ++i) {
                for (std::size_t j = 0; j < L; ++j) {
                    std::size_t in_j = (j == 0) ? emb_dim_ : h;
                    u_[i].push_back(init(h, 4 * h));
                    wg_[i].push_back(init(in_j, 1));
                    ug_[i].push_back(init(L * h, 1));
                }
            }
        }
        if (cfg.batch_norm) {
            bn_gamma_ = parameter(Tensor(1, h, 1.0));
            bn_beta_ = parameter(Tensor(1, h));
        }
    }

    const EncoderConfig& config() const { return cfg_; }
    std::size_t emb_dim() const { return emb_dim_; }
    BatchNormState& bn_state() { return bn_state_; }

    std::size_t feedback_gate_count() const {
        return cfg_.cell == EncoderConfig::Cell::GfRnn
                   ? static_cast<std::size_t>(cfg_.layers) * cfg_.layers
                   : 0;
    }

    std::vector<NodePtr> parameters() const {
        std::vector<NodePtr> out;
        for (auto& [name, node] : named_parameters()) out.push_back(node);
        return out;
    }

    std::vector<std::pair<std::string, NodePtr>> named_parameters() const {
        std::vector<std::pair<std::string, NodePtr>> out;
        auto tag = [](const std::string& base, std::size_t i) {
            return base + std::to_string(i);
        };
        for (std::size_t j = 0; j < w_.size(); ++j) {
            out.emplace_back(tag("enc.W", j), w_[j]);
            out.emplace_back(tag("enc.b", j), b_[j]);
        }
        for (std::size_t j = 0; j < u_self_.size(); ++j)
            out.emplace_back(tag("enc.U", j), u_self_[j]);
        for (std::size_t i = 0; i < u_.size(); ++i)
            for (std::size_t j = 0; j < u_[i].size(); ++j) {
                std::string suffix =
                    std::to_string(i) + "_" + std::to_string(j);
                out.emplace_back("enc.U" + suffix, u_[i][j]);
                out.emplace_back("enc.wg" + suffix, wg_[i][j]);
                out.emplace_back("enc.ug" + suffix, ug_[i][j]);
            }
        if (bn_gamma_) {
            out.emplace_back("enc.bn_gamma", bn_gamma_);
            out.emplace_back("enc.bn_beta", bn_beta_);
        }
        return out;
    }

    // Mean-pooled top-layer features for a batch, original order.
    NodePtr encode(const NodePtr& embeddings,
                   const std::vector<const TokenSequence*>& batch,
                   bool train, Rng& rng) {
        if (batch.empty()) throw DataError("empty batch");
        for (const auto* s : batch)
            if (s->tokens.empty())
                throw DataError("empty sequence in batch");

        // bucket by length, keeping original positions
        std::map<std::size_t, std::vector<std::size_t>> buckets;
        for (std::size_t i = 0; i < batch.size(); ++i)
            buckets[batch[i]->tokens.size()].push_back(i);

        std::vector<NodePtr> pooled_parts;
        std::vector<std::size_t> order;
        for (auto& [len, idxs] : buckets) {
            pooled_parts.push_back(
                encode_bucket(embeddings, batch, idxs, len, train, rng));
            order.insert(order.end(), idxs.begin(), idxs.end());
        }
        NodePtr merged = pooled_parts.size() == 1
                             ? pooled_parts[0]
                             : concat_rows(pooled_parts);
        // merged.row(r) holds batch item order[r]; invert to original
        std::vector<std::size_t> inverse(order.size());
        for (std::size_t r = 0; r < order.size(); ++r)
            inverse[order[r]] = r;
        NodePtr features = permute_rows(merged, std::move(inverse));
        if (cfg_.batch_norm)
            features =
                batch_norm(features, bn_gamma_, bn_beta_, bn_state_, train);
        return features;
    }

private:
    NodePtr encode_bucket(const NodePtr& embeddings,
                          const std::vector<const TokenSequence*>& batch,
                          const std::vector<std::size_t>& idxs,
                          std::size_t len, bool train, Rng& rng) {
        std::size_t h = static_cast<std::size_t>(cfg_.hidden);
        std::size_t L = static_cast<std::size_t>(cfg_.layers);
        std::size_t bsz = idxs.size();

        std::vector<NodePtr> hs(L), cs(L);
        for (std::size_t j = 0; j < L; ++j) {
            hs[j] = constant(Tensor(bsz, h));
            cs[j] = constant(Tensor(bsz, h));
        }

        NodePtr pooled_sum;
        for (std::size_t t = 0; t < len; ++t) {
            std::vector<std::size_t> ids(bsz);
            for (std::size_t r = 0; r < bsz; ++r)
                ids[r] = batch[idxs[r]]->tokens[t];
            NodePtr x_t = embed_rows(embeddings, std::move(ids));

            NodePtr hstar;
            if (cfg_.cell == EncoderConfig::Cell::GfRnn)
                hstar = L == 1 ? hs[0] : concat_cols(hs);

            std::vector<NodePtr> new_h(L), new_c(L);
            NodePtr layer_in = x_t;   // residual accumulator (pre-dropout)
            for (std::size_t j = 0; j < L; ++j) {
                if (j > 0) {
                    NodePtr prev_out = new_h[j - 1];
                    if (cfg_.residual &&
                        layer_in->value.cols() == prev_out->value.cols())
                        layer_in = add(prev_out, layer_in);
                    else
                        layer_in = prev_out;
                }
                NodePtr x_j = j > 0 ? dropout(layer_in, cfg_.dropout, train,
                                              rng)
                                    : layer_in;

                NodePtr pre = add_row_bias(matmul(x_j, w_[j]), b_[j]);
                if (cfg_.cell == EncoderConfig::Cell::Lstm) {
                    pre = add(pre, matmul(hs[j], u_self_[j]));
                } else {
                    for (std::size_t i = 0; i < L; ++i) {
                        NodePtr gate = sigmoid(add(matmul(x_j, wg_[i][j]),
                                                   matmul(hstar, ug_[i][j])));
                        pre = add(pre, mul_col_broadcast(
                                           matmul(hs[i], u_[i][j]), gate));
                    }
                }
                NodePtr in_g = sigmoid(slice_cols(pre, 0, h));
                NodePtr forget_g = sigmoid(slice_cols(pre, h, 2 * h));
                NodePtr out_g = sigmoid(slice_cols(pre, 2 * h, 3 * h));
                NodePtr cand = tanh_op(slice_cols(pre, 3 * h, 4 * h));
                new_c[j] = add(mul(forget_g, cs[j]), mul(in_g, cand));
                new_h[j] = mul(out_g, tanh_op(new_c[j]));
            }
            hs = std::move(new_h);
            cs = std::move(new_c);
            pooled_sum = pooled_sum ? add(pooled_sum, hs[L - 1]) : hs[L - 1];
        }
        return scale(pooled_sum, 1.0 / static_cast<double>(len));
    }

    EncoderConfig cfg_;
    std::size_t emb_dim_ = 0;
    std::vector<NodePtr> w_, b_;
    std::vector<NodePtr> u_self_;                 // lstm
    std::vector<std::vector<NodePtr>> u_;         // gfrnn, [src][dst]
    std::vector<std::vector<NodePtr>> wg_, ug_;   // gfrnn gates
    NodePtr bn_gamma_, bn_beta_;
    BatchNormState bn_state_;
};

}  // namespace ornn
