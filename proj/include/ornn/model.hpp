#pragma once

#include <limits>
#include <numeric>
#include <vector>

#include "ornn/config.hpp"
#include "ornn/embeddings.hpp"
#include "ornn/encoder.hpp"
#include "ornn/ordinal.hpp"

// The full ordinal regression network: embedding table -> recurrent
// encoder -> prediction head, trained jointly. Validation loss drives
// the learning-rate schedule (halve after `decay_patience` stale
// epochs) and early stopping (`early_stop` stale epochs); the best
// validation snapshot is restored afterward.

namespace ornn {

struct TrainReport {
    int epochs_run = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<double> train_loss;
    std::vector<double> val_loss;
};

class OrdinalModel {
public:
    OrdinalModel() = default;

    // Random embedding init (the "random embeddings" ablation) when no
    // pretrained matrix is given.
    OrdinalModel(const RunConfig& cfg, Vocabulary vocab,
                 const EmbeddingMatrix* pretrained = nullptr)
        : cfg_(cfg), vocab_(std::move(vocab)) {
        Rng rng(derive_seed(cfg_.seed, 101));
        std::size_t d = static_cast<std::size_t>(cfg_.emb_dim);
        Tensor emb(vocab_.size(), d);
        if (pretrained) {
            if (pretrained->dim() != d)
                throw UsageError("embedding dim mismatch: config " +
                                 std::to_string(d) + ", matrix " +
                                 std::to_string(pretrained->dim()));
            for (std::uint32_t i = 0; i < vocab_.size(); ++i) {
                auto id = pretrained->id(vocab_.token(i));
                if (!id)
                    throw DataError("vocabulary token missing from "
                                    "embeddings: " +
                                    vocab_.token(i));
                auto v = pretrained->vec(*id);
                for (std::size_t c = 0; c < d; ++c) emb.at(i, c) = v[c];
            }
        } else {
            for (auto& v : emb.data)
                v = uniform(rng, -0.5 / static_cast<double>(d),
                            0.5 / static_cast<double>(d));
        }
        bool tune = cfg_.fine_tune_scale != 0.0;
        embeddings_ = tune ? parameter(std::move(emb))
                           : constant(std::move(emb));

        EncoderConfig ec;
        ec.cell = cell_from_name(cfg_.cell);
        ec.layers = cfg_.layers;
        ec.hidden = cfg_.hidden;
        ec.dropout = cfg_.dropout;
        ec.residual = cfg_.residual;
        ec.batch_norm = cfg_.batch_norm;
        encoder_ = Encoder(ec, d, rng);
        head_ = Head(head_from_name(cfg_.head), ec.hidden, cfg_.k,
                     cfg_.lambda, rng);
    }

    const RunConfig& config() const { return cfg_; }
    const Vocabulary& vocab() const { return vocab_; }
    Encoder& encoder() { return encoder_; }
    Head& head() { return head_; }
    NodePtr embeddings() { return embeddings_; }
    const TrainReport& last_report() const { return report_; }

    std::vector<std::pair<std::string, NodePtr>> named_parameters() const {
        std::vector<std::pair<std::string, NodePtr>> out;
        out.emplace_back("embeddings", embeddings_);
        for (auto& p : encoder_.named_parameters()) out.push_back(p);
        for (auto& p : head_.named_parameters()) out.push_back(p);
        return out;
    }

    TrainReport fit(const std::vector<TokenSequence>& train,
                    const std::vector<TokenSequence>& val) {
        std::vector<const TokenSequence*> train_docs = usable(train);
        std::vector<const TokenSequence*> val_docs = usable(val);
        if (train_docs.empty()) throw DataError("no trainable documents");

        Rng rng(derive_seed(cfg_.seed, 202));
        double lr = cfg_.lr;
        report_ = TrainReport{};
        int stale = 0;
        Snapshot best = snapshot();

        std::vector<std::size_t> order(train_docs.size());
        std::iota(order.begin(), order.end(), 0);

        std::vector<NodePtr> main_params = encoder_.parameters();
        for (auto& p : head_.parameters()) main_params.push_back(p);
        std::vector<NodePtr> all_params = main_params;
        bool tune_emb = embeddings_->requires_grad;
        if (tune_emb) all_params.push_back(embeddings_);

        for (int epoch = 0; epoch < cfg_.max_epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            double epoch_loss = 0.0;
            std::size_t seen = 0;
            for (std::size_t start = 0; start < order.size();
                 start += cfg_.batch) {
                std::size_t stop = std::min(order.size(),
                                            start + cfg_.batch);
                std::vector<const TokenSequence*> batch;
                std::vector<int> labels;
                for (std::size_t i = start; i < stop; ++i) {
                    batch.push_back(train_docs[order[i]]);
                    labels.push_back(*train_docs[order[i]]->label);
                }
                NodePtr feats =
                    encoder_.encode(embeddings_, batch, true, rng);
                feats = dropout(feats, cfg_.dropout, true, rng);
                NodePtr loss = head_.build_loss(feats, labels);
                if (!loss->value.all_finite())
                    throw NumericError("training loss is not finite");
                epoch_loss += loss->value.data[0] * batch.size();
                seen += batch.size();

                backward(loss);
                clip_by_norm(all_params, cfg_.grad_clip);
                sgd_step(main_params, lr, cfg_.l2);
                if (tune_emb)
                    sgd_step({embeddings_}, lr * cfg_.fine_tune_scale, 0.0);
            }
            report_.train_loss.push_back(epoch_loss /
                                         static_cast<double>(seen));
            report_.epochs_run = epoch + 1;

            if (val_docs.empty()) continue;
            double vloss = mean_loss_ptrs(val_docs);
            report_.val_loss.push_back(vloss);
            if (vloss < report_.best_val_loss) {
                report_.best_val_loss = vloss;
                best = snapshot();
                stale = 0;
            } else {
                ++stale;
                if (stale % cfg_.decay_patience == 0) lr /= cfg_.lr_decay;
                if (stale >= cfg_.early_stop) break;
            }
        }
        if (!val_docs.empty()) restore(best);
        return report_;
    }

    std::vector<OrdinalPrediction> predict(
        const std::vector<TokenSequence>& docs) {
        std::vector<const TokenSequence*> ptrs;
        for (const auto& d : docs) ptrs.push_back(&d);
        return predict_ptrs(ptrs);
    }

    std::vector<OrdinalPrediction> predict_ptrs(
        const std::vector<const TokenSequence*>& docs) {
        std::vector<OrdinalPrediction> out;
        out.reserve(docs.size());
        Rng rng(0);  // unused in eval mode
        for (std::size_t start = 0; start < docs.size();
             start += cfg_.batch) {
            std::size_t stop =
                std::min(docs.size(), start + cfg_.batch);
            std::vector<const TokenSequence*> batch(
                docs.begin() + start, docs.begin() + stop);
            NodePtr feats = encoder_.encode(embeddings_, batch, false, rng);
            NodePtr lin = head_.linear(feats);
            for (std::size_t r = 0; r < batch.size(); ++r) {
                std::vector<double> row(lin->value.cols());
                for (std::size_t c = 0; c < row.size(); ++c)
                    row[c] = lin->value.at(r, c);
                out.push_back(head_.predict_row(row));
            }
        }
        return out;
    }

    double mean_loss(const std::vector<TokenSequence>& docs) {
        std::vector<const TokenSequence*> ptrs = usable(docs);
        if (ptrs.empty()) throw DataError("no usable documents");
        return mean_loss_ptrs(ptrs);
    }

    // checkpoint support
    struct Meta {
        int epochs_run = 0;
        double best_val_loss = 0.0;
        std::uint64_t seed = 0;
    };
    Meta meta() const {
        return {report_.epochs_run, report_.best_val_loss, cfg_.seed};
    }
    void set_report(int epochs, double best_val) {
        report_.epochs_run = epochs;
        report_.best_val_loss = best_val;
    }

private:
    struct Snapshot {
        std::vector<Tensor> params;
        BatchNormState bn;
    };

    Snapshot snapshot() const {
        Snapshot s;
        for (auto& [name, p] : named_parameters()) s.params.push_back(p->value);
        s.bn = const_cast<Encoder&>(encoder_).bn_state();
        return s;
    }

    void restore(const Snapshot& s) {
        std::size_t i = 0;
        for (auto& [name, p] : named_parameters()) p->value = s.params[i++];
        encoder_.bn_state() = s.bn;
    }

    static std::vector<const TokenSequence*> usable(
        const std::vector<TokenSequence>& docs) {
        std::vector<const TokenSequence*> out;
        for (const auto& d : docs)
            if (d.label && !d.tokens.empty()) out.push_back(&d);
        return out;
    }

    double mean_loss_ptrs(const std::vector<const TokenSequence*>& docs) {
        Rng rng(0);
        double total = 0.0;
        for (std::size_t start = 0; start < docs.size();
             start += cfg_.batch) {
            std::size_t stop = std::min(docs.size(), start + cfg_.batch);
            std::vector<const TokenSequence*> batch(
                docs.begin() + start, docs.begin() + stop);
            std::vector<int> labels;
            for (auto* d : batch) labels.push_back(*d->label);
            NodePtr feats = encoder_.encode(embeddings_, batch, false, rng);
            NodePtr loss = head_.build_loss(feats, labels);
            total += loss->value.data[0] * batch.size();
        }
        return total / static_cast<double>(docs.size());
    }

    RunConfig cfg_;
    Vocabulary vocab_;
    NodePtr embeddings_;
    Encoder encoder_;
    Head head_;
    TrainReport report_;
};

}  // namespace ornn
