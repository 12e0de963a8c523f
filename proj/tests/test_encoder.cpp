#include <gtest/gtest.h>

#include "ornn/encoder.hpp"
#include "test_util.hpp"

using namespace ornn;

namespace {

TokenSequence seq(std::vector<std::uint32_t> ids) {
    TokenSequence s;
    s.tokens = std::move(ids);
    return s;
}

std::vector<const TokenSequence*> ptrs(const std::vector<TokenSequence>& v) {
    std::vector<const TokenSequence*> out;
    for (const auto& s : v) out.push_back(&s);
    return out;
}

NodePtr find_param(const Encoder& enc, const std::string& name) {
    for (auto& [n, p] : enc.named_parameters())
        if (n == name) return p;
    return nullptr;
}

// Plain-loop single-layer LSTM, mean-pooled: the reference the encoder
// must reproduce when every extra mechanism is disabled.
std::vector<double> reference_lstm_pool(const Tensor& emb, const Tensor& W,
                                        const Tensor& b, const Tensor& U,
                                        const std::vector<std::uint32_t>& ids,
                                        std::size_t h) {
    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    std::vector<double> hs(h, 0.0), cs(h, 0.0), pool(h, 0.0);
    std::size_t d = emb.cols();
    for (std::uint32_t id : ids) {
        std::vector<double> pre(4 * h, 0.0);
        for (std::size_t c = 0; c < 4 * h; ++c) {
            double s = b.data[c];
            for (std::size_t k = 0; k < d; ++k)
                s += emb.at(id, k) * W.at(k, c);
            for (std::size_t k = 0; k < h; ++k) s += hs[k] * U.at(k, c);
            pre[c] = s;
        }
        for (std::size_t k = 0; k < h; ++k) {
            double ig = sig(pre[k]);
            double fg = sig(pre[h + k]);
            double og = sig(pre[2 * h + k]);
            double cand = std::tanh(pre[3 * h + k]);
            cs[k] = fg * cs[k] + ig * cand;
            hs[k] = og * std::tanh(cs[k]);
        }
        for (std::size_t k = 0; k < h; ++k) pool[k] += hs[k];
    }
    for (auto& v : pool) v /= static_cast<double>(ids.size());
    return pool;
}

}  // namespace

TEST(Encoder, OutputShapeAndSingleStepPooling) {
    Rng rng(1);
    EncoderConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 6;
    cfg.dropout = 0.0;
    cfg.batch_norm = false;
    Encoder enc(cfg, 4, rng);
    auto emb = constant(Tensor::uniform(10, 4, -1.0, 1.0, rng));

    std::vector<TokenSequence> batch = {seq({1, 2, 3}), seq({4}), seq({5, 6})};
    Rng drop_rng(0);
    auto out = enc.encode(emb, ptrs(batch), false, drop_rng);
    EXPECT_EQ(out->value.rows(), 3u);
    EXPECT_EQ(out->value.cols(), 6u);

    // a length-1 sequence pools to its single top hidden state: encoding
    // it alone or in a batch must agree
    std::vector<TokenSequence> solo = {seq({4})};
    auto out_solo = enc.encode(emb, ptrs(solo), false, drop_rng);
    for (std::size_t c = 0; c < 6; ++c)
        EXPECT_NEAR(out_solo->value.at(0, c), out->value.at(1, c), 1e-12);
}

TEST(Encoder, EvalModeIsDeterministicBitwise) {
    Rng rng(2);
    EncoderConfig cfg;
    cfg.layers = 3;
    cfg.hidden = 5;
    Encoder enc(cfg, 5, rng);
    auto emb = constant(Tensor::uniform(12, 5, -1.0, 1.0, rng));
    std::vector<TokenSequence> batch = {seq({1, 2, 3, 4}), seq({5, 6})};
    Rng r1(7), r2(8);
    auto a = enc.encode(emb, ptrs(batch), false, r1);
    auto b = enc.encode(emb, ptrs(batch), false, r2);
    EXPECT_EQ(a->value.data, b->value.data);
}

TEST(Encoder, BatchPermutationEquivariance) {
    Rng rng(3);
    EncoderConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 4;
    cfg.dropout = 0.0;
    Encoder enc(cfg, 4, rng);
    auto emb = constant(Tensor::uniform(9, 4, -1.0, 1.0, rng));

    std::vector<TokenSequence> batch = {seq({1, 2, 3}), seq({4, 5}),
                                        seq({6, 7, 8, 1}), seq({2})};
    std::vector<TokenSequence> permuted = {batch[2], batch[0], batch[3],
                                           batch[1]};
    Rng r(0);
    auto a = enc.encode(emb, ptrs(batch), true, r);
    auto b = enc.encode(emb, ptrs(permuted), true, r);
    std::vector<std::size_t> where = {1, 3, 0, 2};  // batch[i] -> permuted row
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t c = 0; c < 4; ++c)
            EXPECT_NEAR(a->value.at(i, c), b->value.at(where[i], c), 1e-12);
}

TEST(Encoder, SingleLayerLstmMatchesReference) {
    Rng rng(4);
    EncoderConfig cfg;
    cfg.cell = EncoderConfig::Cell::Lstm;
    cfg.layers = 1;
    cfg.hidden = 4;
    cfg.dropout = 0.0;
    cfg.residual = false;
    cfg.batch_norm = false;
    Encoder enc(cfg, 3, rng);
    Tensor emb_t = Tensor::uniform(8, 3, -1.0, 1.0, rng);
    auto emb = constant(emb_t);

    std::vector<TokenSequence> batch = {seq({1, 2, 3, 4, 5}), seq({6, 7})};
    Rng r(0);
    auto out = enc.encode(emb, ptrs(batch), false, r);

    const Tensor& W = find_param(enc, "enc.W0")->value;
    const Tensor& b = find_param(enc, "enc.b0")->value;
    const Tensor& U = find_param(enc, "enc.U0")->value;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        auto ref = reference_lstm_pool(emb_t, W, b, U, batch[i].tokens, 4);
        for (std::size_t c = 0; c < 4; ++c)
            EXPECT_NEAR(out->value.at(i, c), ref[c], 1e-12);
    }
}

TEST(Encoder, LstmZeroEverythingStaysZero) {
    Rng rng(5);
    EncoderConfig cfg;
    cfg.cell = EncoderConfig::Cell::Lstm;
    cfg.layers = 1;
    cfg.hidden = 3;
    cfg.dropout = 0.0;
    cfg.residual = false;
    cfg.batch_norm = false;
    Encoder enc(cfg, 2, rng);
    for (auto& [name, p] : enc.named_parameters()) p->value.fill(0.0);
    auto emb = constant(Tensor(4, 2));  // zero input vectors
    std::vector<TokenSequence> batch = {seq({0, 1, 2})};
    Rng r(0);
    auto out = enc.encode(emb, ptrs(batch), false, r);
    for (double v : out->value.data) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Encoder, GfRnnWithHalfOpenGatesEqualsLstm) {
    // zero gate params make every feedback gate sigmoid(0)=0.5, so a
    // GF-RNN with cross-layer U zeroed and self U doubled must match the
    // plain LSTM exactly.
    Rng rng(6);
    EncoderConfig base;
    base.layers = 2;
    base.hidden = 4;
    base.dropout = 0.0;
    base.residual = false;
    base.batch_norm = false;

    EncoderConfig lstm_cfg = base;
    lstm_cfg.cell = EncoderConfig::Cell::Lstm;
    Encoder lstm(lstm_cfg, 4, rng);

    EncoderConfig gf_cfg = base;
    gf_cfg.cell = EncoderConfig::Cell::GfRnn;
    Encoder gf(gf_cfg, 4, rng);
    EXPECT_EQ(gf.feedback_gate_count(), 4u);

    for (std::size_t j = 0; j < 2; ++j) {
        auto tag = std::to_string(j);
        find_param(gf, "enc.W" + tag)->value =
            find_param(lstm, "enc.W" + tag)->value;
        find_param(gf, "enc.b" + tag)->value =
            find_param(lstm, "enc.b" + tag)->value;
        for (std::size_t i = 0; i < 2; ++i) {
            auto suffix = std::to_string(i) + "_" + std::to_string(j);
            find_param(gf, "enc.wg" + suffix)->value.fill(0.0);
            find_param(gf, "enc.ug" + suffix)->value.fill(0.0);
            auto& u = find_param(gf, "enc.U" + suffix)->value;
            if (i == j) {
                u = find_param(lstm, "enc.U" + tag)->value;
                u.mat() *= 2.0;
            } else {
                u.fill(0.0);
            }
        }
    }

    Rng erng(9);
    auto emb = constant(Tensor::uniform(10, 4, -1.0, 1.0, erng));
    std::vector<TokenSequence> batch = {seq({1, 2, 3, 4}), seq({5, 6, 7})};
    Rng r(0);
    auto a = lstm.encode(emb, ptrs(batch), false, r);
    auto b = gf.encode(emb, ptrs(batch), false, r);
    for (std::size_t i = 0; i < a->value.data.size(); ++i)
        EXPECT_NEAR(a->value.data[i], b->value.data[i], 1e-12);
}

TEST(Encoder, ThreeLayerHasNineFeedbackGates) {
    Rng rng(7);
    EncoderConfig cfg;
    cfg.layers = 3;
    cfg.hidden = 3;
    Encoder enc(cfg, 3, rng);
    EXPECT_EQ(enc.feedback_gate_count(), 9u);
}

TEST(Encoder, GradientsMatchFiniteDifferences) {
    for (auto cell : {EncoderConfig::Cell::GfRnn, EncoderConfig::Cell::Lstm}) {
        Rng rng(8);
        EncoderConfig cfg;
        cfg.cell = cell;
        cfg.layers = 2;
        cfg.hidden = 3;
        cfg.dropout = 0.0;
        cfg.residual = true;
        cfg.batch_norm = true;
        Encoder enc(cfg, 3, rng);
        auto emb = parameter(Tensor::uniform(6, 3, -1.0, 1.0, rng));

        std::vector<TokenSequence> batch = {seq({1, 2, 3}), seq({4, 5}),
                                            seq({0, 3, 5})};
        auto build = [&]() {
            enc.bn_state() = BatchNormState{};  // no leakage across rebuilds
            Rng r(0);
            auto out = enc.encode(emb, ptrs(batch), true, r);
            return mean_all(mul(out, out));
        };
        auto params = enc.parameters();
        params.push_back(emb);
        double worst = testutil::check_gradients(params, build, 80, rng);
        EXPECT_LT(worst, 1e-4) << cell_name(cell);
    }
}

TEST(Encoder, StatesStayFiniteOver120Steps) {
    Rng rng(10);
    EncoderConfig cfg;
    cfg.layers = 3;
    cfg.hidden = 8;
    cfg.dropout = 0.0;
    Encoder enc(cfg, 8, rng);
    // embedding rows scaled to norm 10
    Tensor emb_t = Tensor::uniform(5, 8, -1.0, 1.0, rng);
    for (std::size_t r = 0; r < 5; ++r) {
        double n = emb_t.mat().row(r).norm();
        emb_t.mat().row(r) *= 10.0 / n;
    }
    auto emb = constant(emb_t);
    TokenSequence long_seq;
    for (int t = 0; t < 120; ++t) long_seq.tokens.push_back(rng() % 5);
    std::vector<TokenSequence> batch = {long_seq};
    Rng r(0);
    auto out = enc.encode(emb, ptrs(batch), false, r);
    EXPECT_TRUE(out->value.all_finite());
}

TEST(Encoder, RejectsEmptySequences) {
    Rng rng(11);
    EncoderConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 2;
    Encoder enc(cfg, 2, rng);
    auto emb = constant(Tensor(3, 2, 0.5));
    std::vector<TokenSequence> batch = {seq({})};
    Rng r(0);
    EXPECT_THROW(enc.encode(emb, ptrs(batch), false, r), DataError);
    std::vector<const TokenSequence*> none;
    EXPECT_THROW(enc.encode(emb, none, false, r), DataError);
}
