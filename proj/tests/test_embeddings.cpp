#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "ornn/embeddings.hpp"
#include "test_util.hpp"

using namespace ornn;

namespace {

// Two disjoint cliques: tokens co-occur only within their clique.
struct CliqueCorpus {
    std::vector<TokenSequence> sentences;
    Vocabulary vocab;
    std::vector<std::string> clique_a, clique_b;
};

CliqueCorpus make_clique_corpus(std::size_t n_sentences, std::size_t sent_len,
                                std::uint64_t seed) {
    std::vector<std::string> a = {"a0", "a1", "a2", "a3", "a4"};
    std::vector<std::string> b = {"b0", "b1", "b2", "b3", "b4"};
    Rng rng(seed);
    std::vector<std::string> texts;
    for (std::size_t s = 0; s < n_sentences; ++s) {
        const auto& pool = (s % 2 == 0) ? a : b;
        std::string text;
        for (std::size_t t = 0; t < sent_len; ++t) {
            text += pool[rng() % pool.size()];
            text += ' ';
        }
        texts.push_back(text);
    }
    CliqueCorpus c{{}, Vocabulary::build(texts, 1), a, b};
    for (const auto& t : texts) c.sentences.push_back(tokenize(t, c.vocab));
    return c;
}

double mean_pair_cosine(const EmbeddingMatrix& emb,
                        const std::vector<std::string>& xs,
                        const std::vector<std::string>& ys) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& x : xs)
        for (const auto& y : ys) {
            if (x == y) continue;
            s += EmbeddingMatrix::cosine_span(emb.lookup(x), emb.lookup(y));
            ++n;
        }
    return s / static_cast<double>(n);
}

}  // namespace

TEST(Sgns, PairLossAtZeroParamsIs101Ln2) {
    std::vector<double> zeros(8, 0.0);
    std::vector<std::span<const double>> negs(
        100, std::span<const double>(zeros));
    double loss = sgns::pair_loss(zeros, zeros, negs);
    EXPECT_NEAR(loss, 101.0 * std::log(2.0), 1e-10);
}

TEST(Sgns, PairGradientsMatchFiniteDifferences) {
    Rng rng(5);
    std::size_t d = 6;
    Tensor v = Tensor::uniform(1, d, -2.0, 2.0, rng);
    Tensor uc = Tensor::uniform(1, d, -2.0, 2.0, rng);
    Tensor n0 = Tensor::uniform(1, d, -2.0, 2.0, rng);
    Tensor n1 = Tensor::uniform(1, d, -2.0, 2.0, rng);

    auto loss = [&]() {
        std::vector<std::span<const double>> negs{
            std::span<const double>(n0.data),
            std::span<const double>(n1.data)};
        return sgns::pair_loss(std::span<const double>(v.data),
                               std::span<const double>(uc.data), negs);
    };

    std::vector<double> gv(d, 0.0), gc(d, 0.0), g0(d, 0.0), g1(d, 0.0);
    {
        std::vector<std::span<const double>> negs{
            std::span<const double>(n0.data),
            std::span<const double>(n1.data)};
        std::vector<std::span<double>> gnegs{std::span<double>(g0),
                                             std::span<double>(g1)};
        sgns::pair_backward(std::span<const double>(v.data),
                            std::span<const double>(uc.data), negs,
                            std::span<double>(gv), std::span<double>(gc),
                            gnegs);
    }

    std::vector<std::pair<Tensor*, std::vector<double>*>> checks = {
        {&v, &gv}, {&uc, &gc}, {&n0, &g0}, {&n1, &g1}};
    for (auto& [param, grad] : checks) {
        for (std::size_t i = 0; i < d; ++i) {
            double fd = testutil::central_diff(*param, i, loss);
            EXPECT_LT(testutil::rel_err((*grad)[i], fd), 1e-4);
        }
    }
}

TEST(Sgns, NoiseSamplingMatchesPowerLawWithin3Sigma) {
    Vocabulary v = Vocabulary::from_counts(
        {{"a", 100}, {"b", 50}, {"c", 10}, {"d", 3}, {"e", 1}}, 1);
    const std::size_t draws = 1000000;
    Rng rng(123);
    std::vector<std::size_t> hits(v.size(), 0);
    for (std::size_t i = 0; i < draws; ++i) ++hits[v.sample_noise(rng)];
    for (std::size_t i = 0; i < v.size(); ++i) {
        double p = v.noise_distribution()[i];
        double sigma = std::sqrt(p * (1.0 - p) * draws);
        EXPECT_NEAR(static_cast<double>(hits[i]), p * draws, 3.0 * sigma)
            << v.token(static_cast<std::uint32_t>(i));
    }
}

TEST(Sgns, WindowPairEnumeration) {
    // window=5, 3-token sentence: every ordered pair (6 total), no self
    // pairs. Verified against brute-force enumeration.
    std::vector<std::string> texts = {"x y z"};
    Vocabulary v = Vocabulary::build(texts, 1);
    std::vector<TokenSequence> corpus{tokenize(texts[0], v)};

    std::size_t brute = 0;
    int len = 3, window = 5;
    for (int c = 0; c < len; ++c)
        for (int p = std::max(0, c - window);
             p <= std::min(len - 1, c + window); ++p)
            if (p != c) ++brute;
    EXPECT_EQ(brute, 6u);

    SgnsConfig cfg;
    cfg.window = window;
    cfg.negatives = 2;
    cfg.epochs = 1;
    cfg.dim = 4;
    SgnsReport report;
    train_sgns(corpus, v, cfg, &report);
    EXPECT_EQ(report.pairs_per_epoch, brute);
}

TEST(Sgns, CliqueCorpusSeparates) {
    auto c = make_clique_corpus(400, 8, 11);
    SgnsConfig cfg;
    cfg.dim = 16;
    cfg.negatives = 5;
    cfg.epochs = 12;
    cfg.seed = 3;
    auto emb = train_sgns(c.sentences, c.vocab, cfg);

    double intra = 0.5 * (mean_pair_cosine(emb, c.clique_a, c.clique_a) +
                          mean_pair_cosine(emb, c.clique_b, c.clique_b));
    double inter = mean_pair_cosine(emb, c.clique_a, c.clique_b);
    EXPECT_GT(intra, inter);

    // nearest neighbor of a clique-A token stays in clique A
    auto nn = emb.nearest("a0", 1);
    ASSERT_EQ(nn.size(), 1u);
    EXPECT_EQ(nn[0].first[0], 'a');
}

TEST(Sgns, TrainingLossDecreases) {
    auto c = make_clique_corpus(200, 8, 17);
    SgnsConfig cfg;
    cfg.dim = 8;
    cfg.negatives = 3;
    cfg.epochs = 8;
    SgnsReport report;
    train_sgns(c.sentences, c.vocab, cfg, &report);
    ASSERT_EQ(report.epoch_loss.size(), 8u);
    EXPECT_LT(report.epoch_loss.back(), report.epoch_loss.front());
}

TEST(Sgns, ReproducibleWithFixedSeed) {
    auto c = make_clique_corpus(50, 6, 7);
    SgnsConfig cfg;
    cfg.dim = 8;
    cfg.negatives = 4;
    cfg.epochs = 3;
    cfg.seed = 99;
    auto e1 = train_sgns(c.sentences, c.vocab, cfg);
    auto e2 = train_sgns(c.sentences, c.vocab, cfg);
    EXPECT_EQ(e1.raw(), e2.raw());  // bitwise
}

TEST(Sgns, EmptyCorpusRejected) {
    std::vector<std::string> texts = {"a a"};
    Vocabulary v = Vocabulary::build(texts, 1);
    std::vector<TokenSequence> empty;
    SgnsConfig cfg;
    EXPECT_THROW(train_sgns(empty, v, cfg), DataError);
}

TEST(Embeddings, NearestExcludesQueryAndCosineSelfIsOne) {
    auto c = make_clique_corpus(100, 6, 23);
    SgnsConfig cfg;
    cfg.dim = 8;
    cfg.negatives = 3;
    cfg.epochs = 4;
    auto emb = train_sgns(c.sentences, c.vocab, cfg);
    for (std::size_t m : {1, 3, 5}) {
        auto nn = emb.nearest("a1", m);
        EXPECT_EQ(nn.size(), m);
        for (auto& [tok, cos] : nn) EXPECT_NE(tok, "a1");
    }
    auto v = emb.lookup("a1");
    EXPECT_NEAR(EmbeddingMatrix::cosine_span(v, v), 1.0, 1e-12);
    EXPECT_THROW(emb.lookup("not-a-token"), DataError);
}

TEST(Embeddings, SaveLoadRoundTrip) {
    auto c = make_clique_corpus(50, 6, 31);
    SgnsConfig cfg;
    cfg.dim = 8;
    cfg.negatives = 3;
    cfg.epochs = 2;
    auto emb = train_sgns(c.sentences, c.vocab, cfg);

    std::string path = std::string(::testing::TempDir()) + "emb.txt";
    save_embeddings(path, emb);
    auto loaded = load_embeddings(path);
    ASSERT_EQ(loaded.size(), emb.size());
    ASSERT_EQ(loaded.dim(), emb.dim());
    double max_diff = 0.0;
    for (std::size_t i = 0; i < emb.raw().size(); ++i)
        max_diff = std::max(max_diff,
                            std::fabs(emb.raw()[i] - loaded.raw()[i]));
    EXPECT_LE(max_diff, 1e-6);
}

TEST(Embeddings, LoadRejectsMalformedFiles) {
    auto dir = std::string(::testing::TempDir());
    {
        std::ofstream out(dir + "short.txt");
        out << "2 3\nfoo 1.0 2.0 3.0\nbar 1.0 2.0\n";
    }
    try {
        load_embeddings(dir + "short.txt");
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
    {
        std::ofstream out(dir + "empty.txt");
    }
    EXPECT_THROW(load_embeddings(dir + "empty.txt"), DataError);
}
