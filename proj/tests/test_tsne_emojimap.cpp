#include <gtest/gtest.h>

#include <fstream>

#include "ornn/emojimap.hpp"
#include "ornn/synthetic.hpp"
#include "test_util.hpp"

using namespace ornn;

namespace {

Tensor random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    return Tensor::uniform(n, d, -1.0, 1.0, rng);
}

}  // namespace

TEST(Tsne, PMatrixCalibratedSymmetricStochastic) {
    Tensor x = random_points(30, 5, 1);
    double perplexity = 8.0;
    Tensor p = tsne_p_matrix(x, perplexity);

    double sum = 0.0;
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t j = 0; j < 30; ++j) {
            EXPECT_GE(p.at(i, j), 0.0);
            EXPECT_NEAR(p.at(i, j), p.at(j, i), 1e-15);
            sum += p.at(i, j);
        }
    EXPECT_NEAR(sum, 1.0, 1e-9);

    // re-derive each conditional row's perplexity from P: rebuild row
    // conditionals by solving the same search and verify the target
    Tensor dist = pairwise_sq_dists(x);
    for (std::size_t i = 0; i < 30; ++i) {
        // recover p_{j|i} up to normalization is the search's own
        // guarantee; assert via an independent entropy computation on a
        // re-run of the bisection
        double beta_lo = 0.0, beta_hi = 1e18, beta = 1.0, perp = 0.0;
        for (int it = 0; it < 400; ++it) {
            double z = 0.0;
            std::vector<double> row(30, 0.0);
            for (std::size_t j = 0; j < 30; ++j) {
                if (j == i) continue;
                row[j] = std::exp(-beta * dist.at(i, j));
                z += row[j];
            }
            double h = 0.0;
            for (std::size_t j = 0; j < 30; ++j) {
                if (row[j] <= 0.0) continue;
                double q = row[j] / z;
                h -= q * std::log2(q);
            }
            perp = std::pow(2.0, h);
            if (std::fabs(perp - perplexity) < 1e-6) break;
            if (perp > perplexity)
                beta_lo = beta, beta = std::min(beta * 2.0,
                                                0.5 * (beta + beta_hi));
            else
                beta_hi = beta, beta = 0.5 * (beta + beta_lo);
        }
        EXPECT_NEAR(perp, perplexity, 1e-4);
    }
}

TEST(Tsne, RejectsBadInputs) {
    EXPECT_THROW(tsne_p_matrix(random_points(3, 4, 2), 1.0), DataError);
    EXPECT_THROW(tsne_p_matrix(random_points(20, 4, 2), 7.0), DataError);
    EXPECT_THROW(tsne_p_matrix(random_points(20, 4, 2), 0.5), DataError);
}

TEST(Tsne, GradientMatchesFiniteDifferences) {
    Tensor x = random_points(8, 4, 3);
    Tensor p = tsne_p_matrix(x, 2.0);
    Rng rng(4);
    Tensor y = Tensor::uniform(8, 2, -1.0, 1.0, rng);

    Tensor grad = tsne_gradient(p, y);
    auto loss = [&]() { return tsne_kl(p, y); };
    for (std::size_t i = 0; i < y.numel(); ++i) {
        double fd = testutil::central_diff(y, i, loss);
        EXPECT_LT(testutil::rel_err(grad.data[i], fd), 1e-4) << "coord " << i;
    }
}

TEST(Tsne, KlDecreasesOverOptimization) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Tensor x = random_points(40, 6, 100 + seed);
        TsneConfig cfg;
        cfg.perplexity = 10.0;
        cfg.seed = seed;
        auto res = tsne(x, cfg);
        EXPECT_LT(res.kl_final, res.kl_initial) << "seed " << seed;
        EXPECT_TRUE(res.coords.all_finite());
    }
}

TEST(Tsne, DuplicatePointsLandTogether) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Tensor x = random_points(10, 4, 200 + seed);
        for (std::size_t c = 0; c < 4; ++c) x.at(1, c) = x.at(0, c);

        TsneConfig cfg;
        cfg.perplexity = 2.0;
        cfg.learning_rate = 10.0;  // the default 200 overshoots at n=10
        cfg.seed = seed;
        auto res = tsne(x, cfg);

        auto d2 = [&](std::size_t a, std::size_t b) {
            double dx = res.coords.at(a, 0) - res.coords.at(b, 0);
            double dy = res.coords.at(a, 1) - res.coords.at(b, 1);
            return dx * dx + dy * dy;
        };
        double twin = d2(0, 1);
        for (std::size_t j = 2; j < 10; ++j) {
            EXPECT_LT(twin, d2(0, j)) << "seed " << seed;
            EXPECT_LT(twin, d2(1, j)) << "seed " << seed;
        }
    }
}

TEST(Tsne, RotationInvariantAffinitiesOnNormalizedInputs) {
    // L2-normalize rows, then rotate: pairwise Euclidean distances are
    // unchanged, so P and (same seed) the entire layout are identical.
    Tensor x = random_points(12, 2, 7);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double n = x.mat().row(i).norm();
        x.mat().row(i) /= n;
    }
    double a = 0.73;  // rotation angle
    Tensor xr = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        xr.at(i, 0) = std::cos(a) * x.at(i, 0) - std::sin(a) * x.at(i, 1);
        xr.at(i, 1) = std::sin(a) * x.at(i, 0) + std::cos(a) * x.at(i, 1);
    }
    Tensor p1 = tsne_p_matrix(x, 3.0);
    Tensor p2 = tsne_p_matrix(xr, 3.0);
    for (std::size_t i = 0; i < p1.numel(); ++i)
        EXPECT_NEAR(p1.data[i], p2.data[i], 1e-9);
}

TEST(EmojiSubset, SortsByFrequencyAndErrorsWithoutEmojis) {
    Vocabulary v = Vocabulary::from_counts(
        {{"\xF0\x9F\x8D\x92", 10},   // cherries
         {"\xE2\x9C\xA8", 25},       // sparkles
         {"\xF0\x9F\x8D\xAD", 3},    // lollipop
         {"plain", 100}},
        1);
    auto top = emoji_subset(v, 10);
    ASSERT_EQ(top.size(), 3u);
    EXPECT_EQ(top[0].first, "\xE2\x9C\xA8");
    for (std::size_t i = 0; i + 1 < top.size(); ++i)
        EXPECT_GE(top[i].second, top[i + 1].second);

    auto top1 = emoji_subset(v, 1);
    EXPECT_EQ(top1.size(), 1u);

    Vocabulary no_emoji = Vocabulary::from_counts({{"a", 5}, {"b", 2}}, 1);
    EXPECT_THROW(emoji_subset(no_emoji, 5), DataError);
}

TEST(EmojiMap, CsvRoundTripAndSvgWellFormed) {
    EmojiMap map = {
        {"\xF0\x9F\x8D\x92", -1.25, 3.5, 42},
        {"\xE2\x9C\xA8", 0.125, -2.75, 17},
        {"\xF0\x9F\x8D\xAD", 5.0, 0.0, 3},
    };
    auto dir = std::string(::testing::TempDir());
    emit_map_csv(map, dir + "map.csv");
    auto back = load_map_csv(dir + "map.csv");
    ASSERT_EQ(back.size(), map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
        EXPECT_EQ(back[i].token, map[i].token);
        EXPECT_NEAR(back[i].x, map[i].x, 1e-6);
        EXPECT_NEAR(back[i].y, map[i].y, 1e-6);
        EXPECT_EQ(back[i].frequency, map[i].frequency);
    }

    emit_map_svg(map, dir + "map.svg");
    std::ifstream in(dir + "map.svg");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string svg = ss.str();
    EXPECT_NE(svg.find("<?xml"), std::string::npos);
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    // one text element per emoji, all closed
    std::size_t opens = 0, closes = 0, pos = 0;
    while ((pos = svg.find("<text", pos)) != std::string::npos) {
        ++opens;
        pos += 5;
    }
    pos = 0;
    while ((pos = svg.find("</text>", pos)) != std::string::npos) {
        ++closes;
        pos += 7;
    }
    EXPECT_EQ(opens, map.size());
    EXPECT_EQ(closes, map.size());

    EXPECT_THROW(emit_map_csv({}, dir + "empty.csv"), DataError);
    EXPECT_THROW(emit_map_svg({}, dir + "empty.svg"), DataError);
}

TEST(ExpandLexicon, TwoCliqueNeighborsStayInClique) {
    auto texts = two_clique_texts(600, 8, 5, 11);
    Vocabulary vocab = Vocabulary::build(texts, 1);
    std::vector<TokenSequence> corpus;
    for (const auto& t : texts) corpus.push_back(tokenize(t, vocab));
    SgnsConfig cfg;
    cfg.dim = 16;
    cfg.negatives = 5;
    cfg.epochs = 10;
    cfg.seed = 5;
    auto emb = train_sgns(corpus, vocab, cfg);

    auto result = expand_lexicon(emb, {"a0"}, 3);
    ASSERT_EQ(result.size(), 3u);
    for (const auto& e : result) {
        EXPECT_EQ(e.token[0], 'a') << e.token;
        EXPECT_NE(e.token, "a0");
        EXPECT_FALSE(e.is_emoji);
    }
    for (std::size_t i = 0; i + 1 < result.size(); ++i)
        EXPECT_GE(result[i].similarity, result[i + 1].similarity);
}

TEST(ExpandLexicon, EmptySeedsAndOovHandling) {
    auto texts = two_clique_texts(100, 6, 4, 3);
    Vocabulary vocab = Vocabulary::build(texts, 1);
    std::vector<TokenSequence> corpus;
    for (const auto& t : texts) corpus.push_back(tokenize(t, vocab));
    SgnsConfig cfg;
    cfg.dim = 8;
    cfg.negatives = 3;
    cfg.epochs = 3;
    auto emb = train_sgns(corpus, vocab, cfg);

    EXPECT_TRUE(expand_lexicon(emb, {}, 3).empty());

    std::vector<std::string> warnings;
    auto res = expand_lexicon(emb, {"a0", "nope"}, 2, &warnings);
    EXPECT_FALSE(res.empty());
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_EQ(warnings[0], "nope");

    EXPECT_THROW(expand_lexicon(emb, {"zzz", "qqq"}, 2), DataError);
}

TEST(ExpandLexicon, SeedFileParsing) {
    auto dir = std::string(::testing::TempDir());
    {
        std::ofstream out(dir + "seeds.txt");
        out << "# trafficking flags\n\xF0\x9F\x8D\x92\n  a0  # inline\n\n";
    }
    auto seeds = load_seed_lexicon(dir + "seeds.txt");
    ASSERT_EQ(seeds.size(), 2u);
    EXPECT_EQ(seeds[0], "\xF0\x9F\x8D\x92");
    EXPECT_EQ(seeds[1], "a0");
}
