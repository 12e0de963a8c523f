#include <gtest/gtest.h>

#include "ornn/autodiff.hpp"
#include "test_util.hpp"

using namespace ornn;

TEST(Autodiff, SigmoidAtZero) {
    auto x = constant(Tensor::scalar(0.0));
    EXPECT_DOUBLE_EQ(sigmoid(x)->value.data[0], 0.5);
}

TEST(Autodiff, ProductRule) {
    auto x = parameter(Tensor::scalar(2.0));
    auto y = parameter(Tensor::scalar(3.0));
    auto f = mul(x, y);
    backward(f);
    EXPECT_DOUBLE_EQ(x->grad.data[0], 3.0);
    EXPECT_DOUBLE_EQ(y->grad.data[0], 2.0);
}

TEST(Autodiff, SigmoidGradientAtZero) {
    auto x = parameter(Tensor::scalar(0.0));
    auto f = sigmoid(x);
    backward(f);
    EXPECT_DOUBLE_EQ(x->grad.data[0], 0.25);
}

TEST(Autodiff, SharedSubexpressionAccumulates) {
    // f = x*x + x*x built with a shared node must match 2*x^2.
    auto x = parameter(Tensor::scalar(1.5));
    auto sq = mul(x, x);
    auto f = add(sq, sq);
    backward(f);
    EXPECT_DOUBLE_EQ(f->value.data[0], 4.5);
    EXPECT_DOUBLE_EQ(x->grad.data[0], 4.0 * 1.5);

    // expanded tree equivalent
    auto x2 = parameter(Tensor::scalar(1.5));
    auto f2 = add(mul(x2, x2), mul(x2, x2));
    backward(f2);
    EXPECT_DOUBLE_EQ(x2->grad.data[0], x->grad.data[0]);
}

TEST(Autodiff, BackwardRequiresScalarRoot) {
    auto x = parameter(Tensor(2, 2, 1.0));
    EXPECT_THROW(backward(x), NumericError);
}

TEST(Autodiff, MatmulShapeMismatch) {
    auto a = constant(Tensor(2, 3, 1.0));
    auto b = constant(Tensor(2, 3, 1.0));
    EXPECT_THROW(matmul(a, b), NumericError);
}

TEST(Autodiff, DropoutZeroProbabilityIsIdentity) {
    Rng rng(1);
    auto x = constant(Tensor(3, 4, 2.5));
    auto y = dropout(x, 0.0, true, rng);
    EXPECT_EQ(x.get(), y.get());
}

TEST(Autodiff, DropoutEvalModeIsIdentity) {
    Rng rng(1);
    auto x = constant(Tensor(3, 4, 2.5));
    auto y = dropout(x, 0.5, false, rng);
    EXPECT_EQ(x.get(), y.get());
}

TEST(Autodiff, DropoutScalesSurvivors) {
    Rng rng(7);
    auto x = constant(Tensor(1, 1000, 1.0));
    auto y = dropout(x, 0.25, true, rng);
    std::size_t kept = 0;
    for (double v : y->value.data) {
        if (v != 0.0) {
            EXPECT_DOUBLE_EQ(v, 1.0 / 0.75);
            ++kept;
        }
    }
    EXPECT_NEAR(static_cast<double>(kept) / 1000.0, 0.75, 0.05);
}

TEST(Autodiff, ClipByNormScalesLongGradients) {
    auto p = parameter(Tensor::scalar(0.0));
    p->grad = Tensor::scalar(1.0);
    clip_by_norm({p}, 0.25);
    EXPECT_DOUBLE_EQ(p->grad.data[0], 0.25);
}

TEST(Autodiff, ClipByNormLeavesShortGradientsAlone) {
    auto p = parameter(Tensor::row({0.1, 0.2}));
    p->grad = Tensor::row({0.1, 0.1});
    clip_by_norm({p}, 0.25);
    EXPECT_DOUBLE_EQ(p->grad.data[0], 0.1);
    EXPECT_DOUBLE_EQ(p->grad.data[1], 0.1);
}

TEST(Autodiff, ClipByNormPreservesDirection) {
    auto p = parameter(Tensor::row({0.0, 0.0, 0.0}));
    p->grad = Tensor::row({3.0, 4.0, 0.0});
    clip_by_norm({p}, 1.0);
    EXPECT_NEAR(p->grad.data[0], 0.6, 1e-12);
    EXPECT_NEAR(p->grad.data[1], 0.8, 1e-12);
    EXPECT_NEAR(l2_norm(p->grad.data), 1.0, 1e-12);
}

TEST(Autodiff, SgdStepBasics) {
    auto p = parameter(Tensor::scalar(1.0));
    sgd_step({p}, 0.1, 0.0);
    EXPECT_DOUBLE_EQ(p->value.data[0], 1.0);  // zero grad, no l2

    auto q = parameter(Tensor::scalar(0.0));
    q->grad = Tensor::scalar(1.0);
    sgd_step({q}, 0.1, 0.0);
    EXPECT_DOUBLE_EQ(q->value.data[0], -0.1);
    EXPECT_DOUBLE_EQ(q->grad.data[0], 0.0);  // zeroed afterward

    auto r = parameter(Tensor::scalar(1.0));
    sgd_step({r}, 1.0, 0.1);
    EXPECT_DOUBLE_EQ(r->value.data[0], 0.9);
}

// Random 3-layer MLP: every op used by the heads appears here and all
// parameter gradients must match central differences.
TEST(Autodiff, MlpGradientsMatchFiniteDifferences) {
    Rng rng(42);
    std::size_t b = 3, in = 4, h1 = 5, h2 = 4, out = 3;
    auto x = constant(Tensor::uniform(b, in, -2.0, 2.0, rng));
    auto w1 = parameter(Tensor::uniform(in, h1, -2.0, 2.0, rng));
    auto b1 = parameter(Tensor::uniform(1, h1, -2.0, 2.0, rng));
    auto w2 = parameter(Tensor::uniform(h1, h2, -2.0, 2.0, rng));
    auto b2 = parameter(Tensor::uniform(1, h2, -2.0, 2.0, rng));
    auto w3 = parameter(Tensor::uniform(h2, out, -2.0, 2.0, rng));
    auto b3 = parameter(Tensor::uniform(1, out, -2.0, 2.0, rng));

    auto build = [&]() {
        auto l1 = tanh_op(add_row_bias(matmul(x, w1), b1));
        auto l2 = sigmoid(add_row_bias(matmul(l1, w2), b2));
        auto l3 = add_row_bias(matmul(l2, w3), b3);
        return mean_all(mul(l3, l3));
    };
    double worst = testutil::check_gradients({w1, b1, w2, b2, w3, b3}, build,
                                             60, rng);
    EXPECT_LT(worst, 1e-4);
}

// Per-op gradient sweep over the remaining graph surface.
TEST(Autodiff, OpGradientsMatchFiniteDifferences) {
    Rng rng(7);
    std::size_t b = 3, n = 4;
    auto p = parameter(Tensor::uniform(b, n, -2.0, 2.0, rng));
    auto q = parameter(Tensor::uniform(b, n, -2.0, 2.0, rng));
    auto w = parameter(Tensor::uniform(1, n, -2.0, 2.0, rng));
    auto g = parameter(Tensor::uniform(b, 1, -2.0, 2.0, rng));

    std::vector<std::pair<const char*, std::function<NodePtr()>>> cases = {
        {"relu_sub", [&] { return sum_all(relu(sub(p, q))); }},
        {"row_sums",
         [&] { return mean_all(mul(row_sums(p), row_sums(q))); }},
        {"slice_concat",
         [&] {
             auto c = concat_cols({slice_cols(p, 1, 3), q});
             return mean_all(mul(c, c));
         }},
        {"mul_row_broadcast",
         [&] { return mean_all(mul_row_broadcast(tanh_op(p), w)); }},
        {"mul_col_broadcast",
         [&] { return mean_all(mul_col_broadcast(p, sigmoid(g))); }},
        {"concat_permute_rows",
         [&] {
             auto c = concat_rows({p, q});
             auto perm = permute_rows(c, {5, 4, 3, 2, 1, 0});
             return mean_all(mul(perm, perm));
         }},
        {"scale_tanh", [&] { return sum_all(scale(tanh_op(p), 0.3)); }},
    };
    for (auto& [name, build] : cases) {
        double worst =
            testutil::check_gradients({p, q, w, g}, build, 40, rng);
        EXPECT_LT(worst, 1e-4) << name;
    }
}

TEST(Autodiff, EmbedRowsScattersGradients) {
    Rng rng(9);
    auto table = parameter(Tensor::uniform(5, 3, -1.0, 1.0, rng));
    auto build = [&]() {
        auto e = embed_rows(table, {1, 3, 1});
        return mean_all(mul(e, e));
    };
    double worst = testutil::check_gradients({table}, build, 30, rng);
    EXPECT_LT(worst, 1e-4);
    // rows never gathered carry zero gradient
    build();
    auto root = build();
    backward(root);
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_DOUBLE_EQ(table->grad.at(0, c), 0.0);
        EXPECT_DOUBLE_EQ(table->grad.at(2, c), 0.0);
        EXPECT_DOUBLE_EQ(table->grad.at(4, c), 0.0);
    }
}

TEST(Autodiff, SoftmaxCrossEntropyGradient) {
    Rng rng(11);
    auto logits = parameter(Tensor::uniform(4, 5, -2.0, 2.0, rng));
    auto build = [&]() {
        return mean_all(softmax_cross_entropy(logits, {0, 2, 4, 1}));
    };
    double worst = testutil::check_gradients({logits}, build, 40, rng);
    EXPECT_LT(worst, 1e-4);
}

TEST(Autodiff, BatchNormGradientTrainMode) {
    Rng rng(13);
    auto x = parameter(Tensor::uniform(6, 3, -2.0, 2.0, rng));
    auto gamma = parameter(Tensor::uniform(1, 3, 0.5, 1.5, rng));
    auto beta = parameter(Tensor::uniform(1, 3, -0.5, 0.5, rng));
    auto build = [&]() {
        // fresh state each rebuild so running stats do not leak between
        // finite-difference evaluations
        BatchNormState st;
        auto y = batch_norm(x, gamma, beta, st, true);
        return mean_all(mul(y, y));
    };
    double worst =
        testutil::check_gradients({x, gamma, beta}, build, 50, rng);
    EXPECT_LT(worst, 1e-4);
}

TEST(Autodiff, BatchNormEvalUsesRunningStats) {
    Rng rng(17);
    auto gamma = parameter(Tensor(1, 2, 1.0));
    auto beta = parameter(Tensor(1, 2, 0.0));
    BatchNormState st;
    auto x1 = constant(Tensor::uniform(8, 2, -1.0, 1.0, rng));
    batch_norm(x1, gamma, beta, st, true);
    auto saved_mean = st.running_mean;
    auto x2 = constant(Tensor::uniform(4, 2, 5.0, 6.0, rng));
    auto y = batch_norm(x2, gamma, beta, st, false);
    // eval must not update running stats
    EXPECT_EQ(st.running_mean.data, saved_mean.data);
    // and must normalize with them, not batch stats
    double expect0 = (x2->value.at(0, 0) - st.running_mean.data[0]) /
                     std::sqrt(st.running_var.data[0] + st.eps);
    EXPECT_NEAR(y->value.at(0, 0), expect0, 1e-12);
}
