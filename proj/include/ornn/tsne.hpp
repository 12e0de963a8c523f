#pragma once

#include <cmath>
#include <vector>

#include "ornn/tensor.hpp"

// Exact t-SNE. Input affinities P come from a per-point binary search
// on the Gaussian precision so each conditional distribution hits the
// target perplexity (2^entropy); the embedding is optimized by gradient
// descent on KL(P||Q) with momentum and early exaggeration, Student-t
// kernel in the plane. O(n^2) throughout, which is fine at emoji scale.

namespace ornn {

struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    int momentum_switch = 250;     // iteration where momentum steps up
    double early_exaggeration = 12.0;
    int exaggeration_stop = 250;   // iterations with exaggerated P
    std::uint64_t seed = 0;
};

struct TsneResult {
    Tensor coords;  // n x 2
    double kl_initial = 0.0;
    double kl_final = 0.0;
};

inline Tensor pairwise_sq_dists(const Tensor& x) {
    std::size_t n = x.rows();
    Tensor d(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < x.cols(); ++c) {
                double diff = x.at(i, c) - x.at(j, c);
                s += diff * diff;
            }
            d.at(i, j) = s;
            d.at(j, i) = s;
        }
    return d;
}

// Symmetrized affinities: p_ij = (p_{j|i} + p_{i|j}) / 2n, with each
// row's precision found by binary search so |2^H - perplexity| <= tol.
inline Tensor tsne_p_matrix(const Tensor& x, double perplexity,
                            double tol = 1e-4) {
    std::size_t n = x.rows();
    if (n < 4) throw DataError("t-SNE needs at least 4 points");
    if (perplexity >= (static_cast<double>(n) - 1.0) / 3.0)
        throw DataError("perplexity infeasible: need perplexity < (n-1)/3");
    if (perplexity < 1.0) throw DataError("perplexity must be >= 1");

    Tensor dist = pairwise_sq_dists(x);
    Tensor cond(n, n);
    std::vector<double> probs(n);
    for (std::size_t i = 0; i < n; ++i) {
        double beta = 1.0, beta_lo = 0.0,
               beta_hi = std::numeric_limits<double>::infinity();
        double perp = 0.0;
        bool hit = false;
        for (int iter = 0; iter < 200; ++iter) {
            double z = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                probs[j] = j == i ? 0.0 : std::exp(-beta * dist.at(i, j));
                z += probs[j];
            }
            double entropy_bits = 0.0;  // H with log2
            for (std::size_t j = 0; j < n; ++j) {
                if (probs[j] <= 0.0) continue;
                double p = probs[j] / z;
                entropy_bits -= p * std::log2(p);
            }
            perp = std::pow(2.0, entropy_bits);
            if (std::fabs(perp - perplexity) <= tol) {
                for (std::size_t j = 0; j < n; ++j)
                    cond.at(i, j) = probs[j] / z;
                hit = true;
                break;
            }
            if (perp > perplexity) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0
                                           : 0.5 * (beta + beta_hi);
            } else {
                beta_hi = beta;
                beta = 0.5 * (beta + beta_lo);
            }
        }
        if (!hit)
            throw NumericError(
                "perplexity calibration failed for row " +
                std::to_string(i));
    }

    Tensor p(n, n);
    double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            p.at(i, j) = (cond.at(i, j) + cond.at(j, i)) * scale;
        }
    return p;
}

namespace detail {

// Student-t weights w_ij = 1/(1+d2_ij) and their sum.
inline double student_weights(const Tensor& y, Tensor& w) {
    std::size_t n = y.rows();
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double dx = y.at(i, 0) - y.at(j, 0);
            double dy = y.at(i, 1) - y.at(j, 1);
            double v = 1.0 / (1.0 + dx * dx + dy * dy);
            w.at(i, j) = v;
            w.at(j, i) = v;
            z += 2.0 * v;
        }
    return z;
}

}  // namespace detail

inline double tsne_kl(const Tensor& p, const Tensor& y) {
    std::size_t n = p.rows();
    Tensor w(n, n);
    double z = detail::student_weights(y, w);
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || p.at(i, j) <= 0.0) continue;
            double q = std::max(w.at(i, j) / z, 1e-300);
            kl += p.at(i, j) * std::log(p.at(i, j) / q);
        }
    return kl;
}

inline Tensor tsne_gradient(const Tensor& p, const Tensor& y) {
    std::size_t n = p.rows();
    Tensor w(n, n);
    double z = detail::student_weights(y, w);
    Tensor grad(n, 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double q = w.at(i, j) / z;
            double mult = 4.0 * (p.at(i, j) - q) * w.at(i, j);
            grad.at(i, 0) += mult * (y.at(i, 0) - y.at(j, 0));
            grad.at(i, 1) += mult * (y.at(i, 1) - y.at(j, 1));
        }
    return grad;
}

inline TsneResult tsne(const Tensor& x, const TsneConfig& cfg) {
    if (cfg.iterations <= 0) throw UsageError("iterations must be positive");
    Tensor p = tsne_p_matrix(x, cfg.perplexity);
    std::size_t n = x.rows();

    Rng rng(cfg.seed);
    std::normal_distribution<double> init(0.0, 1e-4);
    Tensor y(n, 2);
    for (auto& v : y.data) v = init(rng);

    TsneResult result;
    result.kl_initial = tsne_kl(p, y);

    Tensor p_ex = p;
    p_ex.mat() *= cfg.early_exaggeration;

    Tensor velocity(n, 2);
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const Tensor& p_cur = iter < cfg.exaggeration_stop ? p_ex : p;
        Tensor grad = tsne_gradient(p_cur, y);
        if (!grad.all_finite())
            throw NumericError("non-finite t-SNE gradient");
        double momentum = iter < cfg.momentum_switch ? cfg.momentum_initial
                                                     : cfg.momentum_final;
        for (std::size_t i = 0; i < velocity.data.size(); ++i) {
            velocity.data[i] = momentum * velocity.data[i] -
                               cfg.learning_rate * grad.data[i];
            y.data[i] += velocity.data[i];
        }
        // keep the layout centered
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += y.at(i, 0);
            my += y.at(i, 1);
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y.at(i, 0) -= mx;
            y.at(i, 1) -= my;
        }
    }

    result.kl_final = tsne_kl(p, y);
    result.coords = std::move(y);
    return result;
}

}  // namespace ornn
