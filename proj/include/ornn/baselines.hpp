#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ornn/tensor.hpp"
#include "ornn/tfidf.hpp"

// Classical ordinal baselines over TF-IDF vectors:
//   IT /AT  threshold ordinal logistic regression (immediate / all
//           thresholds), fit by full-batch gradient descent with
//           backtracking line search; thresholds kept ordered by the
//           reparameterization theta_i = theta_1 + sum_{j<i} exp(delta_j)
//   LAD     least absolute deviation via IRLS with eps-smoothed |r|
//   MC      multiclass (softmax) logistic regression

namespace ornn {

// f evaluates the objective and fills the gradient.
using ObjectiveFn =
    std::function<double(const std::vector<double>&, std::vector<double>&)>;

struct GdResult {
    std::vector<double> x;
    double objective = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

inline GdResult minimize_gd(const ObjectiveFn& f, std::vector<double> x,
                            int max_iters = 10000, double tol = 1e-6) {
    std::vector<double> grad(x.size()), trial(x.size()),
        trial_grad(x.size());
    double fx = f(x, grad);
    double step = 1.0;
    GdResult res;
    for (int it = 0; it < max_iters; ++it) {
        double gnorm = l2_norm(grad);
        if (gnorm < tol) {
            res.x = std::move(x);
            res.objective = fx;
            res.grad_norm = gnorm;
            res.iterations = it;
            res.converged = true;
            return res;
        }
        // Armijo backtracking
        double g2 = gnorm * gnorm;
        double t = step;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < x.size(); ++i)
                trial[i] = x[i] - t * grad[i];
            double ft = f(trial, trial_grad);
            if (ft <= fx - 1e-4 * t * g2) {
                x.swap(trial);
                grad.swap(trial_grad);
                fx = ft;
                step = t * 2.0;  // optimistic growth
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            res.x = std::move(x);
            res.objective = fx;
            res.grad_norm = gnorm;
            res.iterations = it;
            res.converged = false;  // line search exhausted
            return res;
        }
    }
    double gnorm = l2_norm(grad);
    res.x = std::move(x);
    res.objective = fx;
    res.grad_norm = gnorm;
    res.iterations = max_iters;
    res.converged = gnorm < tol;
    return res;
}

enum class ThresholdVariant { Immediate, All };

class ThresholdModel {
public:
    ThresholdVariant variant = ThresholdVariant::All;
    std::vector<double> w;
    std::vector<double> thresholds;  // non-decreasing after fit
    double l2 = 1e-2;
    bool converged = false;
    double final_grad_norm = 0.0;

    // parameter layout: [w (dim) | theta_1 | delta_1 .. delta_{k-2}]
    static void unpack_thresholds(const std::vector<double>& p,
                                  std::size_t dim, int k,
                                  std::vector<double>& theta) {
        theta.resize(k - 1);
        theta[0] = p[dim];
        for (int i = 1; i < k - 1; ++i)
            theta[i] = theta[i - 1] + std::exp(p[dim + 1 + (i - 1)]);
    }

    static ObjectiveFn make_objective(const std::vector<SparseVector>& x,
                                      const std::vector<int>& y, int k,
                                      ThresholdVariant variant, double l2,
                                      std::size_t dim) {
        return [&x, &y, k, variant, l2, dim](const std::vector<double>& p,
                                             std::vector<double>& grad) {
            std::fill(grad.begin(), grad.end(), 0.0);
            std::vector<double> theta;
            unpack_thresholds(p, dim, k, theta);
            std::vector<double> gtheta(k - 1, 0.0);

            double obj = 0.0;
            for (std::size_t s = 0; s < x.size(); ++s) {
                double margin = 0.0;
                for (auto& [i, v] : x[s].entries) margin += p[i] * v;
                int label = y[s];
                int lo = variant == ThresholdVariant::All
                             ? 1
                             : std::max(1, label - 1);
                int hi = variant == ThresholdVariant::All
                             ? k - 1
                             : std::min(k - 1, label);
                for (int i = lo; i <= hi; ++i) {
                    double sgn = i >= label ? 1.0 : -1.0;
                    double z = -sgn * (theta[i - 1] - margin);
                    // softplus(z), stable
                    obj += z > 0 ? z + std::log1p(std::exp(-z))
                                 : std::log1p(std::exp(z));
                    double sig = 1.0 / (1.0 + std::exp(-z));
                    // dz/dmargin = sgn, dz/dtheta_i = -sgn
                    double gm = sig * sgn;
                    x[s].axpy_into(gm, grad);
                    gtheta[i - 1] -= gm;
                }
            }
            for (std::size_t i = 0; i < dim; ++i) {
                obj += l2 * p[i] * p[i];
                grad[i] += 2.0 * l2 * p[i];
            }
            // chain through the ordering reparameterization
            double suffix = 0.0;
            for (int i = k - 2; i >= 1; --i) {
                suffix += gtheta[i];
                grad[dim + 1 + (i - 1)] =
                    suffix * std::exp(p[dim + 1 + (i - 1)]);
            }
            grad[dim] = 0.0;
            for (int i = 0; i < k - 1; ++i) grad[dim] += gtheta[i];
            return obj;
        };
    }

    static ThresholdModel fit(const std::vector<SparseVector>& x,
                              const std::vector<int>& y, int k,
                              ThresholdVariant variant, double l2,
                              std::size_t dim) {
        ThresholdModel m;
        m.variant = variant;
        m.l2 = l2;
        std::vector<double> params(dim + 1 + (k - 2), 0.0);
        params[dim] = -(static_cast<double>(k) / 2.0 - 1.0);  // theta_1

        ObjectiveFn f = make_objective(x, y, k, variant, l2, dim);
        GdResult res = minimize_gd(f, std::move(params));
        m.converged = res.converged;
        m.final_grad_norm = res.grad_norm;
        m.w.assign(res.x.begin(), res.x.begin() + dim);
        std::vector<double> theta;
        unpack_thresholds(res.x, dim, k, theta);
        m.thresholds = std::move(theta);
        return m;
    }

    int predict(const SparseVector& v) const {
        double margin = v.dot_dense(w);
        int rank = 1;
        for (double t : thresholds)
            if (margin > t) ++rank;
        return rank;
    }
};

class LadModel {
public:
    std::vector<double> w;  // last entry is the bias
    double l2 = 0.0;
    bool converged = false;

    static LadModel fit(const std::vector<SparseVector>& x,
                        const std::vector<int>& y, double l2,
                        std::size_t dim, int irls_rounds = 60,
                        double eps = 1e-8) {
        LadModel m;
        m.l2 = l2;
        std::size_t d = dim + 1;  // bias column
        std::vector<double> beta(d, 0.0);

        // IRLS: weighted ridge per round, solved matrix-free with CG
        for (int round = 0; round < irls_rounds; ++round) {
            std::vector<double> q(x.size());
            for (std::size_t s = 0; s < x.size(); ++s) {
                double pred = x[s].dot_dense(beta) + beta[dim];
                double r = pred - static_cast<double>(y[s]);
                q[s] = 1.0 / std::sqrt(r * r + eps);
            }
            // A = X^T Q X + reg, rhs = X^T Q y  (bias unregularized)
            auto matvec = [&](const std::vector<double>& v,
                              std::vector<double>& out) {
                std::fill(out.begin(), out.end(), 0.0);
                for (std::size_t s = 0; s < x.size(); ++s) {
                    double xv = x[s].dot_dense(v) + v[dim];
                    double c = q[s] * xv;
                    x[s].axpy_into(c, out);
                    out[dim] += c;
                }
                for (std::size_t i = 0; i < dim; ++i) out[i] += l2 * v[i];
            };
            std::vector<double> rhs(d, 0.0);
            for (std::size_t s = 0; s < x.size(); ++s) {
                double c = q[s] * static_cast<double>(y[s]);
                x[s].axpy_into(c, rhs);
                rhs[dim] += c;
            }

            std::vector<double> next = beta;
            conjugate_gradient(matvec, rhs, next, 200, 1e-12);
            double shift = 0.0;
            for (std::size_t i = 0; i < d; ++i)
                shift = std::max(shift, std::fabs(next[i] - beta[i]));
            beta = std::move(next);
            if (shift < 1e-10) {
                m.converged = true;
                break;
            }
        }
        m.w = std::move(beta);
        return m;
    }

    double raw(const SparseVector& v) const {
        return v.dot_dense(w) + w.back();
    }

    int predict(const SparseVector& v, int k) const {
        return static_cast<int>(
            std::clamp<long long>(std::llround(raw(v)), 1, k));
    }

private:
    static void conjugate_gradient(
        const std::function<void(const std::vector<double>&,
                                 std::vector<double>&)>& matvec,
        const std::vector<double>& rhs, std::vector<double>& sol,
        int max_iters, double tol) {
        std::size_t d = rhs.size();
        std::vector<double> r(d), p(d), ap(d);
        matvec(sol, ap);
        for (std::size_t i = 0; i < d; ++i) r[i] = rhs[i] - ap[i];
        p = r;
        double rs = dot(r, r);
        for (int it = 0; it < max_iters && rs > tol; ++it) {
            matvec(p, ap);
            double alpha = rs / std::max(dot(p, ap), 1e-300);
            for (std::size_t i = 0; i < d; ++i) {
                sol[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            double rs_new = dot(r, r);
            double betac = rs_new / rs;
            for (std::size_t i = 0; i < d; ++i)
                p[i] = r[i] + betac * p[i];
            rs = rs_new;
        }
    }
};

class McModel {
public:
    int k = 7;
    std::vector<double> params;  // row-major k x (dim+1), bias last
    std::size_t dim = 0;
    bool converged = false;
    double final_grad_norm = 0.0;

    static McModel fit(const std::vector<SparseVector>& x,
                       const std::vector<int>& y, int k, double l2,
                       std::size_t dim) {
        McModel m;
        m.k = k;
        m.dim = dim;
        std::size_t stride = dim + 1;

        ObjectiveFn f = [&](const std::vector<double>& p,
                            std::vector<double>& grad) {
            std::fill(grad.begin(), grad.end(), 0.0);
            double obj = 0.0;
            std::vector<double> logits(k), probs(k);
            for (std::size_t s = 0; s < x.size(); ++s) {
                for (int c = 0; c < k; ++c) {
                    const double* row = p.data() + c * stride;
                    double z = row[dim];
                    for (auto& [i, v] : x[s].entries) z += row[i] * v;
                    logits[c] = z;
                }
                double mx = *std::max_element(logits.begin(), logits.end());
                double zsum = 0.0;
                for (int c = 0; c < k; ++c) {
                    probs[c] = std::exp(logits[c] - mx);
                    zsum += probs[c];
                }
                for (auto& v : probs) v /= zsum;
                int label = y[s] - 1;
                obj += std::log(zsum) + mx - logits[label];
                for (int c = 0; c < k; ++c) {
                    double coef = probs[c] - (c == label ? 1.0 : 0.0);
                    double* grow = grad.data() + c * stride;
                    for (auto& [i, v] : x[s].entries) grow[i] += coef * v;
                    grow[dim] += coef;
                }
            }
            for (int c = 0; c < k; ++c)
                for (std::size_t i = 0; i < dim; ++i) {
                    double v = p[c * stride + i];
                    obj += l2 * v * v;
                    grad[c * stride + i] += 2.0 * l2 * v;
                }
            return obj;
        };

        GdResult res =
            minimize_gd(f, std::vector<double>(k * stride, 0.0));
        m.converged = res.converged;
        m.final_grad_norm = res.grad_norm;
        m.params = std::move(res.x);
        return m;
    }

    std::vector<double> probabilities(const SparseVector& v) const {
        std::size_t stride = dim + 1;
        std::vector<double> logits(k);
        for (int c = 0; c < k; ++c) {
            const double* row = params.data() + c * stride;
            double z = row[dim];
            for (auto& [i, val] : v.entries) z += row[i] * val;
            logits[c] = z;
        }
        double mx = *std::max_element(logits.begin(), logits.end());
        double zsum = 0.0;
        std::vector<double> probs(k);
        for (int c = 0; c < k; ++c) {
            probs[c] = std::exp(logits[c] - mx);
            zsum += probs[c];
        }
        for (auto& p : probs) p /= zsum;
        return probs;
    }

    int predict(const SparseVector& v) const {
        auto p = probabilities(v);
        return 1 + static_cast<int>(
                       std::max_element(p.begin(), p.end()) - p.begin());
    }
};

}  // namespace ornn
