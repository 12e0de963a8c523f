#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ornn/tensor.hpp"

// Reverse-mode automatic differentiation over dense tensors. Forward
// values are computed eagerly while a tape of backprop closures is
// recorded; backward() replays the tape in reverse topological order.
// Graphs are built per training batch and discarded; parameter nodes
// outlive graphs and accumulate gradients until sgd_step() zeroes them.

namespace ornn {

class Node;
using NodePtr = std::shared_ptr<Node>;

class Node {
public:
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (grad.data.size() != value.data.size()) {
            grad = Tensor(value.rows(), value.cols());
        }
    }

    void zero_grad() {
        grad = Tensor(value.rows(), value.cols());
    }
};

inline NodePtr constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    return n;
}

inline NodePtr parameter(Tensor t) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    n->requires_grad = true;
    n->zero_grad();
    return n;
}

namespace detail {

inline NodePtr make_op(Tensor value, std::vector<NodePtr> parents,
                       std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

inline void shape_check(bool ok, const char* what) {
    if (!ok) throw NumericError(std::string("shape mismatch in ") + what);
}

}  // namespace detail

inline NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    detail::shape_check(a->value.cols() == b->value.rows(), "matmul");
    Tensor out(a->value.rows(), b->value.cols());
    out.mat().noalias() = a->value.mat() * b->value.mat();
    require_finite(out, "matmul");
    return detail::make_op(std::move(out), {a, b}, [](Node& n) {
        Node& a = *n.parents[0];
        Node& b = *n.parents[1];
        if (a.requires_grad) {
            a.ensure_grad();
            a.grad.mat().noalias() += n.grad.mat() * b.value.mat().transpose();
        }
        if (b.requires_grad) {
            b.ensure_grad();
            b.grad.mat().noalias() += a.value.mat().transpose() * n.grad.mat();
        }
    });
}

inline NodePtr add(const NodePtr& a, const NodePtr& b) {
    detail::shape_check(a->value.same_shape(b->value), "add");
    Tensor out = a->value;
    out.mat() += b->value.mat();
    return detail::make_op(std::move(out), {a, b}, [](Node& n) {
        for (int i = 0; i < 2; ++i) {
            Node& p = *n.parents[i];
            if (!p.requires_grad) continue;
            p.ensure_grad();
            p.grad.mat() += n.grad.mat();
        }
    });
}

inline NodePtr sub(const NodePtr& a, const NodePtr& b) {
    detail::shape_check(a->value.same_shape(b->value), "sub");
    Tensor out = a->value;
    out.mat() -= b->value.mat();
    return detail::make_op(std::move(out), {a, b}, [](Node& n) {
        Node& a = *n.parents[0];
        Node& b = *n.parents[1];
        if (a.requires_grad) {
            a.ensure_grad();
            a.grad.mat() += n.grad.mat();
        }
        if (b.requires_grad) {
            b.ensure_grad();
            b.grad.mat() -= n.grad.mat();
        }
    });
}

inline NodePtr mul(const NodePtr& a, const NodePtr& b) {
    detail::shape_check(a->value.same_shape(b->value), "mul");
    Tensor out = a->value;
    out.mat() = out.mat().cwiseProduct(b->value.mat());
    require_finite(out, "mul");
    return detail::make_op(std::move(out), {a, b}, [](Node& n) {
        Node& a = *n.parents[0];
        Node& b = *n.parents[1];
        if (a.requires_grad) {
            a.ensure_grad();
            a.grad.mat() += n.grad.mat().cwiseProduct(b.value.mat());
        }
        if (b.requires_grad) {
            b.ensure_grad();
            b.grad.mat() += n.grad.mat().cwiseProduct(a.value.mat());
        }
    });
}

inline NodePtr scale(const NodePtr& a, double c) {
    Tensor out = a->value;
    out.mat() *= c;
    return detail::make_op(std::move(out), {a}, [c](Node& n) {
        Node& a = *n.parents[0];
        a.ensure_grad();
        a.grad.mat() += c * n.grad.mat();
    });
}

// X (m x n) + b (1 x n), broadcast over rows.
inline NodePtr add_row_bias(const NodePtr& x, const NodePtr& b) {
    detail::shape_check(b->value.rows() == 1 &&
                            x->value.cols() == b->value.cols(),
                        "add_row_bias");
    Tensor out = x->value;
    out.mat().rowwise() += Eigen::RowVectorXd::Map(b->value.data.data(),
                                                   b->value.cols());
    return detail::make_op(std::move(out), {x, b}, [](Node& n) {
        Node& x = *n.parents[0];
        Node& b = *n.parents[1];
        if (x.requires_grad) {
            x.ensure_grad();
            x.grad.mat() += n.grad.mat();
        }
        if (b.requires_grad) {
            b.ensure_grad();
            b.grad.mat() += n.grad.mat().colwise().sum();
        }
    });
}

// X (m x n) .* w (1 x n), broadcast over rows.
inline NodePtr mul_row_broadcast(const NodePtr& x, const NodePtr& w) {
    detail::shape_check(w->value.rows() == 1 &&
                            x->value.cols() == w->value.cols(),
                        "mul_row_broadcast");
    Tensor out = x->value;
    auto wrow = Eigen::RowVectorXd::Map(w->value.data.data(), w->value.cols());
    out.mat() = out.mat().array().rowwise() * wrow.array();
    return detail::make_op(std::move(out), {x, w}, [](Node& n) {
        Node& x = *n.parents[0];
        Node& w = *n.parents[1];
        auto wrow =
            Eigen::RowVectorXd::Map(w.value.data.data(), w.value.cols());
        if (x.requires_grad) {
            x.ensure_grad();
            x.grad.mat() += (n.grad.mat().array().rowwise() * wrow.array())
                                .matrix();
        }
        if (w.requires_grad) {
            w.ensure_grad();
            w.grad.mat() += (n.grad.mat().cwiseProduct(x.value.mat()))
                                .colwise()
                                .sum();
        }
    });
}

// X (m x n) .* g (m x 1), broadcast over columns (row scaling).
inline NodePtr mul_col_broadcast(const NodePtr& x, const NodePtr& g) {
    detail::shape_check(g->value.cols() == 1 &&
                            x->value.rows() == g->value.rows(),
                        "mul_col_broadcast");
    Tensor out = x->value;
    auto gcol = Eigen::VectorXd::Map(g->value.data.data(), g->value.rows());
    out.mat() = out.mat().array().colwise() * gcol.array();
    return detail::make_op(std::move(out), {x, g}, [](Node& n) {
        Node& x = *n.parents[0];
        Node& g = *n.parents[1];
        auto gcol = Eigen::VectorXd::Map(g.value.data.data(), g.value.rows());
        if (x.requires_grad) {
            x.ensure_grad();
            x.grad.mat() +=
                (n.grad.mat().array().colwise() * gcol.array()).matrix();
        }
        if (g.requires_grad) {
            g.ensure_grad();
            g.grad.mat() += (n.grad.mat().cwiseProduct(x.value.mat()))
                                .rowwise()
                                .sum();
        }
    });
}

inline NodePtr sigmoid(const NodePtr& a) {
    Tensor out = a->value;
    for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        Node& a = *n.parents[0];
        a.ensure_grad();
        a.grad.mat() += n.grad.mat().cwiseProduct(
            (n.value.mat().array() * (1.0 - n.value.mat().array())).matrix());
    });
}

inline NodePtr tanh_op(const NodePtr& a) {
    Tensor out = a->value;
    for (auto& v : out.data) v = std::tanh(v);
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        Node& a = *n.parents[0];
        a.ensure_grad();
        a.grad.mat() += n.grad.mat().cwiseProduct(
            (1.0 - n.value.mat().array().square()).matrix());
    });
}

// max(x, 0); subgradient 0 at the kink.
inline NodePtr relu(const NodePtr& a) {
    Tensor out = a->value;
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        Node& a = *n.parents[0];
        a.ensure_grad();
        for (std::size_t i = 0; i < a.grad.data.size(); ++i)
            if (a.value.data[i] > 0.0) a.grad.data[i] += n.grad.data[i];
    });
}

inline NodePtr sum_all(const NodePtr& a) {
    Tensor out = Tensor::scalar(a->value.mat().sum());
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        Node& a = *n.parents[0];
        a.ensure_grad();
        a.grad.mat().array() += n.grad.data[0];
    });
}

inline NodePtr mean_all(const NodePtr& a) {
    double inv = 1.0 / static_cast<double>(a->value.numel());
    Tensor out = Tensor::scalar(a->value.mat().sum() * inv);
    return detail::make_op(std::move(out), {a}, [inv](Node& n) {
        Node& a = *n.parents[0];
        a.ensure_grad();
        a.grad.mat().array() += n.grad.data[0] * inv;
    });
}

inline NodePtr row_sums(const NodePtr& a) {
    Tensor out(a->value.rows(), 1);
    Eigen::VectorXd::Map(out.data.data(), out.rows()) =
        a->value.mat().rowwise().sum();
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        Node& a = *n.parents[0];
        a.ensure_grad();
        auto gcol = Eigen::VectorXd::Map(n.grad.data.data(), n.grad.rows());
        a.grad.mat().array().colwise() += gcol.array();
    });
}

inline NodePtr slice_cols(const NodePtr& a, std::size_t c0, std::size_t c1) {
    detail::shape_check(c0 < c1 && c1 <= a->value.cols(), "slice_cols");
    Tensor out(a->value.rows(), c1 - c0);
    out.mat() = a->value.mat().middleCols(c0, c1 - c0);
    return detail::make_op(std::move(out), {a}, [c0, c1](Node& n) {
        Node& a = *n.parents[0];
        a.ensure_grad();
        a.grad.mat().middleCols(c0, c1 - c0) += n.grad.mat();
    });
}

inline NodePtr concat_cols(const std::vector<NodePtr>& parts) {
    detail::shape_check(!parts.empty(), "concat_cols");
    std::size_t rows = parts[0]->value.rows(), cols = 0;
    for (const auto& p : parts) {
        detail::shape_check(p->value.rows() == rows, "concat_cols");
        cols += p->value.cols();
    }
    Tensor out(rows, cols);
    std::size_t off = 0;
    for (const auto& p : parts) {
        out.mat().middleCols(off, p->value.cols()) = p->value.mat();
        off += p->value.cols();
    }
    return detail::make_op(std::move(out), parts, [](Node& n) {
        std::size_t off = 0;
        for (auto& pp : n.parents) {
            Node& p = *pp;
            std::size_t w = p.value.cols();
            if (p.requires_grad) {
                p.ensure_grad();
                p.grad.mat() += n.grad.mat().middleCols(off, w);
            }
            off += w;
        }
    });
}

inline NodePtr concat_rows(const std::vector<NodePtr>& parts) {
    detail::shape_check(!parts.empty(), "concat_rows");
    std::size_t cols = parts[0]->value.cols(), rows = 0;
    for (const auto& p : parts) {
        detail::shape_check(p->value.cols() == cols, "concat_rows");
        rows += p->value.rows();
    }
    Tensor out(rows, cols);
    std::size_t off = 0;
    for (const auto& p : parts) {
        out.mat().middleRows(off, p->value.rows()) = p->value.mat();
        off += p->value.rows();
    }
    return detail::make_op(std::move(out), parts, [](Node& n) {
        std::size_t off = 0;
        for (auto& pp : n.parents) {
            Node& p = *pp;
            std::size_t h = p.value.rows();
            if (p.requires_grad) {
                p.ensure_grad();
                p.grad.mat() += n.grad.mat().middleRows(off, h);
            }
            off += h;
        }
    });
}

// out.row(i) = x.row(perm[i])
inline NodePtr permute_rows(const NodePtr& x, std::vector<std::size_t> perm) {
    detail::shape_check(perm.size() == x->value.rows(), "permute_rows");
    Tensor out(perm.size(), x->value.cols());
    for (std::size_t i = 0; i < perm.size(); ++i)
        out.mat().row(i) = x->value.mat().row(perm[i]);
    return detail::make_op(std::move(out), {x},
                           [perm = std::move(perm)](Node& n) {
                               Node& x = *n.parents[0];
                               x.ensure_grad();
                               for (std::size_t i = 0; i < perm.size(); ++i)
                                   x.grad.mat().row(perm[i]) +=
                                       n.grad.mat().row(i);
                           });
}

// Gathers rows of an embedding table; backward scatters into the table.
inline NodePtr embed_rows(const NodePtr& table,
                          std::vector<std::size_t> ids) {
    for (std::size_t id : ids)
        detail::shape_check(id < table->value.rows(), "embed_rows");
    Tensor out(ids.size(), table->value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i)
        out.mat().row(i) = table->value.mat().row(ids[i]);
    return detail::make_op(std::move(out), {table},
                           [ids = std::move(ids)](Node& n) {
                               Node& t = *n.parents[0];
                               t.ensure_grad();
                               for (std::size_t i = 0; i < ids.size(); ++i)
                                   t.grad.mat().row(ids[i]) +=
                                       n.grad.mat().row(i);
                           });
}

// Inverted dropout: train-time zeroing with 1/(1-p) survivor scaling,
// identity in eval mode.
inline NodePtr dropout(const NodePtr& x, double p, bool train, Rng& rng) {
    if (!train || p <= 0.0) return x;
    detail::shape_check(p < 1.0, "dropout");
    std::bernoulli_distribution keep(1.0 - p);
    auto mask = std::make_shared<std::vector<double>>(x->value.numel());
    double inv = 1.0 / (1.0 - p);
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        (*mask)[i] = keep(rng) ? inv : 0.0;
        out.data[i] *= (*mask)[i];
    }
    return detail::make_op(std::move(out), {x}, [mask](Node& n) {
        Node& x = *n.parents[0];
        x.ensure_grad();
        for (std::size_t i = 0; i < mask->size(); ++i)
            x.grad.data[i] += n.grad.data[i] * (*mask)[i];
    });
}

// Fused softmax + cross-entropy, one loss per row.
inline NodePtr softmax_cross_entropy(const NodePtr& logits,
                                     std::vector<std::size_t> labels) {
    detail::shape_check(labels.size() == logits->value.rows(),
                        "softmax_cross_entropy");
    std::size_t k = logits->value.cols();
    auto probs = std::make_shared<Tensor>(logits->value.rows(), k);
    Tensor out(logits->value.rows(), 1);
    for (std::size_t r = 0; r < logits->value.rows(); ++r) {
        detail::shape_check(labels[r] < k, "softmax_cross_entropy");
        double mx = logits->value.mat().row(r).maxCoeff();
        double z = 0.0;
        for (std::size_t c = 0; c < k; ++c)
            z += std::exp(logits->value.at(r, c) - mx);
        double logz = std::log(z) + mx;
        for (std::size_t c = 0; c < k; ++c)
            probs->at(r, c) = std::exp(logits->value.at(r, c) - logz);
        out.data[r] = logz - logits->value.at(r, labels[r]);
    }
    require_finite(out, "softmax_cross_entropy");
    return detail::make_op(
        std::move(out), {logits},
        [probs, labels = std::move(labels)](Node& n) {
            Node& lg = *n.parents[0];
            lg.ensure_grad();
            for (std::size_t r = 0; r < lg.value.rows(); ++r) {
                double g = n.grad.data[r];
                for (std::size_t c = 0; c < lg.value.cols(); ++c) {
                    double ind = (c == labels[r]) ? 1.0 : 0.0;
                    lg.grad.at(r, c) += g * (probs->at(r, c) - ind);
                }
            }
        });
}

// Batch normalization over the batch (row) dimension with EMA-tracked
// population statistics for eval mode.
struct BatchNormState {
    Tensor running_mean;  // 1 x F
    Tensor running_var;   // 1 x F
    double momentum = 0.1;
    double eps = 1e-5;
    bool initialized = false;
};

inline NodePtr batch_norm(const NodePtr& x, const NodePtr& gamma,
                          const NodePtr& beta, BatchNormState& state,
                          bool train) {
    std::size_t b = x->value.rows(), f = x->value.cols();
    detail::shape_check(gamma->value.rows() == 1 && gamma->value.cols() == f,
                        "batch_norm");
    detail::shape_check(beta->value.rows() == 1 && beta->value.cols() == f,
                        "batch_norm");
    if (!state.initialized) {
        state.running_mean = Tensor(1, f);
        state.running_var = Tensor(1, f, 1.0);
        state.initialized = true;
    }
    Tensor mean(1, f), var(1, f);
    if (train) {
        mean.mat() = x->value.mat().colwise().mean();
        for (std::size_t c = 0; c < f; ++c) {
            double m = mean.data[c], s = 0.0;
            for (std::size_t r = 0; r < b; ++r) {
                double d = x->value.at(r, c) - m;
                s += d * d;
            }
            var.data[c] = s / static_cast<double>(b);
        }
        double mom = state.momentum;
        state.running_mean.mat() =
            (1.0 - mom) * state.running_mean.mat() + mom * mean.mat();
        state.running_var.mat() =
            (1.0 - mom) * state.running_var.mat() + mom * var.mat();
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }

    auto xhat = std::make_shared<Tensor>(b, f);
    auto inv_std = std::make_shared<Tensor>(1, f);
    for (std::size_t c = 0; c < f; ++c)
        inv_std->data[c] = 1.0 / std::sqrt(var.data[c] + state.eps);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t c = 0; c < f; ++c)
            xhat->at(r, c) =
                (x->value.at(r, c) - mean.data[c]) * inv_std->data[c];

    Tensor out(b, f);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t c = 0; c < f; ++c)
            out.at(r, c) =
                gamma->value.data[c] * xhat->at(r, c) + beta->value.data[c];
    require_finite(out, "batch_norm");

    return detail::make_op(
        std::move(out), {x, gamma, beta},
        [xhat, inv_std, train](Node& n) {
            Node& x = *n.parents[0];
            Node& gamma = *n.parents[1];
            Node& beta = *n.parents[2];
            std::size_t b = x.value.rows(), f = x.value.cols();
            if (gamma.requires_grad) {
                gamma.ensure_grad();
                for (std::size_t c = 0; c < f; ++c) {
                    double s = 0.0;
                    for (std::size_t r = 0; r < b; ++r)
                        s += n.grad.at(r, c) * xhat->at(r, c);
                    gamma.grad.data[c] += s;
                }
            }
            if (beta.requires_grad) {
                beta.ensure_grad();
                for (std::size_t c = 0; c < f; ++c) {
                    double s = 0.0;
                    for (std::size_t r = 0; r < b; ++r) s += n.grad.at(r, c);
                    beta.grad.data[c] += s;
                }
            }
            if (!x.requires_grad) return;
            x.ensure_grad();
            if (!train) {
                // population stats are constants w.r.t. x
                for (std::size_t r = 0; r < b; ++r)
                    for (std::size_t c = 0; c < f; ++c)
                        x.grad.at(r, c) += n.grad.at(r, c) *
                                           gamma.value.data[c] *
                                           inv_std->data[c];
                return;
            }
            double invb = 1.0 / static_cast<double>(b);
            for (std::size_t c = 0; c < f; ++c) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (std::size_t r = 0; r < b; ++r) {
                    double dy = n.grad.at(r, c) * gamma.value.data[c];
                    sum_dy += dy;
                    sum_dy_xhat += dy * xhat->at(r, c);
                }
                for (std::size_t r = 0; r < b; ++r) {
                    double dy = n.grad.at(r, c) * gamma.value.data[c];
                    x.grad.at(r, c) +=
                        inv_std->data[c] *
                        (dy - invb * sum_dy -
                         xhat->at(r, c) * invb * sum_dy_xhat);
                }
            }
        });
}

// Reverse topological sweep from a scalar root. Gradients accumulate
// additively across fan-out.
inline void backward(const NodePtr& root) {
    if (root->value.numel() != 1)
        throw NumericError("backward requires a scalar root");

    std::vector<Node*> order;
    std::unordered_map<Node*, int> state;  // 0 new, 1 visiting, 2 done
    std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx == 0) {
            int& s = state[node];
            if (s == 1) throw NumericError("cycle detected in graph");
            if (s == 2) {
                stack.pop_back();
                continue;
            }
            s = 1;
        }
        if (idx < node->parents.size()) {
            Node* next = node->parents[idx++].get();
            int s = state.count(next) ? state[next] : 0;
            if (s == 1) throw NumericError("cycle detected in graph");
            if (s == 0) stack.emplace_back(next, 0);
        } else {
            state[node] = 2;
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order)
        if (n->requires_grad) n->ensure_grad();
    root->grad = Tensor::scalar(1.0);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->requires_grad && n->backprop) n->backprop(*n);
    }
}

// Scales gradients of a parameter group so their global L2 norm does
// not exceed max_norm; direction is preserved.
inline double clip_by_norm(const std::vector<NodePtr>& params,
                           double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        p->ensure_grad();
        for (double g : p->grad.data) sq += g * g;
    }
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        double s = max_norm / norm;
        for (const auto& p : params)
            for (double& g : p->grad.data) g *= s;
    }
    return norm;
}

// p <- p - lr * (grad + l2 * p); gradients zeroed afterward.
inline void sgd_step(const std::vector<NodePtr>& params, double lr,
                     double l2) {
    for (const auto& p : params) {
        p->ensure_grad();
        for (std::size_t i = 0; i < p->value.data.size(); ++i)
            p->value.data[i] -=
                lr * (p->grad.data[i] + l2 * p->value.data[i]);
        p->zero_grad();
    }
}

}  // namespace ornn
