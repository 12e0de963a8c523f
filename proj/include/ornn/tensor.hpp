#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "ornn/common.hpp"

namespace ornn {

using EigenRowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<EigenRowMat>;
using ConstMatMap = Eigen::Map<const EigenRowMat>;

// Dense row-major tensor. Everything the pipeline needs is rank <= 2,
// so a tensor is viewed as rows x cols (a vector is 1 x n).
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : shape{rows, cols}, data(rows * cols, fill) {}

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t.data[0] = v;
        return t;
    }

    static Tensor row(std::initializer_list<double> vs) {
        Tensor t(1, vs.size());
        std::size_t i = 0;
        for (double v : vs) t.data[i++] = v;
        return t;
    }

    static Tensor uniform(std::size_t rows, std::size_t cols, double lo,
                          double hi, Rng& rng) {
        Tensor t(rows, cols);
        std::uniform_real_distribution<double> dist(lo, hi);
        for (auto& v : t.data) v = dist(rng);
        return t;
    }

    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    std::size_t numel() const { return data.size(); }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const {
        return data[r * cols() + c];
    }

    bool same_shape(const Tensor& o) const {
        return rows() == o.rows() && cols() == o.cols();
    }

    MatMap mat() { return MatMap(data.data(), rows(), cols()); }
    ConstMatMap mat() const {
        return ConstMatMap(data.data(), rows(), cols());
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_finite(const Tensor& t, const char* where) {
    if (!t.all_finite())
        throw NumericError(std::string("non-finite values in ") + where);
}

inline double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double cosine(const std::vector<double>& a,
                     const std::vector<double>& b) {
    double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

}  // namespace ornn
