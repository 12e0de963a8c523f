#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "ornn/ordinal.hpp"

// Evaluation metrics. Each is computed with a single final division so
// the result is the correctly rounded double of the exact rational
// value (MAE^M divides once per class, then once for the class mean,
// ascending class order).

namespace ornn {

inline double mae(const std::vector<int>& y_true,
                  const std::vector<int>& y_pred) {
    if (y_true.empty() || y_true.size() != y_pred.size())
        throw DataError("mae: empty or mismatched inputs");
    double s = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i)
        s += std::abs(y_true[i] - y_pred[i]);
    return s / static_cast<double>(y_true.size());
}

// Macro-averaged MAE over the classes present in y_true.
inline double mae_macro(const std::vector<int>& y_true,
                        const std::vector<int>& y_pred) {
    if (y_true.empty() || y_true.size() != y_pred.size())
        throw DataError("mae_macro: empty or mismatched inputs");
    std::map<int, std::pair<long long, long long>> per_class;  // sum, count
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        auto& [sum, count] = per_class[y_true[i]];
        sum += std::llabs(static_cast<long long>(y_true[i]) - y_pred[i]);
        ++count;
    }
    double acc = 0.0;
    for (auto& [cls, sc] : per_class)
        acc += static_cast<double>(sc.first) /
               static_cast<double>(sc.second);
    return acc / static_cast<double>(per_class.size());
}

// "Unlikely" (false) for ranks 1..4, "Likely" (true) for 5..k.
inline bool polarize(int y, int k = 7) {
    if (y < 1 || y > k)
        throw DataError("polarize: label " + std::to_string(y) +
                        " out of range");
    return y >= 5;
}

inline double accuracy(const std::vector<bool>& y_true,
                       const std::vector<bool>& y_pred) {
    if (y_true.empty() || y_true.size() != y_pred.size())
        throw DataError("accuracy: empty or mismatched inputs");
    double hits = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i)
        if (y_true[i] == y_pred[i]) hits += 1.0;
    return hits / static_cast<double>(y_true.size());
}

// (TP/P + TN/N) / 2, undefined when a class is absent.
inline double weighted_accuracy(const std::vector<bool>& y_true,
                                const std::vector<bool>& y_pred) {
    if (y_true.empty() || y_true.size() != y_pred.size())
        throw DataError("weighted_accuracy: empty or mismatched inputs");
    long long tp = 0, tn = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i]) {
            ++pos;
            if (y_pred[i]) ++tp;
        } else {
            ++neg;
            if (!y_pred[i]) ++tn;
        }
    }
    if (pos == 0 || neg == 0)
        throw DataError("weighted_accuracy undefined: a class is absent");
    return static_cast<double>(tp * neg + tn * pos) /
           static_cast<double>(2 * pos * neg);
}

inline double conflict_rate(const std::vector<OrdinalPrediction>& preds) {
    if (preds.empty()) throw DataError("conflict_rate: empty input");
    double c = 0.0;
    for (const auto& p : preds)
        if (p.conflict) c += 1.0;
    return c / static_cast<double>(preds.size());
}

}  // namespace ornn
