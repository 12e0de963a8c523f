#pragma once

#include <cmath>
#include <map>
#include <unordered_map>
#include <vector>

#include "ornn/corpus.hpp"

// Unigram TF-IDF: sublinear term frequency, smooth inverse document
// frequency, L2-normalized rows:
//   weight(t, d) = (1 + ln tf) * (ln((1 + N) / (1 + df)) + 1)

namespace ornn {

struct SparseVector {
    // (feature, weight), strictly increasing feature index
    std::vector<std::pair<std::uint32_t, double>> entries;

    double dot_dense(const std::vector<double>& w) const {
        double s = 0.0;
        for (auto& [i, v] : entries) s += w[i] * v;
        return s;
    }

    void axpy_into(double alpha, std::vector<double>& w) const {
        for (auto& [i, v] : entries) w[i] += alpha * v;
    }

    double norm() const {
        double s = 0.0;
        for (auto& [i, v] : entries) s += v * v;
        return std::sqrt(s);
    }
};

class TfidfVectorizer {
public:
    void fit(const std::vector<const TokenSequence*>& docs) {
        feature_of_.clear();
        idf_.clear();
        std::map<std::uint32_t, std::uint64_t> df;  // ordered, stable ids
        for (const auto* d : docs) {
            std::vector<std::uint32_t> uniq = d->tokens;
            std::sort(uniq.begin(), uniq.end());
            uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
            for (auto t : uniq) ++df[t];
        }
        if (df.empty()) throw DataError("TF-IDF fit on empty vocabulary");
        double n = static_cast<double>(docs.size());
        for (auto& [term, count] : df) {
            feature_of_[term] =
                static_cast<std::uint32_t>(idf_.size());
            idf_.push_back(std::log((1.0 + n) / (1.0 + count)) + 1.0);
        }
    }

    std::size_t dim() const { return idf_.size(); }

    SparseVector transform(const TokenSequence& doc) const {
        std::map<std::uint32_t, std::uint64_t> tf;  // feature -> count
        for (auto t : doc.tokens) {
            auto it = feature_of_.find(t);
            if (it != feature_of_.end()) ++tf[it->second];
        }
        SparseVector out;
        out.entries.reserve(tf.size());
        for (auto& [f, count] : tf) {
            double w = (1.0 + std::log(static_cast<double>(count))) *
                       idf_[f];
            out.entries.emplace_back(f, w);
        }
        double n = out.norm();
        if (n > 0.0)
            for (auto& [f, v] : out.entries) v /= n;
        return out;
    }

    std::vector<SparseVector> fit_transform(
        const std::vector<const TokenSequence*>& docs) {
        fit(docs);
        std::vector<SparseVector> out;
        out.reserve(docs.size());
        for (const auto* d : docs) out.push_back(transform(*d));
        return out;
    }

    const std::vector<double>& idf() const { return idf_; }

private:
    std::unordered_map<std::uint32_t, std::uint32_t> feature_of_;
    std::vector<double> idf_;
};

}  // namespace ornn
