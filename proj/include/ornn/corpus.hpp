#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ornn/common.hpp"
#include "ornn/text.hpp"

namespace ornn {

struct RawDocument {
    std::string title;
    std::string body;
    std::optional<int> label;  // 1..k when present
};

struct TokenSequence {
    std::vector<std::uint32_t> tokens;
    std::optional<int> label;
    bool truncated = false;
};

// k-1 staircase bits: (1,...,1,0,...,0) with label-1 leading ones.
struct MultiLabelTarget {
    std::vector<double> bits;
};

inline MultiLabelTarget encode_label(int y, int k) {
    if (y < 1 || y > k)
        throw DataError("label " + std::to_string(y) + " outside [1, " +
                        std::to_string(k) + "]");
    MultiLabelTarget t;
    t.bits.resize(k - 1);
    for (int i = 1; i < k; ++i) t.bits[i - 1] = (y > i) ? 1.0 : 0.0;
    return t;
}

inline int decode_staircase(const MultiLabelTarget& t) {
    int y = 1;
    for (double b : t.bits) y += (b >= 0.5) ? 1 : 0;
    return y;
}

class Vocabulary {
public:
    double unigram_pow = 0.75;

    static Vocabulary build(const std::vector<std::string>& corpus,
                            std::uint64_t min_count,
                            double unigram_pow = 0.75) {
        std::unordered_map<std::string, std::uint64_t> counts;
        for (const auto& text : corpus)
            for (auto& tok : split_whitespace(text)) ++counts[tok];
        return from_counts(counts, min_count, unigram_pow);
    }

    static Vocabulary from_counts(
        const std::unordered_map<std::string, std::uint64_t>& counts,
        std::uint64_t min_count, double unigram_pow = 0.75) {
        Vocabulary v;
        v.min_count_ = min_count;
        v.unigram_pow = unigram_pow;
        std::vector<std::pair<std::string, std::uint64_t>> kept;
        for (const auto& [tok, c] : counts)
            if (c >= min_count) kept.emplace_back(tok, c);
        if (kept.empty())
            throw DataError("empty vocabulary: no token met min_count " +
                            std::to_string(min_count));
        // deterministic ids: by descending count, ties lexicographic
        std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        for (auto& [tok, c] : kept) {
            v.id_of_[tok] = static_cast<std::uint32_t>(v.tokens_.size());
            v.tokens_.push_back(tok);
            v.counts_.push_back(c);
        }
        v.rebuild_noise();
        return v;
    }

    // ordered (token, count) pairs, e.g. from a checkpoint
    static Vocabulary from_ordered(std::vector<std::string> tokens,
                                   std::vector<std::uint64_t> counts,
                                   std::uint64_t min_count,
                                   double unigram_pow = 0.75) {
        if (tokens.empty()) throw DataError("empty vocabulary");
        Vocabulary v;
        v.min_count_ = min_count;
        v.unigram_pow = unigram_pow;
        v.tokens_ = std::move(tokens);
        v.counts_ = std::move(counts);
        for (std::size_t i = 0; i < v.tokens_.size(); ++i)
            v.id_of_[v.tokens_[i]] = static_cast<std::uint32_t>(i);
        v.rebuild_noise();
        return v;
    }

    std::size_t size() const { return tokens_.size(); }
    std::uint64_t min_count() const { return min_count_; }

    std::optional<std::uint32_t> id(const std::string& token) const {
        auto it = id_of_.find(token);
        if (it == id_of_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& token(std::uint32_t id) const { return tokens_[id]; }
    std::uint64_t count(std::uint32_t id) const { return counts_[id]; }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }

    // unigram^unigram_pow, normalized
    const std::vector<double>& noise_distribution() const { return noise_; }

    // inverse-CDF sample from the noise distribution
    std::uint32_t sample_noise(Rng& rng) const {
        double u = uniform(rng, 0.0, 1.0);
        auto it = std::upper_bound(noise_cdf_.begin(), noise_cdf_.end(), u);
        std::size_t idx = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(it - noise_cdf_.begin(),
                                     noise_cdf_.size() - 1));
        return static_cast<std::uint32_t>(idx);
    }

private:
    void rebuild_noise() {
        noise_.resize(counts_.size());
        double z = 0.0;
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            noise_[i] = std::pow(static_cast<double>(counts_[i]),
                                 unigram_pow);
            z += noise_[i];
        }
        noise_cdf_.resize(noise_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < noise_.size(); ++i) {
            noise_[i] /= z;
            acc += noise_[i];
            noise_cdf_[i] = acc;
        }
        if (!noise_cdf_.empty()) noise_cdf_.back() = 1.0;
    }

    std::unordered_map<std::string, std::uint32_t> id_of_;
    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> counts_;
    std::vector<double> noise_;
    std::vector<double> noise_cdf_;
    std::uint64_t min_count_ = 1;
};

inline std::string clean(const RawDocument& doc) {
    return clean_text(doc.title + " " + doc.body);
}

// Whitespace split over cleaned text; OOV tokens dropped, prefix kept on
// truncation.
inline TokenSequence tokenize(const std::string& cleaned,
                              const Vocabulary& vocab,
                              std::size_t max_input_length = 120) {
    TokenSequence seq;
    for (auto& tok : split_whitespace(cleaned)) {
        auto id = vocab.id(tok);
        if (!id) continue;
        if (seq.tokens.size() == max_input_length) {
            seq.truncated = true;
            break;
        }
        seq.tokens.push_back(*id);
    }
    return seq;
}

namespace detail {

inline std::optional<int> parse_label_field(const nlohmann::json& rec,
                                            int k, std::size_t line_no) {
    if (!rec.contains("label") || rec["label"].is_null())
        return std::nullopt;
    const auto& l = rec["label"];
    double v;
    if (l.is_number()) {
        v = l.get<double>();
    } else if (l.is_string()) {
        try {
            v = std::stod(l.get<std::string>());
        } catch (const std::exception&) {
            throw DataError("line " + std::to_string(line_no) +
                            ": label is not a number");
        }
    } else {
        throw DataError("line " + std::to_string(line_no) +
                        ": label is not a number");
    }
    int iv = static_cast<int>(std::llround(v));
    if (v != static_cast<double>(iv) || iv < 1 || iv > k)
        throw DataError("line " + std::to_string(line_no) + ": label " +
                        std::to_string(v) + " out of range [1, " +
                        std::to_string(k) + "]");
    return iv;
}

// RFC 4180 style: quoted fields, doubled quotes, newlines inside quotes.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false, row_started = false;
    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                row_started = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                row_started = true;
                break;
            case '\r':
                break;
            case '\n':
                if (row_started || !field.empty()) {
                    row.push_back(std::move(field));
                    field.clear();
                    rows.push_back(std::move(row));
                    row.clear();
                }
                row_started = false;
                break;
            default:
                field.push_back(c);
                row_started = true;
        }
    }
    if (row_started || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detail

// Token-count sidecar ("token<TAB>count" per line) so frequency-aware
// consumers can rebuild a Vocabulary from saved embeddings.
inline void save_vocab_counts(const std::string& path,
                              const Vocabulary& vocab) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << vocab.min_count() << "\t" << vocab.unigram_pow << "\n";
    for (std::size_t i = 0; i < vocab.size(); ++i)
        out << vocab.token(static_cast<std::uint32_t>(i)) << "\t"
            << vocab.count(static_cast<std::uint32_t>(i)) << "\n";
}

inline Vocabulary load_vocab_counts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty vocab file");
    std::istringstream head(line);
    std::uint64_t min_count;
    double unigram_pow;
    if (!(head >> min_count >> unigram_pow))
        throw DataError(path + ": malformed vocab header");
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> counts;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError(path + ": line " + std::to_string(line_no) +
                            ": expected token<TAB>count");
        tokens.push_back(line.substr(0, tab));
        try {
            counts.push_back(std::stoull(line.substr(tab + 1)));
        } catch (const std::exception&) {
            throw DataError(path + ": line " + std::to_string(line_no) +
                            ": bad count");
        }
    }
    return Vocabulary::from_ordered(std::move(tokens), std::move(counts),
                                    min_count, unigram_pow);
}

enum class DatasetFormat { Jsonl, Csv };

inline DatasetFormat format_from_name(const std::string& name) {
    if (name == "jsonl") return DatasetFormat::Jsonl;
    if (name == "csv") return DatasetFormat::Csv;
    throw UsageError("unknown dataset format: " + name);
}

// One RawDocument per record; labels validated against k; records with
// both title and body empty are rejected.
inline std::vector<RawDocument> load_dataset(const std::string& path,
                                             DatasetFormat format,
                                             int k = 7) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<RawDocument> docs;

    if (format == DatasetFormat::Jsonl) {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json rec;
            try {
                rec = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw DataError("line " + std::to_string(line_no) +
                                ": JSON parse error: " + e.what());
            }
            RawDocument doc;
            doc.title = rec.value("title", std::string());
            doc.body = rec.value("body", std::string());
            if (doc.title.empty() && doc.body.empty())
                throw DataError("line " + std::to_string(line_no) +
                                ": both title and body empty");
            doc.label = detail::parse_label_field(rec, k, line_no);
            docs.push_back(std::move(doc));
        }
    } else {
        auto rows = detail::parse_csv(in);
        if (rows.empty()) return docs;
        const auto& header = rows[0];
        auto col = [&](const std::string& name) -> std::ptrdiff_t {
            for (std::size_t i = 0; i < header.size(); ++i)
                if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
            return -1;
        };
        std::ptrdiff_t ti = col("title"), bi = col("body"), li = col("label");
        if (ti < 0 || bi < 0)
            throw DataError(path + ": CSV header must name title and body");
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& row = rows[r];
            auto get = [&](std::ptrdiff_t i) {
                return (i >= 0 && static_cast<std::size_t>(i) < row.size())
                           ? row[i]
                           : std::string();
            };
            RawDocument doc;
            doc.title = get(ti);
            doc.body = get(bi);
            if (doc.title.empty() && doc.body.empty())
                throw DataError("line " + std::to_string(r + 1) +
                                ": both title and body empty");
            std::string label = get(li);
            if (!label.empty()) {
                nlohmann::json rec;
                rec["label"] = label;
                doc.label = detail::parse_label_field(rec, k, r + 1);
            }
            docs.push_back(std::move(doc));
        }
    }
    return docs;
}

}  // namespace ornn
