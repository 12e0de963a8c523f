#pragma once

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "ornn/embeddings.hpp"
#include "ornn/tsne.hpp"

// Emoji map and lexicon expansion. Emoji vectors are L2-normalized
// before t-SNE (Euclidean on the unit sphere is monotone in cosine, the
// similarity used everywhere else). Expansion queries run in the
// original embedding space, never the 2-D projection.

namespace ornn {

struct EmojiEntry {
    std::string token;
    double x = 0.0;
    double y = 0.0;
    std::uint64_t frequency = 0;
};

using EmojiMap = std::vector<EmojiEntry>;

// Emoji tokens by descending corpus frequency, truncated to top_m.
inline std::vector<std::pair<std::string, std::uint64_t>> emoji_subset(
    const Vocabulary& vocab, std::size_t top_m) {
    std::vector<std::pair<std::string, std::uint64_t>> emojis;
    for (std::uint32_t i = 0; i < vocab.size(); ++i)
        if (token_is_emoji(vocab.token(i)))
            emojis.emplace_back(vocab.token(i), vocab.count(i));
    if (emojis.empty()) throw DataError("no emojis in vocabulary");
    std::sort(emojis.begin(), emojis.end(), [](auto& a, auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (emojis.size() > top_m) emojis.resize(top_m);
    return emojis;
}

inline EmojiMap build_emoji_map(const Vocabulary& vocab,
                                const EmbeddingMatrix& emb,
                                std::size_t top_m, const TsneConfig& cfg) {
    auto emojis = emoji_subset(vocab, top_m);
    Tensor x(emojis.size(), emb.dim());
    for (std::size_t i = 0; i < emojis.size(); ++i) {
        auto v = emb.lookup(emojis[i].first);
        double norm = 0.0;
        for (double c : v) norm += c * c;
        norm = std::sqrt(norm);
        for (std::size_t c = 0; c < emb.dim(); ++c)
            x.at(i, c) = norm > 0.0 ? v[c] / norm : 0.0;
    }
    TsneResult res = tsne(x, cfg);
    EmojiMap map;
    for (std::size_t i = 0; i < emojis.size(); ++i)
        map.push_back({emojis[i].first, res.coords.at(i, 0),
                       res.coords.at(i, 1), emojis[i].second});
    return map;
}

inline void emit_map_csv(const EmojiMap& map, const std::string& path) {
    if (map.empty()) throw DataError("refusing to write empty emoji map");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "token,x,y,frequency\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& e : map)
        out << e.token << "," << e.x << "," << e.y << "," << e.frequency
            << "\n";
}

inline EmojiMap load_map_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    EmojiMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;  // header
        std::istringstream row(line);
        EmojiEntry e;
        std::string field;
        try {
            if (!std::getline(row, e.token, ',')) throw DataError("");
            if (!std::getline(row, field, ',')) throw DataError("");
            e.x = std::stod(field);
            if (!std::getline(row, field, ',')) throw DataError("");
            e.y = std::stod(field);
            if (!std::getline(row, field)) throw DataError("");
            e.frequency = std::stoull(field);
        } catch (const std::exception&) {
            throw DataError(path + ": line " + std::to_string(line_no) +
                            ": malformed map row");
        }
        map.push_back(std::move(e));
    }
    return map;
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace detail

// Each glyph at its scaled layout position, font size grows with
// log-frequency.
inline void emit_map_svg(const EmojiMap& map, const std::string& path,
                         double size = 900.0) {
    if (map.empty()) throw DataError("refusing to write empty emoji map");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);

    double xmin = map[0].x, xmax = map[0].x, ymin = map[0].y, ymax = map[0].y;
    double fmin = map[0].frequency, fmax = map[0].frequency;
    for (const auto& e : map) {
        xmin = std::min(xmin, e.x);
        xmax = std::max(xmax, e.x);
        ymin = std::min(ymin, e.y);
        ymax = std::max(ymax, e.y);
        fmin = std::min(fmin, static_cast<double>(e.frequency));
        fmax = std::max(fmax, static_cast<double>(e.frequency));
    }
    double margin = 40.0;
    double span_x = std::max(xmax - xmin, 1e-9);
    double span_y = std::max(ymax - ymin, 1e-9);
    double log_span =
        std::max(std::log1p(fmax) - std::log1p(fmin), 1e-9);

    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
        << static_cast<int>(size) << "\" height=\""
        << static_cast<int>(size) << "\" viewBox=\"0 0 "
        << static_cast<int>(size) << " " << static_cast<int>(size)
        << "\">\n";
    out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const auto& e : map) {
        double px = margin + (e.x - xmin) / span_x * (size - 2 * margin);
        double py = margin + (e.y - ymin) / span_y * (size - 2 * margin);
        double fs = 10.0 + 18.0 *
                               (std::log1p(static_cast<double>(e.frequency)) -
                                std::log1p(fmin)) /
                               log_span;
        out << "  <text x=\"" << std::fixed << std::setprecision(2) << px
            << "\" y=\"" << py << "\" font-size=\"" << fs
            << "\" text-anchor=\"middle\">" << detail::xml_escape(e.token)
            << "</text>\n";
    }
    out << "</svg>\n";
}

struct ExpansionEntry {
    std::string token;
    double similarity = 0.0;
    bool is_emoji = false;
};

// One token per line, '#' starts a comment.
inline std::vector<std::string> load_seed_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::string> seeds;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        seeds.push_back(line.substr(b, e - b + 1));
    }
    return seeds;
}

// Union of the m nearest neighbors of each seed in embedding space,
// seeds excluded, sorted by the best similarity to any seed. OOV seeds
// are reported, not fatal, as long as one seed resolves.
inline std::vector<ExpansionEntry> expand_lexicon(
    const EmbeddingMatrix& emb, const std::vector<std::string>& seeds,
    std::size_t m, std::vector<std::string>* oov_warnings = nullptr) {
    if (seeds.empty()) return {};
    std::set<std::string> seed_set(seeds.begin(), seeds.end());
    std::vector<std::string> valid;
    for (const auto& s : seeds) {
        if (emb.id(s)) {
            valid.push_back(s);
        } else if (oov_warnings) {
            oov_warnings->push_back(s);
        }
    }
    if (valid.empty())
        throw DataError("no seed token found in the vocabulary");

    std::map<std::string, double> best;
    for (const auto& s : valid) {
        // over-fetch so dropped seed hits still leave m results
        auto nn = emb.nearest(s, m + seed_set.size());
        std::size_t taken = 0;
        for (auto& [tok, cos] : nn) {
            if (seed_set.count(tok)) continue;
            if (taken++ >= m) break;
            auto it = best.find(tok);
            if (it == best.end() || cos > it->second) best[tok] = cos;
        }
    }
    std::vector<ExpansionEntry> out;
    for (auto& [tok, cos] : best)
        out.push_back({tok, cos, token_is_emoji(tok)});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.token < b.token;
    });
    return out;
}

}  // namespace ornn
