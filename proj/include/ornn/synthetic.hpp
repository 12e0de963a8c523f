#pragma once

#include <string>
#include <vector>

#include "ornn/corpus.hpp"

// Synthetic ordinal ad generator so the whole pipeline can be exercised
// without restricted data. A document draws a latent intensity u; tokens
// are signal keywords with probability proportional to u, and the label
// buckets the noisy keyword count. High-intensity documents also carry
// "flag" emojis, low-intensity ones neutral emojis, which gives the
// emoji map something real to show.

namespace ornn {

struct SyntheticConfig {
    std::size_t n_labeled = 5000;
    std::size_t n_raw = 10000;
    int k = 7;
    std::size_t n_fillers = 40;
    std::size_t n_keywords = 10;
    std::size_t min_len = 8;
    std::size_t max_len = 24;
    double label_noise = 0.75;  // stddev of the additive count noise
    std::uint64_t seed = 1;
};

struct SyntheticData {
    std::vector<RawDocument> labeled;
    std::vector<RawDocument> raw;
};

namespace synth {

// flag emojis ride with high-intensity docs: cherries, lollipop,
// strawberry, grapes, candy
inline const std::vector<std::string>& flag_emojis() {
    static const std::vector<std::string> e = {
        "\xF0\x9F\x8D\x92", "\xF0\x9F\x8D\xAD", "\xF0\x9F\x8D\x93",
        "\xF0\x9F\x8D\x87", "\xF0\x9F\x8D\xAC"};
    return e;
}

// neutral emojis: sparkles, rose, fire, telephone, droplets, kiss mark
inline const std::vector<std::string>& neutral_emojis() {
    static const std::vector<std::string> e = {
        "\xE2\x9C\xA8",     "\xF0\x9F\x8C\xB9", "\xF0\x9F\x94\xA5",
        "\xF0\x9F\x93\x9E", "\xF0\x9F\x92\xA6", "\xF0\x9F\x92\x8B"};
    return e;
}

inline std::string filler_token(std::size_t i) {
    std::string n = std::to_string(i);
    return "w" + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n;
}

inline std::string keyword_token(std::size_t i) {
    std::string n = std::to_string(i);
    return "kw" + std::string(n.size() < 2 ? 2 - n.size() : 0, '0') + n;
}

}  // namespace synth

inline RawDocument synth_document(const SyntheticConfig& cfg, Rng& rng,
                                  bool labeled) {
    double u = uniform(rng, 0.0, 1.0);
    std::size_t len =
        cfg.min_len + rng() % (cfg.max_len - cfg.min_len + 1);
    double p_signal = 0.45 * u;

    std::vector<std::string> tokens;
    std::size_t signal_count = 0;
    for (std::size_t t = 0; t < len; ++t) {
        if (uniform(rng, 0.0, 1.0) < p_signal) {
            tokens.push_back(synth::keyword_token(rng() % cfg.n_keywords));
            ++signal_count;
        } else {
            tokens.push_back(synth::filler_token(rng() % cfg.n_fillers));
        }
    }
    if (uniform(rng, 0.0, 1.0) < 0.35) {
        const auto& pool =
            u > 0.6 ? synth::flag_emojis() : synth::neutral_emojis();
        tokens.push_back(pool[rng() % pool.size()]);
        if (uniform(rng, 0.0, 1.0) < 0.4)
            tokens.push_back(pool[rng() % pool.size()]);
    }

    RawDocument doc;
    std::size_t title_len = std::min<std::size_t>(3, tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::string& dst = i < title_len ? doc.title : doc.body;
        if (!dst.empty()) dst += ' ';
        dst += tokens[i];
    }

    if (labeled) {
        std::normal_distribution<double> noise(0.0, cfg.label_noise);
        double z = static_cast<double>(signal_count) + noise(rng);
        int label = 1 + static_cast<int>(std::floor(z / 1.2));
        doc.label = std::clamp(label, 1, cfg.k);
    }
    return doc;
}

inline SyntheticData gen_synthetic(const SyntheticConfig& cfg) {
    SyntheticData data;
    Rng rng(cfg.seed);
    data.labeled.reserve(cfg.n_labeled);
    for (std::size_t i = 0; i < cfg.n_labeled; ++i)
        data.labeled.push_back(synth_document(cfg, rng, true));
    data.raw.reserve(cfg.n_raw);
    for (std::size_t i = 0; i < cfg.n_raw; ++i)
        data.raw.push_back(synth_document(cfg, rng, false));
    return data;
}

// Two disjoint token cliques; tokens co-occur only within their clique.
// Sentence s draws every token from clique (s % 2).
inline std::vector<std::string> two_clique_texts(std::size_t n_sentences,
                                                 std::size_t sent_len,
                                                 std::size_t clique_size,
                                                 std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> texts;
    texts.reserve(n_sentences);
    for (std::size_t s = 0; s < n_sentences; ++s) {
        char prefix = (s % 2 == 0) ? 'a' : 'b';
        std::string text;
        for (std::size_t t = 0; t < sent_len; ++t) {
            text += prefix;
            text += std::to_string(rng() % clique_size);
            text += ' ';
        }
        if (!text.empty()) text.pop_back();
        texts.push_back(std::move(text));
    }
    return texts;
}

}  // namespace ornn
