#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <variant>

#include "ornn/common.hpp"

// Every tunable in one flat struct, serialized as key=value text. CLI
// flags override file values which override defaults; each run writes
// its resolved config next to its outputs.

namespace ornn {

struct RunConfig {
    // ordinal task
    int k = 7;
    double lambda = 0.5;  // order penalty weight
    std::string head = "ordinal";

    // encoder
    std::string cell = "gfrnn";
    int layers = 3;
    int hidden = 128;
    double dropout = 0.2;
    bool residual = true;
    bool batch_norm = true;

    // optimization (base lr is not pinned by the appendix; exposed here)
    double lr = 0.01;
    double grad_clip = 0.25;
    double l2 = 1e-5;
    double lr_decay = 2.0;
    int decay_patience = 3;
    int early_stop = 9;
    int batch = 200;
    int max_epochs = 100;
    int max_len = 120;

    // embeddings
    int emb_dim = 128;
    int window = 5;
    int negatives = 100;
    int emb_epochs = 50;
    double emb_lr = 0.2;
    int emb_batch = 16;
    double fine_tune_scale = 1.0;
    int min_count = 5;

    std::uint64_t seed = 1;
    int threads = 1;
};

namespace detail {

using ConfigField =
    std::variant<int RunConfig::*, double RunConfig::*, bool RunConfig::*,
                 std::string RunConfig::*, std::uint64_t RunConfig::*>;

inline const std::map<std::string, ConfigField>& config_fields() {
    static const std::map<std::string, ConfigField> fields = {
        {"k", &RunConfig::k},
        {"lambda", &RunConfig::lambda},
        {"head", &RunConfig::head},
        {"cell", &RunConfig::cell},
        {"layers", &RunConfig::layers},
        {"hidden", &RunConfig::hidden},
        {"dropout", &RunConfig::dropout},
        {"residual", &RunConfig::residual},
        {"batch_norm", &RunConfig::batch_norm},
        {"lr", &RunConfig::lr},
        {"grad_clip", &RunConfig::grad_clip},
        {"l2", &RunConfig::l2},
        {"lr_decay", &RunConfig::lr_decay},
        {"decay_patience", &RunConfig::decay_patience},
        {"early_stop", &RunConfig::early_stop},
        {"batch", &RunConfig::batch},
        {"max_epochs", &RunConfig::max_epochs},
        {"max_len", &RunConfig::max_len},
        {"emb_dim", &RunConfig::emb_dim},
        {"window", &RunConfig::window},
        {"negatives", &RunConfig::negatives},
        {"emb_epochs", &RunConfig::emb_epochs},
        {"emb_lr", &RunConfig::emb_lr},
        {"emb_batch", &RunConfig::emb_batch},
        {"fine_tune_scale", &RunConfig::fine_tune_scale},
        {"min_count", &RunConfig::min_count},
        {"seed", &RunConfig::seed},
        {"threads", &RunConfig::threads},
    };
    return fields;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw UsageError("config key " + key + ": expected boolean, got " + v);
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key,
                               const std::string& value) {
    auto it = detail::config_fields().find(key);
    if (it == detail::config_fields().end())
        throw UsageError("unknown config key: " + key);
    try {
        std::visit(
            [&](auto member) {
                using T = std::remove_reference_t<decltype(cfg.*member)>;
                if constexpr (std::is_same_v<T, int>)
                    cfg.*member = std::stoi(value);
                else if constexpr (std::is_same_v<T, double>)
                    cfg.*member = std::stod(value);
                else if constexpr (std::is_same_v<T, bool>)
                    cfg.*member = detail::parse_bool(value, key);
                else if constexpr (std::is_same_v<T, std::uint64_t>)
                    cfg.*member = std::stoull(value);
                else
                    cfg.*member = value;
            },
            it->second);
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception&) {
        throw UsageError("config key " + key + ": cannot parse value " +
                         value);
    }
}

inline std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& [key, field] : detail::config_fields()) {
        out << key << "=";
        std::visit(
            [&](auto member) {
                using T = std::remove_reference_t<decltype(cfg.*member)>;
                if constexpr (std::is_same_v<T, bool>)
                    out << (cfg.*member ? "true" : "false");
                else
                    out << cfg.*member;
            },
            field);
        out << "\n";
    }
    return out.str();
}

inline RunConfig parse_config_text(const std::string& text,
                                   RunConfig base = {}) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(line_no) +
                             ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            auto b = s.find_first_not_of(" \t");
            auto e = s.find_last_not_of(" \t");
            s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
        };
        trim(key);
        trim(value);
        apply_config_entry(base, key, value);
    }
    return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), base);
}

inline void write_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config " + path);
    out << serialize_config(cfg);
}

}  // namespace ornn
