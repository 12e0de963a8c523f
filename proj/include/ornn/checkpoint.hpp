#pragma once

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "ornn/model.hpp"

// Single-file binary checkpoint: magic + version, then length-prefixed
// named sections (config text, vocabulary, parameter tensors, batch-norm
// state, training metadata). Everything is little-endian.

namespace ornn {

namespace ckpt {

constexpr char kMagic[8] = {'O', 'R', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

inline void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

inline void put_tensor(std::string& out, const Tensor& t) {
    put_u64(out, t.rows());
    put_u64(out, t.cols());
    for (double v : t.data) put_f64(out, v);
}

class Reader {
public:
    Reader(const std::string& buf, const std::string& context)
        : buf_(buf), ctx_(context) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(
                     static_cast<unsigned char>(buf_[pos_ + i]))
                 << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(
                     static_cast<unsigned char>(buf_[pos_ + i]))
                 << (8 * i);
        pos_ += 8;
        return v;
    }

    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::string str() {
        std::uint32_t n = u32();
        return bytes(n);
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    unsigned char byte() {
        need(1);
        return static_cast<unsigned char>(buf_[pos_++]);
    }

    Tensor tensor() {
        std::uint64_t r = u64(), c = u64();
        Tensor t(r, c);
        for (auto& v : t.data) v = f64();
        return t;
    }

    bool done() const { return pos_ >= buf_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > buf_.size())
            throw DataError(ctx_ + ": truncated checkpoint");
    }
    const std::string& buf_;
    std::string ctx_;
    std::size_t pos_ = 0;
};

}  // namespace ckpt

inline void save_checkpoint(const std::string& path, OrdinalModel& model) {
    std::string body;

    auto section = [&](const std::string& name, const std::string& payload) {
        ckpt::put_str(body, name);
        ckpt::put_u64(body, payload.size());
        body.append(payload);
    };

    section("config", serialize_config(model.config()));

    {
        std::string s;
        const Vocabulary& v = model.vocab();
        ckpt::put_u64(s, v.size());
        for (std::uint32_t i = 0; i < v.size(); ++i) {
            ckpt::put_str(s, v.token(i));
            ckpt::put_u64(s, v.count(i));
        }
        ckpt::put_u64(s, v.min_count());
        ckpt::put_f64(s, v.unigram_pow);
        section("vocab", s);
    }

    {
        std::string s;
        auto params = model.named_parameters();
        ckpt::put_u32(s, static_cast<std::uint32_t>(params.size()));
        for (auto& [name, node] : params) {
            ckpt::put_str(s, name);
            ckpt::put_tensor(s, node->value);
        }
        section("params", s);
    }

    {
        std::string s;
        const BatchNormState& bn = model.encoder().bn_state();
        s.push_back(bn.initialized ? 1 : 0);
        if (bn.initialized) {
            ckpt::put_tensor(s, bn.running_mean);
            ckpt::put_tensor(s, bn.running_var);
        }
        ckpt::put_f64(s, bn.momentum);
        ckpt::put_f64(s, bn.eps);
        section("bn", s);
    }

    {
        std::string s;
        auto meta = model.meta();
        ckpt::put_u32(s, static_cast<std::uint32_t>(meta.epochs_run));
        ckpt::put_f64(s, meta.best_val_loss);
        ckpt::put_u64(s, meta.seed);
        section("meta", s);
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out.write(ckpt::kMagic, 8);
    std::string ver;
    ckpt::put_u32(ver, ckpt::kVersion);
    out.write(ver.data(), ver.size());
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
}

inline OrdinalModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string buf = ss.str();
    if (buf.size() < 12 || std::memcmp(buf.data(), ckpt::kMagic, 8) != 0)
        throw DataError(path + ": not a checkpoint file");
    std::string rest = buf.substr(8);  // past the magic
    ckpt::Reader r(rest, path);
    std::uint32_t version = r.u32();
    if (version != ckpt::kVersion)
        throw DataError(path + ": unsupported checkpoint version " +
                        std::to_string(version));

    std::unordered_map<std::string, std::string> sections;
    while (!r.done()) {
        std::string name = r.str();
        std::uint64_t len = r.u64();
        sections[name] = r.bytes(len);
    }

    auto need = [&](const std::string& name) -> const std::string& {
        auto it = sections.find(name);
        if (it == sections.end())
            throw DataError(path + ": missing checkpoint section " + name);
        return it->second;
    };

    RunConfig cfg = parse_config_text(need("config"));

    Vocabulary vocab = [&] {
        ckpt::Reader vr(need("vocab"), path + ":vocab");
        std::uint64_t n = vr.u64();
        std::vector<std::string> tokens;
        std::vector<std::uint64_t> counts;
        tokens.reserve(n);
        counts.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            tokens.push_back(vr.str());
            counts.push_back(vr.u64());
        }
        std::uint64_t min_count = vr.u64();
        double pow = vr.f64();
        return Vocabulary::from_ordered(std::move(tokens), std::move(counts),
                                        min_count, pow);
    }();

    OrdinalModel model(cfg, std::move(vocab));

    {
        ckpt::Reader pr(need("params"), path + ":params");
        std::uint32_t count = pr.u32();
        std::unordered_map<std::string, Tensor> loaded;
        for (std::uint32_t i = 0; i < count; ++i) {
            std::string name = pr.str();
            loaded[name] = pr.tensor();
        }
        for (auto& [name, node] : model.named_parameters()) {
            auto it = loaded.find(name);
            if (it == loaded.end())
                throw DataError(path + ": missing parameter " + name);
            if (!node->value.same_shape(it->second))
                throw DataError(path + ": shape mismatch for " + name);
            node->value = std::move(it->second);
        }
    }

    {
        ckpt::Reader br(need("bn"), path + ":bn");
        BatchNormState& bn = model.encoder().bn_state();
        bn.initialized = br.byte() != 0;
        if (bn.initialized) {
            bn.running_mean = br.tensor();
            bn.running_var = br.tensor();
        }
        bn.momentum = br.f64();
        bn.eps = br.f64();
    }

    {
        ckpt::Reader mr(need("meta"), path + ":meta");
        int epochs = static_cast<int>(mr.u32());
        double best = mr.f64();
        mr.u64();  // seed already part of config
        model.set_report(epochs, best);
    }

    return model;
}

}  // namespace ornn
