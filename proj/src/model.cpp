#include "xdrec/model.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "xdrec/rng.hpp"

namespace xdrec {

using nlohmann::json;

void ModelConfig::validate() const {
    if (m < 2) throw std::runtime_error("model: m must be >= 2");
    if (r < 1 || L < 0 || p < 1 || H < 1) throw std::runtime_error("model: bad dimensions");
    if (r % p != 0) throw std::runtime_error("model: r must be divisible by p");
    if (dropout < 0.0 || dropout >= 1.0) throw std::runtime_error("model: dropout in [0,1)");
    if (static_cast<int>(level_sizes.size()) != H)
        throw std::runtime_error("model: level_sizes must have H entries");
    for (int s : level_sizes)
        if (s < 1) throw std::runtime_error("model: empty vocabulary level");
}

uint64_t hash_bytes(const void* data, size_t n, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t ModelConfig::hash() const {
    int ints[5] = {m, r, L, p, H};
    uint64_t h = hash_bytes(ints, sizeof(ints));
    h = hash_bytes(&dropout, sizeof(dropout), h);
    h = hash_bytes(level_sizes.data(), level_sizes.size() * sizeof(int), h);
    return h;
}

Model Model::build(const ModelConfig& cfg, uint64_t vocab_hash) {
    cfg.validate();
    Model mo;
    mo.cfg = cfg;
    mo.vocab_hash = vocab_hash;
    for (int h = 1; h <= cfg.H; ++h)
        mo.emb.push_back(mo.ps.add("emb" + std::to_string(h), cfg.level_sizes[h - 1] + 1, cfg.r));
    mo.pos = mo.ps.add("pos", cfg.m, cfg.r);
    for (int l = 0; l < cfg.L; ++l) {
        auto tag = [l](const char* t) { return std::string("layer") + std::to_string(l) + "." + t; };
        LayerOffsets off;
        off.ln1_g = mo.ps.add(tag("ln1_g"), 1, cfg.r);
        off.ln1_b = mo.ps.add(tag("ln1_b"), 1, cfg.r);
        off.wq = mo.ps.add(tag("wq"), cfg.r, cfg.r);
        off.wk = mo.ps.add(tag("wk"), cfg.r, cfg.r);
        off.wv = mo.ps.add(tag("wv"), cfg.r, cfg.r);
        off.wf = mo.ps.add(tag("wf"), cfg.r, cfg.r);
        off.ln2_g = mo.ps.add(tag("ln2_g"), 1, cfg.r);
        off.ln2_b = mo.ps.add(tag("ln2_b"), 1, cfg.r);
        off.w1 = mo.ps.add(tag("w1"), cfg.r, cfg.r);
        off.b1 = mo.ps.add(tag("b1"), 1, cfg.r);
        off.w2 = mo.ps.add(tag("w2"), cfg.r, cfg.r);
        off.b2 = mo.ps.add(tag("b2"), 1, cfg.r);
        mo.layers.push_back(off);
    }
    for (int h = 1; h <= cfg.H; ++h) {
        auto tag = [h](const char* t) { return std::string("head") + std::to_string(h) + "." + t; };
        HeadOffsets off;
        off.w3 = mo.ps.add(tag("w3"), cfg.r, cfg.r);
        off.b3 = mo.ps.add(tag("b3"), 1, cfg.r);
        off.w4 = mo.ps.add(tag("w4"), cfg.r, cfg.r);
        off.b4 = mo.ps.add(tag("b4"), 1, cfg.r);
        mo.heads.push_back(off);
    }
    return mo;
}

void Model::init_params(uint64_t seed) {
    Rng rng(mix_seed(seed, 0x1217a7e5ULL));
    for (auto& v : ps.w) v = rng.next_trunc_normal(0.02);
    // layer norm gains to 1, shifts and biases to 0
    for (int l = 0; l < cfg.L; ++l) {
        const auto& off = layers[l];
        for (int j = 0; j < cfg.r; ++j) {
            ps.w[off.ln1_g + j] = 1.0;
            ps.w[off.ln1_b + j] = 0.0;
            ps.w[off.ln2_g + j] = 1.0;
            ps.w[off.ln2_b + j] = 0.0;
            ps.w[off.b1 + j] = 0.0;
            ps.w[off.b2 + j] = 0.0;
        }
    }
    for (int h = 1; h <= cfg.H; ++h) {
        const auto& off = heads[h - 1];
        for (int j = 0; j < cfg.r; ++j) {
            ps.w[off.b3 + j] = 0.0;
            ps.w[off.b4 + j] = 0.0;
        }
    }
    // PAD rows pinned to zero at every level
    for (int h = 1; h <= cfg.H; ++h) {
        auto v = emb_view_mut(h);
        std::memset(v.row(0), 0, sizeof(double) * cfg.r);
    }
}

namespace {
constexpr char kMagic[8] = {'X', 'D', 'R', 'E', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;
}  // namespace

void Model::save(const std::string& path, const std::string& extra_json) const {
    json header;
    header["config"] = {{"m", cfg.m},       {"r", cfg.r},
                        {"L", cfg.L},       {"p", cfg.p},
                        {"H", cfg.H},       {"dropout", cfg.dropout},
                        {"level_sizes", cfg.level_sizes}};
    header["vocab_hash"] = vocab_hash;
    header["config_hash"] = cfg.hash();
    header["extra"] = json::parse(extra_json);
    header["tensors"] = json::array();
    for (const auto& s : ps.specs)
        header["tensors"].push_back(
            {{"name", s.name}, {"offset", s.off}, {"rows", s.rows}, {"cols", s.cols}});
    std::string htxt = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kMagic, 8);
    uint32_t ver = kVersion;
    out.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
    uint64_t hlen = htxt.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htxt.data(), static_cast<std::streamsize>(htxt.size()));
    out.write(reinterpret_cast<const char*>(ps.w.data()),
              static_cast<std::streamsize>(ps.w.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

Model Model::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error(path + ": not a checkpoint file");
    uint32_t ver = 0;
    in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    if (ver != kVersion) throw std::runtime_error(path + ": unsupported checkpoint version");
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htxt(hlen, '\0');
    in.read(htxt.data(), static_cast<std::streamsize>(hlen));
    json header = json::parse(htxt);

    ModelConfig cfg;
    const auto& jc = header.at("config");
    cfg.m = jc.at("m").get<int>();
    cfg.r = jc.at("r").get<int>();
    cfg.L = jc.at("L").get<int>();
    cfg.p = jc.at("p").get<int>();
    cfg.H = jc.at("H").get<int>();
    cfg.dropout = jc.at("dropout").get<double>();
    cfg.level_sizes = jc.at("level_sizes").get<std::vector<int>>();

    Model mo = Model::build(cfg, header.at("vocab_hash").get<uint64_t>());
    if (header.at("config_hash").get<uint64_t>() != cfg.hash())
        throw std::runtime_error(path + ": config hash mismatch");
    in.read(reinterpret_cast<char*>(mo.ps.w.data()),
            static_cast<std::streamsize>(mo.ps.w.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated checkpoint");
    return mo;
}

}  // namespace xdrec
