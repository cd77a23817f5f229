#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xdrec/mat.hpp"
#include "xdrec/sequence_store.hpp"

namespace xdrec {

struct ModelConfig {
    int m = 50;      // sequence length
    int r = 128;     // embedding dimension
    int L = 2;       // attention blocks
    int p = 4;       // heads
    int H = 2;       // category levels (item level included)
    double dropout = 0.2;
    std::vector<int> level_sizes;  // |I^{.,h}| per level, PAD excluded

    void validate() const;
    uint64_t hash() const;
};

struct LayerOffsets {
    size_t ln1_g, ln1_b;
    size_t wq, wk, wv, wf;  // r x r each; head i owns columns [i*r/p, (i+1)*r/p)
    size_t ln2_g, ln2_b;
    size_t w1, b1, w2, b2;  // position-wise FFN, r -> r -> r
};

struct HeadOffsets {
    size_t w3, b3, w4, b4;  // per-level prediction FFN, r -> r -> r
};

// All trainable tensors live in one flat buffer; gradients and optimizer
// state are parallel vectors of the same length.
struct Model {
    ModelConfig cfg;
    ParamStore ps;
    std::vector<size_t> emb;  // per level: (level_sizes[h]+1) x r, row 0 = PAD (pinned zero)
    size_t pos = 0;           // m x r
    std::vector<LayerOffsets> layers;
    std::vector<HeadOffsets> heads;
    uint64_t vocab_hash = 0;

    static Model build(const ModelConfig& cfg, uint64_t vocab_hash);
    void init_params(uint64_t seed);  // truncated normal, std 0.02

    ConstMatView emb_view(int h) const {
        return ps.view(emb[h - 1], cfg.level_sizes[h - 1] + 1, cfg.r);
    }
    MatView emb_view_mut(int h) {
        return ps.view(emb[h - 1], cfg.level_sizes[h - 1] + 1, cfg.r);
    }
    ConstMatView pos_view() const { return ps.view(pos, cfg.m, cfg.r); }

    size_t param_count() const { return ps.w.size(); }

    void save(const std::string& path, const std::string& extra_json = "{}") const;
    static Model load(const std::string& path);
};

uint64_t hash_bytes(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace xdrec
