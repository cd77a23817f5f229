#pragma once

#include <vector>

#include "xdrec/mat.hpp"
#include "xdrec/model.hpp"
#include "xdrec/rng.hpp"
#include "xdrec/sequence_store.hpp"

namespace xdrec {

inline constexpr double kLayerNormEps = 1e-5;

// allow[q*m + k] = 1 when query q may attend to key k
struct AttnMask {
    int m = 0;
    std::vector<uint8_t> allow;
    bool allowed(int q, int k) const { return allow[static_cast<size_t>(q) * m + k] != 0; }
};

AttnMask causal_mask(int m);
// causal and additionally forbids PAD keys, so padding carries no signal
AttnMask causal_mask(const PaddedSequence& seq);

// E[t] = sum_h B^h[id] + P[t]; PAD rows are exactly zero.
Mat embed_sequence(const PaddedSequence& seq, const Model& model);

// Scaled dot-product attention with masking; rows whose keys are all masked
// come out zero. probs_out, when given, receives the softmax weights.
Mat attention(const Mat& Q, const Mat& K, const Mat& V, const AttnMask& mask,
              Mat* probs_out = nullptr);

// One pre-norm self-attention sublayer including the residual path:
// Z + MHA(LN1(Z)). Dropout off (inference form).
Mat mha_layer(const Mat& Z, const Model& model, int layer, const AttnMask& mask);

// Position-wise feed-forward of one encoder layer: GELU(z W1 + b1) W2 + b2.
std::vector<double> ffn_row(const Model& model, int layer, const double* z);

double gelu(double x);
double gelu_grad(double x);

// ---------------------------------------------------------------------------
// Training path: forward with recorded activations + exact backward.

struct LayerTrace {
    Mat ln1_out, ln1_xhat;
    std::vector<double> ln1_istd;
    Mat q, k, v;
    std::vector<Mat> probs;  // per head, m x m
    Mat headcat, mproj, drop1, x_mid;
    Mat ln2_out, ln2_xhat;
    std::vector<double> ln2_istd;
    Mat ffn_pre, ffn_act, ffn_out, drop2;
};

struct EncTrace {
    Mat x0;        // embeddings
    Mat drop_emb;  // dropout scales (empty in inference mode)
    Mat x_in;      // encoder input after embedding dropout
    std::vector<LayerTrace> layers;
    Mat z;  // final representation, PAD rows zeroed
    AttnMask mask;
};

// dropout_rng == nullptr (or cfg.dropout == 0) runs in inference mode.
void encode_fwd(const PaddedSequence& seq, const Model& model, Rng* dropout_rng, EncTrace& trace);

// Accumulates parameter gradients into `grad` (same layout as model.ps.w)
// given dL/dZ. PAD embedding rows never receive gradient.
void encode_bwd(const PaddedSequence& seq, const Model& model, const EncTrace& trace,
                const Mat& dz, std::vector<double>& grad);

// Inference-mode convenience wrapper.
Mat encode(const PaddedSequence& seq, const Model& model);

}  // namespace xdrec
