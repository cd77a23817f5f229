#include "xdrec/encoder.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace xdrec {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
    double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;
    return cdf + x * pdf;
}

AttnMask causal_mask(int m) {
    AttnMask mk;
    mk.m = m;
    mk.allow.assign(static_cast<size_t>(m) * m, 0);
    for (int q = 0; q < m; ++q)
        for (int k = 0; k <= q; ++k) mk.allow[static_cast<size_t>(q) * m + k] = 1;
    return mk;
}

AttnMask causal_mask(const PaddedSequence& seq) {
    AttnMask mk;
    mk.m = seq.m;
    mk.allow.assign(static_cast<size_t>(seq.m) * seq.m, 0);
    for (int q = 0; q < seq.m; ++q)
        for (int k = 0; k <= q; ++k)
            if (!seq.pad[k]) mk.allow[static_cast<size_t>(q) * seq.m + k] = 1;
    return mk;
}

Mat embed_sequence(const PaddedSequence& seq, const Model& model) {
    const auto& cfg = model.cfg;
    if (seq.m != cfg.m) throw std::runtime_error("embed: sequence length != model m");
    if (seq.H != cfg.H) throw std::runtime_error("embed: hierarchy depth != model H");
    Mat e(cfg.m, cfg.r);
    auto pv = model.pos_view();
    for (int t = 0; t < cfg.m; ++t) {
        if (seq.pad[t]) continue;  // PAD rows stay zero, position included
        double* row = e.row(t);
        for (int h = 1; h <= cfg.H; ++h) {
            int id = seq.id(t, h);
            auto bv = model.emb_view(h);
            if (id < 0 || id >= bv.rows)
                throw std::runtime_error("embed: id out of range at level " + std::to_string(h));
            axpy(1.0, bv.row(id), row, cfg.r);
        }
        axpy(1.0, pv.row(t), row, cfg.r);
    }
    return e;
}

Mat attention(const Mat& Q, const Mat& K, const Mat& V, const AttnMask& mask, Mat* probs_out) {
    const int m = Q.rows;
    const int d = Q.cols;
    if (K.rows != m || V.rows != m || K.cols != d || mask.m != m)
        throw std::runtime_error("attention: shape mismatch");
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    Mat out(m, V.cols);
    Mat probs(m, m);
    std::vector<double> logits(m);
    for (int q = 0; q < m; ++q) {
        double mx = -1e300;
        for (int k = 0; k <= q && k < m; ++k) {
            if (!mask.allowed(q, k)) continue;
            logits[k] = dot(Q.row(q), K.row(k), d) * scale;
            if (logits[k] > mx) mx = logits[k];
        }
        if (mx == -1e300) continue;  // fully masked row: zero output
        double z = 0.0;
        for (int k = 0; k <= q; ++k) {
            if (!mask.allowed(q, k)) continue;
            double e = std::exp(logits[k] - mx);
            probs.at(q, k) = e;
            z += e;
        }
        double* orow = out.row(q);
        for (int k = 0; k <= q; ++k) {
            if (!mask.allowed(q, k)) continue;
            double w = probs.at(q, k) / z;
            probs.at(q, k) = w;
            axpy(w, V.row(k), orow, V.cols);
        }
    }
    if (probs_out) *probs_out = std::move(probs);
    return out;
}

namespace {

void layer_norm_fwd(const Mat& x, const double* g, const double* b, Mat& out, Mat& xhat,
                    std::vector<double>& istd) {
    const int m = x.rows, r = x.cols;
    out.resize(m, r);
    xhat.resize(m, r);
    istd.assign(m, 0.0);
    for (int t = 0; t < m; ++t) {
        const double* xr = x.row(t);
        double mu = 0.0;
        for (int j = 0; j < r; ++j) mu += xr[j];
        mu /= r;
        double var = 0.0;
        for (int j = 0; j < r; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= r;
        double is = 1.0 / std::sqrt(var + kLayerNormEps);
        istd[t] = is;
        double* xh = xhat.row(t);
        double* o = out.row(t);
        for (int j = 0; j < r; ++j) {
            xh[j] = (xr[j] - mu) * is;
            o[j] = g[j] * xh[j] + b[j];
        }
    }
}

// dx from dy using cached xhat/istd; accumulates dg, db
void layer_norm_bwd(const Mat& dy, const Mat& xhat, const std::vector<double>& istd,
                    const double* g, Mat& dx, double* dg, double* db) {
    const int m = dy.rows, r = dy.cols;
    dx.resize(m, r);
    std::vector<double> dxh(r);
    for (int t = 0; t < m; ++t) {
        const double* dyr = dy.row(t);
        const double* xh = xhat.row(t);
        double s1 = 0.0, s2 = 0.0;
        for (int j = 0; j < r; ++j) {
            dxh[j] = dyr[j] * g[j];
            s1 += dxh[j];
            s2 += dxh[j] * xh[j];
            dg[j] += dyr[j] * xh[j];
            db[j] += dyr[j];
        }
        s1 /= r;
        s2 /= r;
        double* dxr = dx.row(t);
        const double is = istd[t];
        for (int j = 0; j < r; ++j) dxr[j] = is * (dxh[j] - s1 - xh[j] * s2);
    }
}

void dropout_fwd(Mat& x, double rate, Rng* rng, Mat& scales) {
    const int m = x.rows, r = x.cols;
    if (rng == nullptr || rate <= 0.0) {
        scales.resize(0, 0);
        return;
    }
    scales.resize(m, r);
    const double keep = 1.0 - rate;
    const double inv = 1.0 / keep;
    for (size_t i = 0; i < x.a.size(); ++i) {
        double s = rng->next_unit() < keep ? inv : 0.0;
        scales.a[i] = s;
        x.a[i] *= s;
    }
}

inline void apply_scales(Mat& g, const Mat& scales) {
    if (scales.rows == 0) return;
    for (size_t i = 0; i < g.a.size(); ++i) g.a[i] *= scales.a[i];
}

}  // namespace

Mat mha_layer(const Mat& Z, const Model& model, int layer, const AttnMask& mask) {
    const auto& cfg = model.cfg;
    const auto& off = model.layers[layer];
    const int m = Z.rows, r = cfg.r, p = cfg.p, hd = r / p;

    Mat a, xhat;
    std::vector<double> istd;
    layer_norm_fwd(Z, &model.ps.w[off.ln1_g], &model.ps.w[off.ln1_b], a, xhat, istd);

    Mat q(m, r), k(m, r), v(m, r);
    matmul(a.a.data(), m, r, &model.ps.w[off.wq], r, q.a.data());
    matmul(a.a.data(), m, r, &model.ps.w[off.wk], r, k.a.data());
    matmul(a.a.data(), m, r, &model.ps.w[off.wv], r, v.a.data());

    Mat headcat(m, r);
    for (int i = 0; i < p; ++i) {
        Mat qi(m, hd), ki(m, hd), vi(m, hd);
        for (int t = 0; t < m; ++t) {
            std::memcpy(qi.row(t), q.row(t) + i * hd, hd * sizeof(double));
            std::memcpy(ki.row(t), k.row(t) + i * hd, hd * sizeof(double));
            std::memcpy(vi.row(t), v.row(t) + i * hd, hd * sizeof(double));
        }
        Mat oi = attention(qi, ki, vi, mask);
        for (int t = 0; t < m; ++t)
            std::memcpy(headcat.row(t) + i * hd, oi.row(t), hd * sizeof(double));
    }

    Mat proj(m, r);
    matmul(headcat.a.data(), m, r, &model.ps.w[off.wf], r, proj.a.data());
    Mat out = Z;
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] += proj.a[i];
    return out;
}

std::vector<double> ffn_row(const Model& model, int layer, const double* z) {
    const auto& cfg = model.cfg;
    const auto& off = model.layers[layer];
    const int r = cfg.r;
    std::vector<double> hidden(r), out(r);
    for (int j = 0; j < r; ++j) hidden[j] = model.ps.w[off.b1 + j];
    for (int l = 0; l < r; ++l)
        axpy(z[l], &model.ps.w[off.w1 + static_cast<size_t>(l) * r], hidden.data(), r);
    for (int j = 0; j < r; ++j) hidden[j] = gelu(hidden[j]);
    for (int j = 0; j < r; ++j) out[j] = model.ps.w[off.b2 + j];
    for (int l = 0; l < r; ++l)
        axpy(hidden[l], &model.ps.w[off.w2 + static_cast<size_t>(l) * r], out.data(), r);
    return out;
}

void encode_fwd(const PaddedSequence& seq, const Model& model, Rng* dropout_rng, EncTrace& trace) {
    const auto& cfg = model.cfg;
    const int m = cfg.m, r = cfg.r, p = cfg.p, hd = r / p;

    trace.mask = causal_mask(seq);
    trace.x0 = embed_sequence(seq, model);
    trace.x_in = trace.x0;
    dropout_fwd(trace.x_in, cfg.dropout, dropout_rng, trace.drop_emb);

    trace.layers.resize(cfg.L);
    Mat x = trace.x_in;
    for (int l = 0; l < cfg.L; ++l) {
        LayerTrace& lt = trace.layers[l];
        const auto& off = model.layers[l];

        layer_norm_fwd(x, &model.ps.w[off.ln1_g], &model.ps.w[off.ln1_b], lt.ln1_out, lt.ln1_xhat,
                       lt.ln1_istd);

        lt.q.resize(m, r);
        lt.k.resize(m, r);
        lt.v.resize(m, r);
        matmul(lt.ln1_out.a.data(), m, r, &model.ps.w[off.wq], r, lt.q.a.data());
        matmul(lt.ln1_out.a.data(), m, r, &model.ps.w[off.wk], r, lt.k.a.data());
        matmul(lt.ln1_out.a.data(), m, r, &model.ps.w[off.wv], r, lt.v.a.data());

        lt.probs.assign(p, Mat());
        lt.headcat.resize(m, r);
        lt.headcat.zero();
        const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
        for (int i = 0; i < p; ++i) {
            Mat& probs = lt.probs[i];
            probs.resize(m, m);
            std::vector<double> logits(m);
            for (int t = 0; t < m; ++t) {
                double mx = -1e300;
                for (int kk = 0; kk <= t; ++kk) {
                    if (!trace.mask.allowed(t, kk)) continue;
                    logits[kk] = dot(lt.q.row(t) + i * hd, lt.k.row(kk) + i * hd, hd) * scale;
                    if (logits[kk] > mx) mx = logits[kk];
                }
                if (mx == -1e300) continue;
                double z = 0.0;
                for (int kk = 0; kk <= t; ++kk) {
                    if (!trace.mask.allowed(t, kk)) continue;
                    double e = std::exp(logits[kk] - mx);
                    probs.at(t, kk) = e;
                    z += e;
                }
                double* orow = lt.headcat.row(t) + i * hd;
                for (int kk = 0; kk <= t; ++kk) {
                    if (!trace.mask.allowed(t, kk)) continue;
                    double w = probs.at(t, kk) / z;
                    probs.at(t, kk) = w;
                    axpy(w, lt.v.row(kk) + i * hd, orow, hd);
                }
            }
        }

        lt.mproj.resize(m, r);
        matmul(lt.headcat.a.data(), m, r, &model.ps.w[off.wf], r, lt.mproj.a.data());
        Mat branch1 = lt.mproj;
        dropout_fwd(branch1, cfg.dropout, dropout_rng, lt.drop1);
        lt.x_mid = x;
        for (size_t i = 0; i < lt.x_mid.a.size(); ++i) lt.x_mid.a[i] += branch1.a[i];

        layer_norm_fwd(lt.x_mid, &model.ps.w[off.ln2_g], &model.ps.w[off.ln2_b], lt.ln2_out,
                       lt.ln2_xhat, lt.ln2_istd);
        lt.ffn_pre.resize(m, r);
        matmul(lt.ln2_out.a.data(), m, r, &model.ps.w[off.w1], r, lt.ffn_pre.a.data());
        for (int t = 0; t < m; ++t)
            for (int j = 0; j < r; ++j) lt.ffn_pre.at(t, j) += model.ps.w[off.b1 + j];
        lt.ffn_act.resize(m, r);
        for (size_t i = 0; i < lt.ffn_pre.a.size(); ++i) lt.ffn_act.a[i] = gelu(lt.ffn_pre.a[i]);
        lt.ffn_out.resize(m, r);
        matmul(lt.ffn_act.a.data(), m, r, &model.ps.w[off.w2], r, lt.ffn_out.a.data());
        for (int t = 0; t < m; ++t)
            for (int j = 0; j < r; ++j) lt.ffn_out.at(t, j) += model.ps.w[off.b2 + j];

        Mat branch2 = lt.ffn_out;
        dropout_fwd(branch2, cfg.dropout, dropout_rng, lt.drop2);
        x = lt.x_mid;
        for (size_t i = 0; i < x.a.size(); ++i) x.a[i] += branch2.a[i];
    }

    // PAD query rows carry no signal downstream
    for (int t = 0; t < m; ++t)
        if (seq.pad[t]) std::memset(x.row(t), 0, r * sizeof(double));
    trace.z = std::move(x);
}

void encode_bwd(const PaddedSequence& seq, const Model& model, const EncTrace& trace,
                const Mat& dz, std::vector<double>& grad) {
    const auto& cfg = model.cfg;
    const int m = cfg.m, r = cfg.r, p = cfg.p, hd = r / p;

    Mat dx = dz;
    for (int t = 0; t < m; ++t)
        if (seq.pad[t]) std::memset(dx.row(t), 0, r * sizeof(double));

    for (int l = cfg.L - 1; l >= 0; --l) {
        const LayerTrace& lt = trace.layers[l];
        const auto& off = model.layers[l];

        // FFN sublayer: x_out = x_mid + drop2 * ffn(ln2(x_mid))
        Mat dbranch2 = dx;
        apply_scales(dbranch2, lt.drop2);
        // ffn backward
        Mat dact(m, r);
        matmul_nt(dbranch2.a.data(), m, r, &model.ps.w[off.w2], r, dact.a.data());
        matmul_tn_acc(lt.ffn_act.a.data(), m, r, dbranch2.a.data(), r, &grad[off.w2]);
        for (int t = 0; t < m; ++t)
            for (int j = 0; j < r; ++j) grad[off.b2 + j] += dbranch2.at(t, j);
        Mat dpre(m, r);
        for (size_t i = 0; i < dpre.a.size(); ++i)
            dpre.a[i] = dact.a[i] * gelu_grad(lt.ffn_pre.a[i]);
        Mat dln2(m, r);
        matmul_nt(dpre.a.data(), m, r, &model.ps.w[off.w1], r, dln2.a.data());
        matmul_tn_acc(lt.ln2_out.a.data(), m, r, dpre.a.data(), r, &grad[off.w1]);
        for (int t = 0; t < m; ++t)
            for (int j = 0; j < r; ++j) grad[off.b1 + j] += dpre.at(t, j);
        Mat dx_mid;
        layer_norm_bwd(dln2, lt.ln2_xhat, lt.ln2_istd, &model.ps.w[off.ln2_g], dx_mid,
                       &grad[off.ln2_g], &grad[off.ln2_b]);
        for (size_t i = 0; i < dx_mid.a.size(); ++i) dx_mid.a[i] += dx.a[i];  // residual

        // attention sublayer: x_mid = x_in + drop1 * (headcat W^F)
        Mat dbranch1 = dx_mid;
        apply_scales(dbranch1, lt.drop1);
        Mat dheadcat(m, r);
        matmul_nt(dbranch1.a.data(), m, r, &model.ps.w[off.wf], r, dheadcat.a.data());
        matmul_tn_acc(lt.headcat.a.data(), m, r, dbranch1.a.data(), r, &grad[off.wf]);

        Mat dq(m, r), dk(m, r), dv(m, r);
        const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
        std::vector<double> dprow(m);
        for (int i = 0; i < p; ++i) {
            const Mat& probs = lt.probs[i];
            for (int t = 0; t < m; ++t) {
                const double* dh = dheadcat.row(t) + i * hd;
                // dV and softmax backward on row t
                double srow = 0.0;
                for (int kk = 0; kk <= t; ++kk) {
                    double pr = probs.at(t, kk);
                    if (pr == 0.0) {
                        dprow[kk] = 0.0;
                        continue;
                    }
                    double dp = dot(dh, lt.v.row(kk) + i * hd, hd);
                    dprow[kk] = dp;
                    srow += dp * pr;
                    axpy(pr, dh, dv.row(kk) + i * hd, hd);
                }
                for (int kk = 0; kk <= t; ++kk) {
                    double pr = probs.at(t, kk);
                    if (pr == 0.0) continue;
                    double ds = pr * (dprow[kk] - srow) * scale;
                    axpy(ds, lt.k.row(kk) + i * hd, dq.row(t) + i * hd, hd);
                    axpy(ds, lt.q.row(t) + i * hd, dk.row(kk) + i * hd, hd);
                }
            }
        }

        Mat dln1(m, r);
        matmul_nt(dq.a.data(), m, r, &model.ps.w[off.wq], r, dln1.a.data());
        {
            Mat tmp(m, r);
            matmul_nt(dk.a.data(), m, r, &model.ps.w[off.wk], r, tmp.a.data());
            for (size_t i = 0; i < dln1.a.size(); ++i) dln1.a[i] += tmp.a[i];
            matmul_nt(dv.a.data(), m, r, &model.ps.w[off.wv], r, tmp.a.data());
            for (size_t i = 0; i < dln1.a.size(); ++i) dln1.a[i] += tmp.a[i];
        }
        matmul_tn_acc(lt.ln1_out.a.data(), m, r, dq.a.data(), r, &grad[off.wq]);
        matmul_tn_acc(lt.ln1_out.a.data(), m, r, dk.a.data(), r, &grad[off.wk]);
        matmul_tn_acc(lt.ln1_out.a.data(), m, r, dv.a.data(), r, &grad[off.wv]);

        Mat dx_in;
        layer_norm_bwd(dln1, lt.ln1_xhat, lt.ln1_istd, &model.ps.w[off.ln1_g], dx_in,
                       &grad[off.ln1_g], &grad[off.ln1_b]);
        for (size_t i = 0; i < dx_in.a.size(); ++i) dx_in.a[i] += dx_mid.a[i];  // residual
        dx = std::move(dx_in);
    }

    apply_scales(dx, trace.drop_emb);
    auto pv = model.pos_view();
    (void)pv;
    for (int t = 0; t < m; ++t) {
        if (seq.pad[t]) continue;
        const double* dr = dx.row(t);
        for (int h = 1; h <= cfg.H; ++h) {
            int id = seq.id(t, h);
            double* gb = &grad[model.emb[h - 1] + static_cast<size_t>(id) * r];
            axpy(1.0, dr, gb, r);
        }
        axpy(1.0, dr, &grad[model.pos + static_cast<size_t>(t) * r], r);
    }
}

Mat encode(const PaddedSequence& seq, const Model& model) {
    EncTrace trace;
    encode_fwd(seq, model, nullptr, trace);
    return std::move(trace.z);
}

}  // namespace xdrec
