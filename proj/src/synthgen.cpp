#include "xdrec/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "xdrec/rng.hpp"

namespace xdrec {

std::vector<std::vector<double>> cholesky_psd(const std::vector<std::vector<double>>& a) {
    const int n = static_cast<int>(a.size());
    std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
    for (int j = 0; j < n; ++j) {
        double d = a[j][j];
        for (int k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
        if (d < -1e-9) throw std::runtime_error("cross_corr is not positive semidefinite");
        if (d < 1e-12) {
            // singular direction; leave the column zero
            continue;
        }
        l[j][j] = std::sqrt(d);
        for (int i = j + 1; i < n; ++i) {
            double s = a[i][j];
            for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
            l[i][j] = s / l[j][j];
        }
    }
    return l;
}

void SynthProfile::validate() const {
    const int D = domain_count();
    if (D < 1) throw std::runtime_error("synth: at least one domain required");
    if (users < 1) throw std::runtime_error("synth: users must be positive");
    if (len_min < 1 || len_max < len_min) throw std::runtime_error("synth: bad length range");
    if (latent_dim < 1) throw std::runtime_error("synth: latent_dim must be positive");
    for (const auto& d : domains) {
        if (d.depth != 2 && d.depth != 3)
            throw std::runtime_error("synth: domain depth must be 2 or 3");
        if (d.items < 2 || d.categories < 1)
            throw std::runtime_error("synth: domain needs >= 2 items and >= 1 category");
        if (d.categories > d.items)
            throw std::runtime_error("synth: more categories than items in " + d.name);
        if (d.depth == 3) {
            if (d.mid_categories < d.categories || d.mid_categories > d.items)
                throw std::runtime_error("synth: mid_categories must lie between categories and items");
        }
    }
    if (static_cast<int>(cross_corr.size()) != D)
        throw std::runtime_error("synth: cross_corr must be D x D");
    for (int i = 0; i < D; ++i) {
        if (static_cast<int>(cross_corr[i].size()) != D)
            throw std::runtime_error("synth: cross_corr must be D x D");
        if (std::fabs(cross_corr[i][i] - 1.0) > 1e-12)
            throw std::runtime_error("synth: cross_corr diagonal must be 1");
        for (int j = 0; j < D; ++j) {
            if (cross_corr[i][j] < -1.0 || cross_corr[i][j] > 1.0)
                throw std::runtime_error("synth: cross_corr entries must be in [-1,1]");
            if (std::fabs(cross_corr[i][j] - cross_corr[j][i]) > 1e-12)
                throw std::runtime_error("synth: cross_corr must be symmetric");
        }
    }
    for (int d : noise_domains)
        if (d < 1 || d > D) throw std::runtime_error("synth: noise domain id out of range");
    cholesky_psd(cross_corr);  // throws if not PSD
}

namespace {

// contiguous balanced blocks: element i of n mapped into g groups
int block_of(int i, int n, int g) { return static_cast<int>((static_cast<long>(i) * g) / n); }

HierarchyManifest build_manifest(const SynthProfile& p) {
    HierarchyManifest man;
    for (const auto& sd : p.domains) {
        DomainSpec spec;
        spec.name = sd.name;
        spec.depth = sd.depth;
        spec.level_names.resize(sd.depth);
        spec.parent.resize(sd.depth);
        auto names = [](const char* prefix, int n) {
            std::vector<std::string> v(n);
            char buf[32];
            for (int i = 0; i < n; ++i) {
                std::snprintf(buf, sizeof(buf), "%s%d", prefix, i);
                v[i] = buf;
            }
            return v;
        };
        spec.level_names[0] = names("c", sd.categories);
        if (sd.depth == 2) {
            spec.level_names[1] = names("i", sd.items);
            spec.parent[1].resize(sd.items);
            for (int i = 0; i < sd.items; ++i)
                spec.parent[1][i] = block_of(i, sd.items, sd.categories);
        } else {
            spec.level_names[1] = names("m", sd.mid_categories);
            spec.parent[1].resize(sd.mid_categories);
            for (int i = 0; i < sd.mid_categories; ++i)
                spec.parent[1][i] = block_of(i, sd.mid_categories, sd.categories);
            spec.level_names[2] = names("i", sd.items);
            spec.parent[2].resize(sd.items);
            for (int i = 0; i < sd.items; ++i)
                spec.parent[2][i] = block_of(i, sd.items, sd.mid_categories);
        }
        spec.rebuild_index();
        man.domains.push_back(std::move(spec));
    }
    man.sort_domains();
    return man;
}

}  // namespace

SynthResult generate(const SynthProfile& profile) {
    profile.validate();
    const int D = profile.domain_count();
    const int k = profile.latent_dim;

    SynthResult out;
    out.manifest = build_manifest(profile);
    HierVocab vocab = build_vocab(out.manifest);
    const int H = vocab.H;

    // domain order may have changed by the lexicographic sort; map back
    std::vector<int> profile_idx(D);  // manifest domain d (1-based) -> profile index
    for (int d = 1; d <= D; ++d) {
        int pi = -1;
        for (int i = 0; i < D; ++i)
            if (profile.domains[i].name == out.manifest.domains[d - 1].name) pi = i;
        if (pi < 0) throw std::runtime_error("synth: duplicate or missing domain name");
        profile_idx[d - 1] = pi;
    }
    std::vector<uint8_t> is_noise(D, 0);
    for (int nd : profile.noise_domains) {
        // noise ids refer to profile order; translate to manifest order
        for (int d = 1; d <= D; ++d)
            if (profile_idx[d - 1] == nd - 1) is_noise[d - 1] = 1;
    }

    // correlation structure in profile order
    auto chol = cholesky_psd(profile.cross_corr);

    // fixed item embeddings: cluster centers by level-1 category, plus jitter
    Rng item_rng(mix_seed(profile.seed, 0x17e3a11du));
    std::vector<std::vector<double>> item_emb(D);  // [d-1][item*k + j]
    for (int d = 1; d <= D; ++d) {
        const SynthDomain& sd = profile.domains[profile_idx[d - 1]];
        std::vector<double> centers(static_cast<size_t>(sd.categories) * k);
        for (auto& c : centers) c = item_rng.next_normal();
        auto& emb = item_emb[d - 1];
        emb.resize(static_cast<size_t>(sd.items) * k);
        for (int i = 0; i < sd.items; ++i) {
            int c = block_of(i, sd.items, sd.categories);
            for (int j = 0; j < k; ++j)
                emb[static_cast<size_t>(i) * k + j] =
                    centers[static_cast<size_t>(c) * k + j] + profile.item_noise * item_rng.next_normal();
        }
    }

    out.sequences.resize(profile.users);
    for (int u = 0; u < profile.users; ++u) {
        Rng rng(mix_seed(profile.seed, 0x5eed0000u + static_cast<uint64_t>(u)));

        // per-domain latent user factors, coupled coordinate-wise via the copula
        std::vector<double> factors(static_cast<size_t>(D) * k);  // manifest order
        for (int j = 0; j < k; ++j) {
            std::vector<double> g(D);
            for (auto& v : g) v = rng.next_normal();
            for (int pi = 0; pi < D; ++pi) {
                double x = 0.0;
                for (int q = 0; q <= pi; ++q) x += chol[pi][q] * g[q];
                // pi indexes profile order; find its manifest slot
                for (int d = 1; d <= D; ++d)
                    if (profile_idx[d - 1] == pi)
                        factors[static_cast<size_t>(d - 1) * k + j] = profile.factor_scale * x;
            }
        }

        int n = static_cast<int>(rng.next_int(profile.len_min, profile.len_max));

        // interleave domains by superposed Poisson arrivals
        std::vector<double> clock(D);
        for (auto& c : clock) c = rng.next_exponential();
        DomainHybridSequence& seq = out.sequences[u];
        char name[16];
        std::snprintf(name, sizeof(name), "u%06d", u);
        seq.user = name;
        seq.items.reserve(n);
        for (int e = 0; e < n; ++e) {
            int d = 1;
            for (int c = 2; c <= D; ++c)
                if (clock[c - 1] < clock[d - 1]) d = c;
            clock[d - 1] += rng.next_exponential();

            const SynthDomain& sd = profile.domains[profile_idx[d - 1]];
            int item;
            if (is_noise[d - 1]) {
                item = static_cast<int>(rng.next_int(0, sd.items - 1));
            } else {
                // Gumbel-max sampling from softmax(user . item embedding)
                const double* uf = &factors[static_cast<size_t>(d - 1) * k];
                const auto& emb = item_emb[d - 1];
                double best = -1e300;
                item = 0;
                for (int i = 0; i < sd.items; ++i) {
                    double logit = 0.0;
                    for (int j = 0; j < k; ++j) logit += uf[j] * emb[static_cast<size_t>(i) * k + j];
                    double un = rng.next_unit();
                    while (un <= 0.0) un = rng.next_unit();
                    double gumbel = -std::log(-std::log(un));
                    if (logit + gumbel > best) {
                        best = logit + gumbel;
                        item = i;
                    }
                }
            }

            Interaction inter;
            inter.domain = d;
            inter.ts = e;
            inter.ids.resize(H);
            int lvl1 = block_of(item, sd.items, sd.categories);
            if (sd.depth == 2) {
                inter.ids[0] = vocab.global_id(d, 1, lvl1);
                inter.ids[1] = vocab.global_id(d, 2, item);
            } else {
                int mid = block_of(item, sd.items, sd.mid_categories);
                inter.ids[0] = vocab.global_id(d, 1, lvl1);
                inter.ids[1] = vocab.global_id(d, 2, mid);
                inter.ids[2] = vocab.global_id(d, 3, item);
            }
            for (int h = sd.depth + 1; h <= H; ++h) inter.ids[h - 1] = vocab.global_id(d, h, item);
            seq.items.push_back(std::move(inter));
        }
    }
    return out;
}

}  // namespace xdrec
