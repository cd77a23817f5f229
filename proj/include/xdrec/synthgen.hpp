#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xdrec/sequence_store.hpp"

namespace xdrec {

struct SynthDomain {
    std::string name;
    int items = 120;
    int categories = 12;     // level-1 categories
    int mid_categories = 0;  // level-2, only when depth == 3
    int depth = 2;           // 2: category/item, 3: category/mid/item
};

// Controls how much signal crosses domains: per-domain latent user factors
// are coupled through a Gaussian copula over cross_corr, while noise domains
// ignore the user factors entirely.
struct SynthProfile {
    std::vector<SynthDomain> domains;
    int users = 1000;
    int len_min = 10;
    int len_max = 30;
    int latent_dim = 8;
    std::vector<std::vector<double>> cross_corr;  // D x D
    std::vector<int> noise_domains;               // 1-based ids into `domains`
    double factor_scale = 1.0;
    double item_noise = 0.4;
    uint64_t seed = 1;

    int domain_count() const { return static_cast<int>(domains.size()); }
    void validate() const;  // throws on violations (incl. non-PSD cross_corr)
};

struct SynthResult {
    std::vector<DomainHybridSequence> sequences;
    HierarchyManifest manifest;
};

// Deterministic given profile.seed; per-user substreams are derived seeds so
// the output does not depend on generation order.
SynthResult generate(const SynthProfile& profile);

// Lower-triangular Cholesky factor with zero-pivot tolerance so exactly
// singular PSD matrices (e.g. correlation 1.0) pass. Throws when the input
// is not positive semidefinite.
std::vector<std::vector<double>> cholesky_psd(const std::vector<std::vector<double>>& a);

}  // namespace xdrec
