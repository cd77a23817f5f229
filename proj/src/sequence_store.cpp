#include "xdrec/sequence_store.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace xdrec {

int HierVocab::domain_of(int gid, int h) const {
    for (int d = 1; d <= D; ++d) {
        auto [lo, hi] = domain_range(d, h);
        if (gid >= lo && gid <= hi) return d;
    }
    return 0;
}

uint64_t HierVocab::hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](int v) {
        for (int i = 0; i < 4; ++i) {
            h ^= static_cast<unsigned char>(v >> (8 * i));
            h *= 0x100000001b3ULL;
        }
    };
    mix(D);
    mix(H);
    for (const auto& lvl : range)
        for (const auto& [lo, hi] : lvl) {
            mix(lo);
            mix(hi);
        }
    return h;
}

HierVocab build_vocab(const HierarchyManifest& manifest) {
    HierVocab v;
    v.D = manifest.domain_count();
    v.H = manifest.max_depth();
    v.range.resize(v.H);
    v.level_size.assign(v.H, 0);
    for (int h = 1; h <= v.H; ++h) {
        int next = 1;  // 0 is PAD
        auto& lvl = v.range[h - 1];
        lvl.resize(v.D);
        for (int d = 1; d <= v.D; ++d) {
            const DomainSpec& spec = manifest.domains[d - 1];
            // levels beyond the native depth repeat the item set ("self" categories)
            int count = h <= spec.depth ? static_cast<int>(spec.level_names[h - 1].size())
                                        : spec.items();
            lvl[d - 1] = {next, next + count - 1};
            next += count;
        }
        v.level_size[h - 1] = next - 1;
    }
    return v;
}

HierVocab build_vocab(const std::vector<DomainHybridSequence>& sequences,
                      const HierarchyManifest& manifest) {
    HierVocab v = build_vocab(manifest);
    std::vector<std::string> offenders;
    for (const auto& seq : sequences) {
        for (const auto& it : seq.items) {
            if (it.domain < 1 || it.domain > v.D) {
                offenders.push_back("user " + seq.user + ": domain " + std::to_string(it.domain));
                continue;
            }
            for (int h = 1; h <= v.H; ++h) {
                auto [lo, hi] = v.domain_range(it.domain, h);
                int gid = it.ids[h - 1];
                if (gid < lo || gid > hi)
                    offenders.push_back("user " + seq.user + ": level " + std::to_string(h) +
                                        " id " + std::to_string(gid) + " outside [" +
                                        std::to_string(lo) + "," + std::to_string(hi) + "]");
            }
        }
    }
    if (!offenders.empty()) {
        std::string msg = "vocab: categories not covered by manifest:";
        size_t shown = std::min<size_t>(offenders.size(), 10);
        for (size_t i = 0; i < shown; ++i) msg += "\n  " + offenders[i];
        if (offenders.size() > shown)
            msg += "\n  ... and " + std::to_string(offenders.size() - shown) + " more";
        throw std::runtime_error(msg);
    }
    return v;
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace

IngestResult ingest_events(std::istream& in, const HierarchyManifest& manifest) {
    HierVocab vocab = build_vocab(manifest);
    const int H = vocab.H;

    IngestResult res;
    std::unordered_map<std::string, size_t> user_slot;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto fields = split(line, '\t');
        if (fields.size() != 4)
            throw std::runtime_error("line " + std::to_string(lineno) +
                                     ": expected 4 tab-separated fields, got " +
                                     std::to_string(fields.size()));

        int64_t ts = 0;
        auto tsf = fields[3];
        auto [ptr, ec] = std::from_chars(tsf.data(), tsf.data() + tsf.size(), ts);
        if (ec != std::errc{} || ptr != tsf.data() + tsf.size())
            throw std::runtime_error("line " + std::to_string(lineno) + ": bad timestamp '" +
                                     std::string(tsf) + "'");

        std::string dom_name(fields[1]);
        int d = manifest.domain_id(dom_name);
        if (d == 0) {
            ++res.rejected_records;
            if (res.diagnostics.size() < 100)
                res.diagnostics.push_back("line " + std::to_string(lineno) +
                                          ": unknown domain '" + dom_name + "', record dropped");
            continue;
        }
        const DomainSpec& spec = manifest.domains[d - 1];

        auto path = split(fields[2], '/');
        if (static_cast<int>(path.size()) != spec.depth)
            throw std::runtime_error("line " + std::to_string(lineno) + ": domain '" + dom_name +
                                     "' expects a " + std::to_string(spec.depth) +
                                     "-level category path, got '" + std::string(fields[2]) + "'");

        // resolve the native path against the tree
        std::vector<int> local(spec.depth);
        for (int h = 0; h < spec.depth; ++h) {
            auto it = spec.index[h].find(std::string(path[h]));
            if (it == spec.index[h].end())
                throw std::runtime_error("line " + std::to_string(lineno) + ": category '" +
                                         std::string(path[h]) + "' not in manifest for domain '" +
                                         dom_name + "' level " + std::to_string(h + 1));
            local[h] = it->second;
            if (h > 0 && spec.parent[h][local[h]] != local[h - 1])
                throw std::runtime_error("line " + std::to_string(lineno) + ": path '" +
                                         std::string(fields[2]) +
                                         "' contradicts the manifest tree of domain '" +
                                         dom_name + "'");
        }

        Interaction inter;
        inter.domain = d;
        inter.ts = ts;
        inter.ids.resize(H);
        int item_local = local[spec.depth - 1];
        for (int h = 1; h <= H; ++h) {
            int loc = h <= spec.depth ? local[h - 1] : item_local;
            inter.ids[h - 1] = vocab.global_id(d, h, loc);
        }

        auto [slot_it, fresh] = user_slot.emplace(std::string(fields[0]), res.sequences.size());
        if (fresh) {
            res.sequences.push_back({std::string(fields[0]), {}});
        }
        res.sequences[slot_it->second].items.push_back(std::move(inter));
    }

    // stable sort keeps input order on timestamp ties
    for (auto& seq : res.sequences)
        std::stable_sort(seq.items.begin(), seq.items.end(),
                         [](const Interaction& a, const Interaction& b) { return a.ts < b.ts; });
    return res;
}

void write_events(std::ostream& out, const std::vector<DomainHybridSequence>& sequences,
                  const HierarchyManifest& manifest) {
    HierVocab vocab = build_vocab(manifest);
    for (const auto& seq : sequences) {
        for (const auto& it : seq.items) {
            const DomainSpec& spec = manifest.domains[it.domain - 1];
            out << seq.user << '\t' << spec.name << '\t';
            for (int h = 1; h <= spec.depth; ++h) {
                int local = it.ids[h - 1] - vocab.domain_range(it.domain, h).first;
                if (h > 1) out << '/';
                out << spec.level_names[h - 1][local];
            }
            out << '\t' << it.ts << '\n';
        }
    }
}

PaddedSequence pad_truncate(const DomainHybridSequence& seq, int m, int H) {
    if (m < 2) throw std::runtime_error("pad_truncate: m must be >= 2");
    PaddedSequence p;
    p.m = m;
    p.H = H;
    p.pad.assign(m, 1);
    p.domain.assign(m, 0);
    p.ids.assign(static_cast<size_t>(m) * H, 0);
    p.tmask.assign(m, 0);

    int n = static_cast<int>(seq.items.size());
    int keep = std::min(n, m);
    int src0 = n - keep;   // most recent `keep` interactions
    int dst0 = m - keep;   // left padding
    for (int i = 0; i < keep; ++i) {
        const Interaction& it = seq.items[src0 + i];
        int t = dst0 + i;
        p.pad[t] = 0;
        p.domain[t] = it.domain;
        for (int h = 0; h < H; ++h) p.ids[static_cast<size_t>(t) * H + h] = it.ids[h];
    }
    for (int t = 0; t + 1 < m; ++t)
        if (!p.pad[t] && !p.pad[t + 1]) p.tmask[t] = 1;
    return p;
}

LeaveOneOutSplit split_leave_one_out(const DomainHybridSequence& seq) {
    if (seq.items.size() < 3)
        throw std::runtime_error("split_leave_one_out: sequence shorter than 3");
    LeaveOneOutSplit s;
    s.train.user = seq.user;
    s.train.items.assign(seq.items.begin(), seq.items.end() - 2);
    s.valid_target = seq.items[seq.items.size() - 2];
    s.test_target = seq.items.back();
    return s;
}

SplitResult split_all(const std::vector<DomainHybridSequence>& sequences) {
    SplitResult res;
    for (const auto& seq : sequences) {
        if (seq.items.size() < 3) {
            ++res.excluded_short;
            continue;
        }
        res.splits.push_back(split_leave_one_out(seq));
    }
    return res;
}

}  // namespace xdrec
