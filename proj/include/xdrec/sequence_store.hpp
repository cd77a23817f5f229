#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "xdrec/manifest.hpp"

namespace xdrec {

// One interaction: which domain it happened in and the item's category ids
// at every level, level 1 = coarsest .. level H = the item itself. Domains
// with a shallower native hierarchy repeat the item id at the extra levels
// so all tuples have uniform arity H. Ids are global per level, PAD = 0.
struct Interaction {
    int domain = 0;  // 1-based
    std::vector<int> ids;
    int64_t ts = 0;

    bool operator==(const Interaction&) const = default;
};

// A user's interactions across all domains merged into one chronological list.
struct DomainHybridSequence {
    std::string user;
    std::vector<Interaction> items;

    bool operator==(const DomainHybridSequence&) const = default;
};

// Fixed-length view used by the model: exactly m slots, left-padded; PAD
// slots carry no domain and id 0 at every level. target_mask[t] marks the
// positions whose next slot is a valid training target.
struct PaddedSequence {
    int m = 0;
    int H = 0;
    std::vector<uint8_t> pad;      // size m
    std::vector<int> domain;       // size m, 0 at PAD
    std::vector<int> ids;          // m*H, ids[t*H + (h-1)]
    std::vector<uint8_t> tmask;    // size m

    int id(int t, int h) const { return ids[static_cast<size_t>(t) * H + (h - 1)]; }
    int last_nonpad() const {
        for (int t = m - 1; t >= 0; --t)
            if (!pad[t]) return t;
        return -1;
    }
};

// Per-(domain, level) contiguous global id ranges; level h concatenates all
// domains' blocks. PAD id 0 is reserved at every level.
struct HierVocab {
    int D = 0;
    int H = 0;
    std::vector<std::vector<std::pair<int, int>>> range;  // range[h-1][d-1] = [lo, hi]
    std::vector<int> level_size;                          // per level, PAD excluded

    std::pair<int, int> domain_range(int d, int h) const { return range[h - 1][d - 1]; }
    int global_id(int d, int h, int local) const { return domain_range(d, h).first + local; }
    // 1-based domain owning a global id at level h; 0 if out of range
    int domain_of(int gid, int h) const;
    uint64_t hash() const;
};

struct LeaveOneOutSplit {
    DomainHybridSequence train;  // everything but the two held-out interactions
    Interaction valid_target;
    Interaction test_target;
};

struct SplitResult {
    std::vector<LeaveOneOutSplit> splits;
    long excluded_short = 0;  // sequences shorter than 3
};

struct IngestResult {
    std::vector<DomainHybridSequence> sequences;  // users in first-appearance order
    long rejected_records = 0;
    std::vector<std::string> diagnostics;
};

// ---------------------------------------------------------------------------

// Deterministic vocabulary from the manifest alone: domains in lexicographic
// order, categories in manifest order, ids starting at 1 per level.
HierVocab build_vocab(const HierarchyManifest& manifest);

// Same, but first validates that every observed id is covered by the manifest.
HierVocab build_vocab(const std::vector<DomainHybridSequence>& sequences,
                      const HierarchyManifest& manifest);

// Parses `user TAB domain TAB c1/c2/... TAB unix_ts` lines. Unknown domains
// reject the record with a diagnostic; malformed lines raise an error naming
// the line number. Each user's items are stable-sorted by timestamp.
IngestResult ingest_events(std::istream& in, const HierarchyManifest& manifest);

// Inverse of ingest_events; emits native-depth category paths.
void write_events(std::ostream& out, const std::vector<DomainHybridSequence>& sequences,
                  const HierarchyManifest& manifest);

PaddedSequence pad_truncate(const DomainHybridSequence& seq, int m, int H);

LeaveOneOutSplit split_leave_one_out(const DomainHybridSequence& seq);
SplitResult split_all(const std::vector<DomainHybridSequence>& sequences);

}  // namespace xdrec
