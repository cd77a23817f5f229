#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace xdrec {

// Category tree of one domain. Level 0 is the coarsest category level,
// the last level holds the items themselves. parent[h][i] is the index of
// node i's parent one level up (empty for level 0).
struct DomainSpec {
    std::string name;
    int depth = 0;  // native number of levels, item level included
    std::vector<std::vector<std::string>> level_names;
    std::vector<std::vector<int>> parent;
    std::vector<std::unordered_map<std::string, int>> index;  // name -> local idx per level

    int items() const { return static_cast<int>(level_names.back().size()); }
    void rebuild_index();
};

// Declares every domain, its hierarchy depth and its category tree.
// Domains are kept sorted by name so id assignment is deterministic.
struct HierarchyManifest {
    std::vector<DomainSpec> domains;

    int domain_count() const { return static_cast<int>(domains.size()); }
    int max_depth() const;
    // 1-based domain id; 0 if unknown
    int domain_id(const std::string& name) const;

    void sort_domains();
    uint64_t hash() const;

    std::string to_json() const;
    static HierarchyManifest from_json(const std::string& text);
    void save(const std::string& path) const;
    static HierarchyManifest load(const std::string& path);
};

}  // namespace xdrec
