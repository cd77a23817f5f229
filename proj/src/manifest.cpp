#include "xdrec/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace xdrec {

using nlohmann::json;

void DomainSpec::rebuild_index() {
    index.clear();
    index.resize(level_names.size());
    for (size_t h = 0; h < level_names.size(); ++h) {
        for (size_t i = 0; i < level_names[h].size(); ++i) {
            auto [it, fresh] = index[h].emplace(level_names[h][i], static_cast<int>(i));
            if (!fresh)
                throw std::runtime_error("manifest: duplicate category '" + level_names[h][i] +
                                         "' in domain " + name + " level " + std::to_string(h + 1));
        }
    }
}

int HierarchyManifest::max_depth() const {
    int h = 0;
    for (const auto& d : domains) h = std::max(h, d.depth);
    return h;
}

int HierarchyManifest::domain_id(const std::string& name) const {
    for (size_t i = 0; i < domains.size(); ++i)
        if (domains[i].name == name) return static_cast<int>(i) + 1;
    return 0;
}

void HierarchyManifest::sort_domains() {
    std::sort(domains.begin(), domains.end(),
              [](const DomainSpec& a, const DomainSpec& b) { return a.name < b.name; });
}

static uint64_t fnv1a(uint64_t h, const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t HierarchyManifest::hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& d : domains) {
        h = fnv1a(h, d.name.data(), d.name.size());
        h = fnv1a(h, &d.depth, sizeof(d.depth));
        for (const auto& lvl : d.level_names)
            for (const auto& n : lvl) h = fnv1a(h, n.data(), n.size() + 1);
        for (const auto& par : d.parent)
            for (int v : par) h = fnv1a(h, &v, sizeof(v));
    }
    return h;
}

std::string HierarchyManifest::to_json() const {
    json root;
    root["domains"] = json::array();
    for (const auto& d : domains) {
        json jd;
        jd["name"] = d.name;
        jd["depth"] = d.depth;
        jd["levels"] = json::array();
        for (int h = 0; h < d.depth; ++h) {
            json jl;
            jl["names"] = d.level_names[h];
            if (h > 0) jl["parent"] = d.parent[h];
            jd["levels"].push_back(std::move(jl));
        }
        root["domains"].push_back(std::move(jd));
    }
    return root.dump(2);
}

HierarchyManifest HierarchyManifest::from_json(const std::string& text) {
    json root = json::parse(text);
    HierarchyManifest man;
    for (const auto& jd : root.at("domains")) {
        DomainSpec d;
        d.name = jd.at("name").get<std::string>();
        d.depth = jd.at("depth").get<int>();
        const auto& levels = jd.at("levels");
        if (static_cast<int>(levels.size()) != d.depth)
            throw std::runtime_error("manifest: domain " + d.name + " declares depth " +
                                     std::to_string(d.depth) + " but lists " +
                                     std::to_string(levels.size()) + " levels");
        d.level_names.resize(d.depth);
        d.parent.resize(d.depth);
        for (int h = 0; h < d.depth; ++h) {
            d.level_names[h] = levels[h].at("names").get<std::vector<std::string>>();
            if (h > 0) {
                d.parent[h] = levels[h].at("parent").get<std::vector<int>>();
                if (d.parent[h].size() != d.level_names[h].size())
                    throw std::runtime_error("manifest: domain " + d.name + " level " +
                                             std::to_string(h + 1) + ": parent/name size mismatch");
                for (int p : d.parent[h])
                    if (p < 0 || p >= static_cast<int>(d.level_names[h - 1].size()))
                        throw std::runtime_error("manifest: domain " + d.name +
                                                 ": parent index out of range");
            }
        }
        d.rebuild_index();
        man.domains.push_back(std::move(d));
    }
    man.sort_domains();
    return man;
}

void HierarchyManifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json() << '\n';
}

HierarchyManifest HierarchyManifest::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

}  // namespace xdrec
