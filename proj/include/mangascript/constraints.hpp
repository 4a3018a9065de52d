#pragma once

// Must-link / cannot-link extraction from per-page character-character edges.

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mangascript/chapter.hpp"
#include "mangascript/error.hpp"

namespace mangascript {

inline constexpr double kDefaultMustLinkThreshold = 0.5;

// Pairs are stored as (min, max) by string order.
struct ConstraintSet {
    std::set<IdPair> must_link;
    std::set<IdPair> cannot_link;

    bool consistent() const {
        return std::none_of(must_link.begin(), must_link.end(),
                            [&](const IdPair& p) { return cannot_link.contains(p); });
    }

    friend bool operator==(const ConstraintSet&, const ConstraintSet&) = default;
};

enum class CannotLinkMode {
    same_page,   // every cross-component pair on the page
    same_panel,  // only cross-component pairs whose boxes fall in the same panel
};

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    // The smaller root survives, which keeps component representatives stable.
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
    }

private:
    std::vector<std::size_t> parent_;
};

// Groups of in-page character indices, ordered by their first member; members ascending.
inline std::vector<std::vector<std::size_t>> component_groups(UnionFind& uf, std::size_t n) {
    std::map<std::size_t, std::vector<std::size_t>> by_root;
    for (std::size_t i = 0; i < n; ++i) by_root[uf.find(i)].push_back(i);
    std::vector<std::vector<std::size_t>> groups;
    for (auto& [root, members] : by_root) groups.push_back(std::move(members));
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return groups;
}

namespace detail {

inline std::vector<std::vector<std::size_t>> thresholded_groups(const Page& page, double threshold) {
    const std::size_t n = page.characters.size();
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (page.edges.char_char_score(page.characters[i].id, page.characters[j].id) >= threshold) uf.unite(i, j);
        }
    }
    return component_groups(uf, n);
}

}  // namespace detail

// Connected components of the char-char graph thresholded at `threshold`.
inline std::vector<std::vector<std::string>> per_page_components(const Page& page,
                                                                 double threshold = kDefaultMustLinkThreshold) {
    std::vector<std::vector<std::string>> out;
    for (const auto& g : detail::thresholded_groups(page, threshold)) {
        std::vector<std::string> ids;
        for (std::size_t i : g) ids.push_back(page.characters[i].id);
        out.push_back(std::move(ids));
    }
    return out;
}

namespace detail {

// Index of the panel with the largest overlap; -1 when nothing overlaps.
inline long containing_panel(const Page& page, const BoundingBox& box) {
    long best = -1;
    double best_area = 0.0;
    for (std::size_t p = 0; p < page.panels.size(); ++p) {
        const double a = intersection_area(page.panels[p].bbox, box);
        if (a > best_area) {
            best_area = a;
            best = static_cast<long>(p);
        }
    }
    return best;
}

inline void add_partition_constraints(const Page& page, const std::vector<std::vector<std::size_t>>& groups,
                                      CannotLinkMode mode, ConstraintSet& out) {
    std::vector<std::size_t> group_of(page.characters.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t i : groups[g]) group_of[i] = g;
    }
    std::vector<long> panel_of;
    if (mode == CannotLinkMode::same_panel) {
        for (const auto& c : page.characters) panel_of.push_back(containing_panel(page, c.bbox));
    }
    for (std::size_t i = 0; i < page.characters.size(); ++i) {
        for (std::size_t j = i + 1; j < page.characters.size(); ++j) {
            const auto pair = unordered_pair(page.characters[i].id, page.characters[j].id);
            if (group_of[i] == group_of[j]) {
                out.must_link.insert(pair);
            } else if (mode == CannotLinkMode::same_page || (panel_of[i] >= 0 && panel_of[i] == panel_of[j])) {
                out.cannot_link.insert(pair);
            }
        }
    }
}

}  // namespace detail

inline ConstraintSet extract_constraints(const Chapter& chapter, double threshold = kDefaultMustLinkThreshold,
                                         CannotLinkMode mode = CannotLinkMode::same_page) {
    ConstraintSet out;
    for (const auto& page : chapter.pages) {
        detail::add_partition_constraints(page, detail::thresholded_groups(page, threshold), mode, out);
    }
    return out;
}

// Constraints implied by known per-crop identities: same identity is a
// must-link, different identity a cannot-link, within each page.
inline ConstraintSet constraints_from_identities(const Chapter& chapter,
                                                 const std::map<std::string, std::string>& identity,
                                                 CannotLinkMode mode = CannotLinkMode::same_page) {
    ConstraintSet out;
    for (const auto& page : chapter.pages) {
        const std::size_t n = page.characters.size();
        UnionFind uf(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                auto a = identity.find(page.characters[i].id);
                auto b = identity.find(page.characters[j].id);
                if (a == identity.end() || b == identity.end()) throw Error("missing identity for crop");
                if (a->second == b->second) uf.unite(i, j);
            }
        }
        detail::add_partition_constraints(page, component_groups(uf, n), mode, out);
    }
    return out;
}

// Adds override pairs, closes must-links transitively, and rejects any
// pair that ends up both must- and cannot-linked.
inline ConstraintSet merge_constraints(const ConstraintSet& base, const ConstraintSet& extra) {
    ConstraintSet merged = base;
    merged.must_link.insert(extra.must_link.begin(), extra.must_link.end());
    merged.cannot_link.insert(extra.cannot_link.begin(), extra.cannot_link.end());

    std::map<std::string, std::size_t> index;
    for (const auto& [a, b] : merged.must_link) {
        index.emplace(a, index.size());
        index.emplace(b, index.size());
    }
    std::vector<std::string> ids(index.size());
    for (const auto& [id, i] : index) ids[i] = id;
    UnionFind uf(ids.size());
    for (const auto& [a, b] : merged.must_link) uf.unite(index[a], index[b]);
    for (const auto& group : component_groups(uf, ids.size())) {
        for (std::size_t x = 0; x < group.size(); ++x) {
            for (std::size_t y = x + 1; y < group.size(); ++y) {
                merged.must_link.insert(unordered_pair(ids[group[x]], ids[group[y]]));
            }
        }
    }
    if (!merged.consistent()) throw Error("inconsistent constraints");
    return merged;
}

inline ConstraintSet constraints_from_json(const nlohmann::json& doc) {
    ConstraintSet out;
    try {
        for (const auto& p : doc.value("must_link", nlohmann::json::array())) {
            const auto a = p.at(0).get<std::string>();
            const auto b = p.at(1).get<std::string>();
            if (a == b) throw Error("self-pair in constraint overrides");
            out.must_link.insert(unordered_pair(a, b));
        }
        for (const auto& p : doc.value("cannot_link", nlohmann::json::array())) {
            const auto a = p.at(0).get<std::string>();
            const auto b = p.at(1).get<std::string>();
            if (a == b) throw Error("self-pair in constraint overrides");
            out.cannot_link.insert(unordered_pair(a, b));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed constraint overrides: ") + e.what());
    }
    return out;
}

}  // namespace mangascript
