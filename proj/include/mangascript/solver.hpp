#pragma once

// Exact constrained crop-to-character assignment.
//
//   minimise   sum_i sum_j d[i][j] x[i][j]
//   subject to sum_j x[i][j] = 1                    for every crop i
//              x[u][j] = x[v][j]                    for (u,v) in M, every label j
//              x[u][j] + x[v][j] <= 1               for (u,v) in C, named labels j only
//
// Must-links are collapsed into fragments (their equivalence classes), which
// turns the problem into labelling fragments subject to pairwise "not the
// same named label" constraints. Fragments with no cannot-link path between
// them are independent, so each connected component of the fragment
// cannot-link graph is solved separately by depth-first branch and bound.
//
// Tie-breaking: among optimal labellings the solver returns the one that is
// lexicographically smallest when fragments are listed by decreasing size
// (then lowest member index) and labels by character index with "other" last.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mangascript/character_bank.hpp"
#include "mangascript/constraints.hpp"
#include "mangascript/error.hpp"

namespace mangascript {

struct AssignmentProblem {
    CostMatrix costs;
    ConstraintSet constraints;
    std::vector<std::string> crop_ids;  // row i of costs belongs to crop_ids[i]
};

struct Fragment {
    std::vector<std::size_t> members;  // crop indices, ascending
    std::vector<double> cost_row;      // sum of member rows
};

struct FragmentGraph {
    std::vector<Fragment> fragments;  // ordered by lowest member
    std::set<std::pair<std::size_t, std::size_t>> cannot_link;  // (lo, hi) fragment indices
};

// labels[i] is the column chosen for crop i; costs.other_column() means "other".
struct Assignment {
    std::vector<std::size_t> labels;
    double objective = 0.0;

    friend bool operator==(const Assignment&, const Assignment&) = default;
};

inline AssignmentProblem make_problem(std::span<const CharacterNode> crops, const CharacterBank& bank,
                                      ConstraintSet constraints) {
    AssignmentProblem p;
    p.costs = build_cost_matrix(crops, bank);
    p.constraints = std::move(constraints);
    p.crop_ids.reserve(crops.size());
    for (const auto& c : crops) p.crop_ids.push_back(c.id);
    return p;
}

namespace detail {

inline std::map<std::string, std::size_t> crop_index(const AssignmentProblem& problem) {
    if (problem.costs.rows() != problem.crop_ids.size()) throw Error("cost matrix rows do not match crop count");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < problem.crop_ids.size(); ++i) {
        if (!index.emplace(problem.crop_ids[i], i).second) {
            throw Error("duplicate crop id '" + problem.crop_ids[i] + "'");
        }
    }
    return index;
}

inline std::size_t lookup_crop(const std::map<std::string, std::size_t>& index, const std::string& id) {
    auto it = index.find(id);
    if (it == index.end()) throw Error("constraint references unknown crop '" + id + "'");
    return it->second;
}

// Crop sum in row order; the reported objective always comes from here.
inline double objective_of(const AssignmentProblem& problem, const std::vector<std::size_t>& labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) total += problem.costs(i, labels[i]);
    return total;
}

}  // namespace detail

inline FragmentGraph collapse_fragments(const AssignmentProblem& problem) {
    const auto index = detail::crop_index(problem);
    const std::size_t n = problem.crop_ids.size();
    const std::size_t cols = problem.costs.cols();

    UnionFind uf(n);
    for (const auto& [a, b] : problem.constraints.must_link) {
        uf.unite(detail::lookup_crop(index, a), detail::lookup_crop(index, b));
    }
    FragmentGraph g;
    std::vector<std::size_t> fragment_of(n);
    for (auto& members : component_groups(uf, n)) {
        Fragment f;
        f.cost_row.assign(cols, 0.0);
        for (std::size_t i : members) {
            fragment_of[i] = g.fragments.size();
            for (std::size_t j = 0; j < cols; ++j) f.cost_row[j] += problem.costs(i, j);
        }
        f.members = std::move(members);
        g.fragments.push_back(std::move(f));
    }
    for (const auto& [a, b] : problem.constraints.cannot_link) {
        std::size_t fa = fragment_of[detail::lookup_crop(index, a)];
        std::size_t fb = fragment_of[detail::lookup_crop(index, b)];
        if (fa == fb) throw Error("inconsistent constraints");
        if (fb < fa) std::swap(fa, fb);
        g.cannot_link.emplace(fa, fb);
    }
    return g;
}

namespace detail {

// Fragment visiting order: larger fragments first, then lowest member index.
inline std::vector<std::size_t> search_order(const FragmentGraph& g) {
    std::vector<std::size_t> order(g.fragments.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& fa = g.fragments[a];
        const auto& fb = g.fragments[b];
        if (fa.members.size() != fb.members.size()) return fa.members.size() > fb.members.size();
        return fa.members.front() < fb.members.front();
    });
    return order;
}

inline std::vector<std::size_t> expand_labels(const FragmentGraph& g, const std::vector<std::size_t>& fragment_labels,
                                              std::size_t n) {
    std::vector<std::size_t> labels(n, 0);
    for (std::size_t f = 0; f < g.fragments.size(); ++f) {
        for (std::size_t i : g.fragments[f].members) labels[i] = fragment_labels[f];
    }
    return labels;
}

class ComponentSearch {
public:
    // `frags` lists fragment indices of one component in search order.
    ComponentSearch(const FragmentGraph& g, std::vector<std::size_t> frags, std::size_t other)
        : g_(g), frags_(std::move(frags)), other_(other), assigned_(frags_.size(), 0), best_(frags_.size(), other) {
        std::map<std::size_t, std::size_t> pos;
        for (std::size_t p = 0; p < frags_.size(); ++p) pos[frags_[p]] = p;
        neighbours_.resize(frags_.size());
        for (const auto& [a, b] : g_.cannot_link) {
            auto ia = pos.find(a);
            auto ib = pos.find(b);
            if (ia == pos.end() || ib == pos.end()) continue;
            neighbours_[ia->second].push_back(ib->second);
            neighbours_[ib->second].push_back(ia->second);
        }
        best_cost_ = 0.0;
        for (std::size_t f : frags_) best_cost_ += g_.fragments[f].cost_row[other_];
    }

    void run() { descend(0, 0.0); }

    const std::vector<std::size_t>& best() const { return best_; }
    const std::vector<std::size_t>& fragments() const { return frags_; }

private:
    bool feasible(std::size_t p, std::size_t label, std::size_t depth) const {
        if (label == other_) return true;
        for (std::size_t q : neighbours_[p]) {
            if (q < depth && assigned_[q] == label) return false;
        }
        return true;
    }

    double lower_bound(std::size_t depth, double cost) const {
        double lb = cost;
        for (std::size_t p = depth; p < frags_.size(); ++p) {
            const auto& row = g_.fragments[frags_[p]].cost_row;
            double cheapest = row[other_];
            for (std::size_t j = 0; j < other_; ++j) {
                if (row[j] < cheapest && feasible(p, j, depth)) cheapest = row[j];
            }
            lb += cheapest;
        }
        return lb;
    }

    void descend(std::size_t depth, double cost) {
        if (depth == frags_.size()) {
            // The initial incumbent is all-"other", which is lexicographically last,
            // so an equal-cost labelling reached first must displace it.
            if (cost < best_cost_ || (!found_ && cost <= best_cost_)) {
                best_cost_ = cost;
                best_ = assigned_;
                found_ = true;
            }
            return;
        }
        const double slack = 1e-12 * (1.0 + std::abs(best_cost_));
        if (lower_bound(depth, cost) > best_cost_ + slack) return;
        const auto& row = g_.fragments[frags_[depth]].cost_row;
        for (std::size_t label = 0; label <= other_; ++label) {
            if (!feasible(depth, label, depth)) continue;
            assigned_[depth] = label;
            descend(depth + 1, cost + row[label]);
        }
    }

    const FragmentGraph& g_;
    std::vector<std::size_t> frags_;
    std::size_t other_;
    std::vector<std::vector<std::size_t>> neighbours_;
    std::vector<std::size_t> assigned_;
    std::vector<std::size_t> best_;
    double best_cost_ = 0.0;
    bool found_ = false;
};

}  // namespace detail

inline Assignment solve_exact(const AssignmentProblem& problem) {
    const FragmentGraph g = collapse_fragments(problem);
    const std::size_t other = problem.costs.other_column();
    const auto order = detail::search_order(g);

    // Components of the fragment cannot-link graph, each kept in search order.
    UnionFind uf(g.fragments.size());
    for (const auto& [a, b] : g.cannot_link) uf.unite(a, b);
    std::map<std::size_t, std::vector<std::size_t>> components;
    for (std::size_t f : order) components[uf.find(f)].push_back(f);

    std::vector<std::size_t> fragment_labels(g.fragments.size(), other);
    for (auto& [root, frags] : components) {
        detail::ComponentSearch search(g, std::move(frags), other);
        search.run();
        for (std::size_t p = 0; p < search.fragments().size(); ++p) {
            fragment_labels[search.fragments()[p]] = search.best()[p];
        }
    }
    Assignment a;
    a.labels = detail::expand_labels(g, fragment_labels, problem.crop_ids.size());
    a.objective = detail::objective_of(problem, a.labels);
    return a;
}

inline constexpr double kBruteforceLimit = 1e7;

// Exhaustive enumeration over fragment labellings in lexicographic order.
// `enumerated`, when given, receives the number of labellings visited.
inline Assignment solve_bruteforce(const AssignmentProblem& problem, std::size_t* enumerated = nullptr) {
    const FragmentGraph g = collapse_fragments(problem);
    const std::size_t labels = problem.costs.cols();
    const std::size_t m = g.fragments.size();
    if (std::pow(static_cast<double>(labels), static_cast<double>(m)) > kBruteforceLimit) {
        throw Error("instance too large");
    }
    const auto order = detail::search_order(g);
    const std::size_t other = problem.costs.other_column();

    std::size_t total = 1;
    for (std::size_t p = 0; p < m; ++p) total *= labels;

    std::vector<std::size_t> best;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> fragment_labels(m);
    std::size_t count = 0;
    for (std::size_t code = 0; code < total; ++code) {
        ++count;
        // Digit p of `code` (most significant first) labels search position p.
        std::size_t rest = code;
        for (std::size_t p = m; p-- > 0;) {
            fragment_labels[order[p]] = rest % labels;
            rest /= labels;
        }
        bool ok = true;
        for (const auto& [a, b] : g.cannot_link) {
            if (fragment_labels[a] != other && fragment_labels[a] == fragment_labels[b]) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        double cost = 0.0;
        for (std::size_t p = 0; p < m; ++p) cost += g.fragments[order[p]].cost_row[fragment_labels[order[p]]];
        if (cost < best_cost) {
            best_cost = cost;
            best = fragment_labels;
        }
    }
    if (enumerated) *enumerated = count;
    Assignment a;
    a.labels = detail::expand_labels(g, best.empty() ? std::vector<std::size_t>(m, other) : best,
                                     problem.crop_ids.size());
    a.objective = detail::objective_of(problem, a.labels);
    return a;
}

inline constexpr double kObjectiveTolerance = 1e-9;

// True iff every crop has exactly one valid label, must-linked crops share a
// label, cannot-linked crops differ unless both are "other", and the stated
// objective matches the recomputed one.
inline bool verify(const std::map<std::string, std::size_t>& labels, double objective,
                   const AssignmentProblem& problem) {
    const auto index = detail::crop_index(problem);
    for (const auto& [id, label] : labels) {
        if (!index.contains(id)) throw Error("unknown crop id '" + id + "' in assignment");
    }
    if (labels.size() != problem.crop_ids.size()) return false;
    std::vector<std::size_t> by_row(problem.crop_ids.size());
    for (std::size_t i = 0; i < problem.crop_ids.size(); ++i) {
        const std::size_t label = labels.at(problem.crop_ids[i]);
        if (label >= problem.costs.cols()) return false;
        by_row[i] = label;
    }
    const std::size_t other = problem.costs.other_column();
    for (const auto& [a, b] : problem.constraints.must_link) {
        if (labels.at(a) != labels.at(b)) return false;
    }
    for (const auto& [a, b] : problem.constraints.cannot_link) {
        if (labels.at(a) == labels.at(b) && labels.at(a) != other) return false;
    }
    return std::abs(detail::objective_of(problem, by_row) - objective) <= kObjectiveTolerance;
}

inline std::map<std::string, std::size_t> label_map(const AssignmentProblem& problem, const Assignment& a) {
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < a.labels.size(); ++i) out[problem.crop_ids[i]] = a.labels[i];
    return out;
}

inline bool verify(const Assignment& a, const AssignmentProblem& problem) {
    if (a.labels.size() != problem.crop_ids.size()) return false;
    return verify(label_map(problem, a), a.objective, problem);
}

// crop id -> bank name or "other".
using Naming = std::map<std::string, std::string>;

inline Naming naming_of(const AssignmentProblem& problem, const Assignment& a, const CharacterBank& bank) {
    Naming out;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        out[problem.crop_ids[i]] = a.labels[i] < bank.size() ? bank.characters[a.labels[i]].name : kOtherName;
    }
    return out;
}

inline nlohmann::json assignment_to_json(const Naming& names, double objective) {
    return nlohmann::json{{"names", names}, {"objective", objective}};
}

// Reads the "names" map of an assignment or ground-truth document.
inline Naming naming_from_json(const nlohmann::json& doc) {
    try {
        if (!doc.is_object() || !doc.contains("names")) throw Error("document has no 'names' map");
        return doc.at("names").get<Naming>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed names map: ") + e.what());
    }
}

}  // namespace mangascript
