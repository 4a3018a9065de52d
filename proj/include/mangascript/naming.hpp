#pragma once

// Chapter-wide naming: constraints from per-page edges, cost matrix from
// the bank, exact solve.

#include <optional>
#include <string>

#include "mangascript/chapter.hpp"
#include "mangascript/character_bank.hpp"
#include "mangascript/constraints.hpp"
#include "mangascript/error.hpp"
#include "mangascript/ground_truth.hpp"
#include "mangascript/solver.hpp"

namespace mangascript {

struct NamingOptions {
    double must_link_threshold = kDefaultMustLinkThreshold;
    CannotLinkMode cannot_link = CannotLinkMode::same_page;
    bool use_gt_constraints = false;  // derive constraints from gt_name fields instead of edges
    std::optional<ConstraintSet> overrides;
};

struct NamingResult {
    AssignmentProblem problem;
    Assignment assignment;
    Naming names;
};

inline ConstraintSet chapter_constraints(const Chapter& chapter, const NamingOptions& options) {
    ConstraintSet base;
    if (options.use_gt_constraints) {
        std::map<std::string, std::string> identity;
        for (const auto& page : chapter.pages) {
            for (const auto& c : page.characters) {
                if (!c.gt_name) throw Error("crop '" + c.id + "' has no gt_name for ground-truth constraints");
                identity[c.id] = identity_key(c.id, *c.gt_name);
            }
        }
        base = constraints_from_identities(chapter, identity, options.cannot_link);
    } else {
        base = extract_constraints(chapter, options.must_link_threshold, options.cannot_link);
    }
    if (options.overrides) return merge_constraints(base, *options.overrides);
    return base;
}

inline NamingResult name_chapter(const Chapter& chapter, const CharacterBank& bank, const NamingOptions& options = {}) {
    NamingResult r;
    const auto crops = chapter.all_characters();
    r.problem = make_problem(crops, bank, chapter_constraints(chapter, options));
    r.assignment = solve_exact(r.problem);
    r.names = naming_of(r.problem, r.assignment, bank);
    return r;
}

}  // namespace mangascript
