#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "mangascript/mangascript.hpp"

namespace support {

namespace ms = mangascript;

inline ms::AssignmentProblem problem_from_rows(const std::vector<std::vector<double>>& rows,
                                               ms::ConstraintSet constraints = {}) {
    const std::size_t k = rows.empty() ? 0 : rows.front().size() - 1;
    const double eta = rows.empty() ? ms::kDefaultEta : rows.front().back();
    ms::AssignmentProblem p;
    p.costs = ms::CostMatrix(rows.size(), k, eta);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) p.costs(i, j) = rows[i][j];
        p.crop_ids.push_back("c" + std::to_string(i));
    }
    p.constraints = std::move(constraints);
    return p;
}

// Random problem built from at most `max_fragments` must-link components, each
// carrying a hidden identity; cannot-links only join different identities, so
// the constraints are always consistent. Costs are multiples of 1/64 so every
// objective sum is exact in double and ties are common.
inline ms::AssignmentProblem random_problem(std::mt19937_64& rng, std::size_t max_fragments = 8,
                                            std::size_t max_k = 4) {
    std::uniform_int_distribution<std::size_t> kd(0, max_k);
    std::uniform_int_distribution<std::size_t> fd(1, max_fragments);
    std::uniform_int_distribution<int> cost(0, 96);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t k = kd(rng);
    const std::size_t f = fd(rng);
    const double eta = (16 + cost(rng)) / 64.0;

    std::uniform_int_distribution<std::size_t> extra(0, 2);
    std::vector<std::size_t> fragment;
    for (std::size_t g = 0; g < f; ++g) {
        const std::size_t size = 1 + extra(rng);
        for (std::size_t c = 0; c < size; ++c) fragment.push_back(g);
    }
    std::shuffle(fragment.begin(), fragment.end(), rng);
    std::uniform_int_distribution<std::size_t> idd(0, f - 1);
    std::vector<std::size_t> identity(f);
    for (auto& i : identity) i = idd(rng);

    const std::size_t n = fragment.size();
    std::vector<std::vector<double>> rows(n, std::vector<double>(k + 1, eta));
    for (auto& r : rows) {
        for (std::size_t j = 0; j < k; ++j) r[j] = cost(rng) / 64.0;
    }
    ms::ConstraintSet cs;
    auto id = [](std::size_t i) { return "c" + std::to_string(i); };
    // chain each fragment so it is one component, then sprinkle extra links
    std::vector<long> last(f, -1);
    for (std::size_t a = 0; a < n; ++a) {
        if (last[fragment[a]] >= 0) cs.must_link.insert(ms::unordered_pair(id(last[fragment[a]]), id(a)));
        last[fragment[a]] = static_cast<long>(a);
    }
    const double ml_rate = u(rng), cl_rate = u(rng);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            if (fragment[a] == fragment[b]) {
                if (u(rng) < ml_rate) cs.must_link.insert(ms::unordered_pair(id(a), id(b)));
            } else if (identity[fragment[a]] != identity[fragment[b]] && u(rng) < cl_rate) {
                cs.cannot_link.insert(ms::unordered_pair(id(a), id(b)));
            }
        }
    }
    return problem_from_rows(rows, cs);
}

inline ms::Embedding unit(std::vector<double> v) { return ms::normalized(v); }

inline ms::CharacterNode crop(const std::string& id, ms::Embedding e, ms::BoundingBox box = {0, 0, 10, 10},
                              std::size_t page = 0) {
    ms::CharacterNode c;
    c.id = id;
    c.page_index = page;
    c.bbox = box;
    c.embedding = std::move(e);
    return c;
}

inline ms::TextNode text(const std::string& id, ms::BoundingBox box, std::string content = {},
                         double essential = 1.0) {
    ms::TextNode t;
    t.id = id;
    t.bbox = box;
    t.content = content.empty() ? id : std::move(content);
    t.essential_score = essential;
    return t;
}

inline ms::PanelNode panel(const std::string& id, ms::BoundingBox box) { return {id, 0, box}; }

class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() / ("mangascript_" + name + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string operator/(const std::string& leaf) const { return (path_ / leaf).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace support
