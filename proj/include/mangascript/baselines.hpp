#pragma once

// Clustering-based naming baselines: K-means with k+1 clusters, and
// isolation-forest filtering followed by K-means with k clusters. Cluster
// centres are named by Hungarian matching against the bank exemplars.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mangascript/character_bank.hpp"
#include "mangascript/embedding.hpp"
#include "mangascript/error.hpp"
#include "mangascript/hungarian.hpp"
#include "mangascript/solver.hpp"

namespace mangascript {

struct ClusteringResult {
    std::vector<std::size_t> assignments;  // cluster per point
    std::vector<Embedding> centroids;
    double inertia = 0.0;
    std::vector<double> inertia_history;  // after each assignment step
    std::size_t iterations = 0;
};

inline constexpr std::size_t kKmeansMaxIterations = 300;
inline constexpr double kKmeansShiftTolerance = 1e-6;

// k-means++ seeding: first centre uniform, the rest by squared-distance sampling.
inline std::vector<std::size_t> kmeanspp_seeds(std::span<const Embedding> points, std::size_t nclusters,
                                               std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> seeds;
    std::uniform_int_distribution<std::size_t> first(0, points.size() - 1);
    seeds.push_back(first(rng));
    std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());
    while (seeds.size() < nclusters) {
        const auto& last = points[seeds.back()];
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            d2[i] = std::min(d2[i], squared_distance(points[i], last));
            total += d2[i];
        }
        if (total <= 0.0) {
            // Every point coincides with a centre; take the first unused index.
            std::size_t next = 0;
            while (std::find(seeds.begin(), seeds.end(), next) != seeds.end()) ++next;
            seeds.push_back(next);
            continue;
        }
        std::uniform_real_distribution<double> u(0.0, total);
        const double target = u(rng);
        double acc = 0.0;
        std::size_t pick = points.size() - 1;  // reached only through rounding
        for (std::size_t i = 0; i < points.size(); ++i) {
            acc += d2[i];
            if (d2[i] > 0.0 && acc >= target) {
                pick = i;
                break;
            }
        }
        seeds.push_back(pick);
    }
    return seeds;
}

namespace detail {

inline std::size_t nearest_centroid(const Embedding& p, const std::vector<Embedding>& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

}  // namespace detail

// Lloyd iterations from explicit initial centroids. Stops when no centroid
// moves more than 1e-6 or after 300 iterations. Empty clusters keep their
// previous centroid.
inline ClusteringResult lloyd(std::span<const Embedding> points, std::vector<Embedding> centroids) {
    ClusteringResult r;
    r.assignments.assign(points.size(), 0);
    const std::size_t dim = points.front().size();
    for (std::size_t it = 0; it < kKmeansMaxIterations; ++it) {
        double inertia = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            r.assignments[i] = detail::nearest_centroid(points[i], centroids);
            inertia += squared_distance(points[i], centroids[r.assignments[i]]);
        }
        r.inertia_history.push_back(inertia);

        std::vector<Embedding> next(centroids.size(), Embedding(dim, 0.0));
        std::vector<std::size_t> counts(centroids.size(), 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            ++counts[r.assignments[i]];
            for (std::size_t d = 0; d < dim; ++d) next[r.assignments[i]][d] += points[i][d];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            if (counts[c] == 0) {
                next[c] = centroids[c];
                continue;
            }
            for (double& x : next[c]) x /= static_cast<double>(counts[c]);
            shift = std::max(shift, distance(next[c], centroids[c]));
        }
        centroids = std::move(next);
        r.iterations = it + 1;
        if (shift < kKmeansShiftTolerance) break;
    }
    r.inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        r.assignments[i] = detail::nearest_centroid(points[i], centroids);
        r.inertia += squared_distance(points[i], centroids[r.assignments[i]]);
    }
    r.centroids = std::move(centroids);
    return r;
}

inline ClusteringResult kmeans(std::span<const Embedding> points, std::size_t nclusters, std::uint64_t seed) {
    if (points.empty()) throw Error("kmeans: empty input");
    if (nclusters == 0) throw Error("kmeans: nclusters must be positive");
    if (nclusters > points.size()) throw Error("kmeans: more clusters than points");
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) throw Error("embedding dimension mismatch");
    }
    std::vector<Embedding> init;
    for (std::size_t s : kmeanspp_seeds(points, nclusters, seed)) init.push_back(points[s]);
    return lloyd(points, std::move(init));
}

// ---------------------------------------------------------------------------
// Isolation forest

inline double average_path_length(std::size_t n) {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    constexpr double euler_gamma = 0.5772156649015329;
    const double m = static_cast<double>(n);
    return 2.0 * (std::log(m - 1.0) + euler_gamma) - 2.0 * (m - 1.0) / m;
}

struct IsolationForestParams {
    std::size_t ntrees = 100;
    std::size_t subsample = 256;
    std::uint64_t seed = 0;
};

namespace detail {

struct IsolationNode {
    std::size_t feature = 0;
    double split = 0.0;
    std::size_t size = 0;  // leaf only
    std::unique_ptr<IsolationNode> left;
    std::unique_ptr<IsolationNode> right;

    bool leaf() const { return !left; }
};

inline std::unique_ptr<IsolationNode> grow_isolation_tree(std::span<const Embedding> points,
                                                          std::vector<std::size_t> idx, std::size_t depth,
                                                          std::size_t limit, std::mt19937_64& rng) {
    auto node = std::make_unique<IsolationNode>();
    node->size = idx.size();
    if (depth >= limit || idx.size() <= 1) return node;

    const std::size_t dim = points.front().size();
    // Only features with spread can split; a node where every feature is
    // constant is an external node.
    std::vector<std::size_t> splittable;
    for (std::size_t f = 0; f < dim; ++f) {
        double lo = points[idx[0]][f], hi = lo;
        for (std::size_t i : idx) {
            lo = std::min(lo, points[i][f]);
            hi = std::max(hi, points[i][f]);
        }
        if (hi > lo) splittable.push_back(f);
    }
    if (splittable.empty()) return node;

    std::uniform_int_distribution<std::size_t> pick(0, splittable.size() - 1);
    const std::size_t f = splittable[pick(rng)];
    double lo = points[idx[0]][f], hi = lo;
    for (std::size_t i : idx) {
        lo = std::min(lo, points[i][f]);
        hi = std::max(hi, points[i][f]);
    }
    std::uniform_real_distribution<double> at(lo, hi);
    const double split = at(rng);
    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) (points[i][f] < split ? left : right).push_back(i);
    if (left.empty() || right.empty()) return node;

    node->feature = f;
    node->split = split;
    node->left = grow_isolation_tree(points, std::move(left), depth + 1, limit, rng);
    node->right = grow_isolation_tree(points, std::move(right), depth + 1, limit, rng);
    return node;
}

inline double path_length(const IsolationNode& node, const Embedding& p, std::size_t depth) {
    if (node.leaf()) return static_cast<double>(depth) + average_path_length(node.size);
    return path_length(p[node.feature] < node.split ? *node.left : *node.right, p, depth + 1);
}

}  // namespace detail

// Anomaly score s = 2^(-E[h(x)] / c(psi)) per point; higher is more anomalous.
inline std::vector<double> iforest_scores(std::span<const Embedding> points, const IsolationForestParams& params) {
    if (points.size() < 2) throw Error("iforest: need at least 2 points");
    if (params.ntrees == 0) throw Error("iforest: ntrees must be positive");
    const std::size_t psi = std::clamp<std::size_t>(params.subsample, 2, points.size());
    const auto limit = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(psi))));
    std::mt19937_64 rng(params.seed);

    std::vector<double> total(points.size(), 0.0);
    std::vector<std::size_t> all(points.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t t = 0; t < params.ntrees; ++t) {
        // Partial Fisher-Yates gives a uniform subsample without replacement.
        for (std::size_t i = 0; i < psi; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
            std::swap(all[i], all[pick(rng)]);
        }
        std::vector<std::size_t> sample(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(psi));
        std::sort(sample.begin(), sample.end());
        const auto tree = detail::grow_isolation_tree(points, std::move(sample), 0, limit, rng);
        for (std::size_t i = 0; i < points.size(); ++i) total[i] += detail::path_length(*tree, points[i], 0);
    }
    const double c = average_path_length(psi);
    std::vector<double> scores(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        scores[i] = std::pow(2.0, -(total[i] / static_cast<double>(params.ntrees)) / c);
    }
    return scores;
}

// ---------------------------------------------------------------------------
// Naming baselines

struct BaselineOptions {
    std::uint64_t seed = 0;
    std::size_t ntrees = 100;
    std::size_t subsample = 256;
    double anomaly_threshold = 0.55;
};

struct BaselineNaming {
    Naming names;
    bool fallback = false;  // iforest filtering left too few crops; plain K-means was used
};

namespace detail {

inline std::vector<Embedding> representatives(const CharacterBank& bank) {
    std::vector<Embedding> reps;
    for (const auto& c : bank.characters) reps.push_back(representative_embedding(c));
    return reps;
}

// Hungarian match of unit-normalized centroids (rows) to exemplars (columns)
// on Euclidean cost. Returns bank index per cluster, -1 when unmatched.
inline std::vector<long> match_centroids(const std::vector<Embedding>& centroids, const std::vector<Embedding>& reps) {
    Matrix cost(centroids.size(), std::vector<double>(reps.size()));
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double n = norm(centroids[c]);
        Embedding unit = centroids[c];
        if (n > 0.0) {
            for (double& x : unit) x /= n;
        }
        for (std::size_t j = 0; j < reps.size(); ++j) cost[c][j] = distance(unit, reps[j]);
    }
    return hungarian(cost).row_to_col;
}

}  // namespace detail

inline Naming name_by_kmeans(std::span<const CharacterNode> crops, const CharacterBank& bank,
                             const BaselineOptions& options = {}) {
    const std::size_t k = bank.size();
    if (k == 0) throw Error("kmeans baseline needs a non-empty bank");
    if (crops.size() < k + 1) throw Error("too few crops for kmeans baseline");
    std::vector<Embedding> points;
    for (const auto& c : crops) points.push_back(c.embedding);
    const auto clusters = kmeans(points, k + 1, options.seed);
    const auto matched = detail::match_centroids(clusters.centroids, detail::representatives(bank));
    Naming out;
    for (std::size_t i = 0; i < crops.size(); ++i) {
        const long j = matched[clusters.assignments[i]];
        out[crops[i].id] = j < 0 ? kOtherName : bank.characters[static_cast<std::size_t>(j)].name;
    }
    return out;
}

inline BaselineNaming name_by_iforest_kmeans(std::span<const CharacterNode> crops, const CharacterBank& bank,
                                             const BaselineOptions& options = {}) {
    const std::size_t k = bank.size();
    if (k == 0) throw Error("iforest baseline needs a non-empty bank");
    if (crops.size() < 2) throw Error("too few crops for iforest baseline");
    std::vector<Embedding> points;
    for (const auto& c : crops) points.push_back(c.embedding);
    const auto scores = iforest_scores(points, {options.ntrees, options.subsample, options.seed});

    std::vector<std::size_t> inliers;
    for (std::size_t i = 0; i < crops.size(); ++i) {
        if (scores[i] < options.anomaly_threshold) inliers.push_back(i);
    }
    if (inliers.size() < k) {
        return {name_by_kmeans(crops, bank, options), true};
    }
    std::vector<Embedding> kept;
    for (std::size_t i : inliers) kept.push_back(points[i]);
    const auto clusters = kmeans(kept, k, options.seed);
    const auto matched = detail::match_centroids(clusters.centroids, detail::representatives(bank));

    BaselineNaming out;
    for (const auto& c : crops) out.names[c.id] = kOtherName;
    for (std::size_t x = 0; x < inliers.size(); ++x) {
        const long j = matched[clusters.assignments[x]];
        if (j >= 0) out.names[crops[inliers[x]].id] = bank.characters[static_cast<std::size_t>(j)].name;
    }
    return out;
}

}  // namespace mangascript
