#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "support.hpp"

namespace ms = mangascript;

namespace {

double permutation_min(const ms::Matrix& c) {
    std::vector<std::size_t> perm(c.front().size());
    std::iota(perm.begin(), perm.end(), 0u);
    double best = 1e300;
    do {
        double s = 0;
        for (std::size_t i = 0; i < c.size(); ++i) s += c[i][perm[i]];
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

std::vector<ms::Embedding> blob(std::mt19937_64& rng, const ms::Embedding& centre, double radius, std::size_t n) {
    std::normal_distribution<double> g(0.0, radius);
    std::vector<ms::Embedding> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto p = centre;
        for (double& x : p) x += g(rng);
        out.push_back(p);
    }
    return out;
}

}  // namespace

TEST(Hungarian, Examples) {
    const auto id = ms::hungarian({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
    EXPECT_EQ(id.row_to_col, (std::vector<long>{0, 1, 2}));
    EXPECT_DOUBLE_EQ(id.cost, 0.0);

    const auto two = ms::hungarian({{1, 2}, {2, 1}});
    EXPECT_EQ(two.row_to_col, (std::vector<long>{0, 1}));
    EXPECT_DOUBLE_EQ(two.cost, 2.0);

    EXPECT_THROW(ms::hungarian({}), ms::Error);
    EXPECT_THROW(ms::hungarian({{1, 2}, {3}}), ms::Error);
}

TEST(Hungarian, MatchesPermutationScan) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> d(0, 9);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + trial % 5;
        ms::Matrix c(n, std::vector<double>(n));
        for (auto& r : c) {
            for (auto& x : r) x = d(rng);
        }
        const auto m = ms::hungarian(c);
        EXPECT_DOUBLE_EQ(m.cost, permutation_min(c));
        std::vector<long> cols = m.row_to_col;
        std::sort(cols.begin(), cols.end());
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(cols[i], static_cast<long>(i));

        // Lexicographically smallest among optimal permutations.
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0u);
        do {
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) s += c[i][perm[i]];
            if (s == m.cost) break;
        } while (std::next_permutation(perm.begin(), perm.end()));
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(m.row_to_col[i], static_cast<long>(perm[i]));
    }
}

TEST(Hungarian, Rectangular) {
    // 3 clusters, 2 characters: one row stays unmatched.
    const ms::Matrix c{{0.1, 0.9}, {0.8, 0.2}, {0.5, 0.5}};
    const auto m = ms::hungarian(c);
    EXPECT_EQ(m.row_to_col, (std::vector<long>{0, 1, -1}));
    EXPECT_NEAR(m.cost, 0.3, 1e-12);

    const auto wide = ms::hungarian({{0.4, 0.1, 0.3}});
    EXPECT_EQ(wide.row_to_col, (std::vector<long>{1}));

    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> d(0, 9);
    for (int trial = 0; trial < 100; ++trial) {
        ms::Matrix tall(4, std::vector<double>(2));
        for (auto& r : tall) {
            for (auto& x : r) x = d(rng);
        }
        double best = 1e300;
        for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
                if (a != b) best = std::min(best, tall[a][0] + tall[b][1]);
            }
        }
        const auto m2 = ms::hungarian(tall);
        EXPECT_DOUBLE_EQ(m2.cost, best);
        EXPECT_EQ(std::count(m2.row_to_col.begin(), m2.row_to_col.end(), -1), 2);
    }
}

TEST(KMeans, SingleClusterIsMean) {
    const std::vector<ms::Embedding> pts{{0, 0}, {2, 0}, {4, 3}, {2, 5}};
    const auto r = ms::kmeans(pts, 1, 0);
    EXPECT_NEAR(r.centroids[0][0], 2.0, 1e-12);
    EXPECT_NEAR(r.centroids[0][1], 2.0, 1e-12);
    EXPECT_THROW(ms::kmeans(pts, 5, 0), ms::Error);
    EXPECT_THROW(ms::kmeans(std::vector<ms::Embedding>{}, 1, 0), ms::Error);
}

TEST(KMeans, SeparableGroups) {
    std::mt19937_64 rng(1);
    auto a = blob(rng, {0, 0, 0}, 0.01, 10);
    const auto b = blob(rng, {5, 5, 5}, 0.01, 10);
    a.insert(a.end(), b.begin(), b.end());
    const auto r = ms::kmeans(a, 2, 4);
    for (std::size_t i = 1; i < 10; ++i) EXPECT_EQ(r.assignments[i], r.assignments[0]);
    for (std::size_t i = 11; i < 20; ++i) EXPECT_EQ(r.assignments[i], r.assignments[10]);
    EXPECT_NE(r.assignments[0], r.assignments[10]);
}

TEST(KMeans, MatchesHandLloydTrace) {
    const std::vector<ms::Embedding> pts{{0, 0}, {1, 0}, {0, 1}, {5, 5}, {6, 5}, {2, 2}};
    const auto seeds = ms::kmeanspp_seeds(pts, 2, 7);
    ASSERT_EQ(seeds.size(), 2u);
    ASSERT_NE(seeds[0], seeds[1]);

    // Plain Lloyd, written out independently.
    double c[2][2] = {{pts[seeds[0]][0], pts[seeds[0]][1]}, {pts[seeds[1]][0], pts[seeds[1]][1]}};
    int assign[6] = {};
    for (int it = 0; it < 300; ++it) {
        for (int i = 0; i < 6; ++i) {
            double d0 = 0, d1 = 0;
            for (int x = 0; x < 2; ++x) {
                d0 += (pts[i][x] - c[0][x]) * (pts[i][x] - c[0][x]);
                d1 += (pts[i][x] - c[1][x]) * (pts[i][x] - c[1][x]);
            }
            assign[i] = d1 < d0 ? 1 : 0;
        }
        double next[2][2] = {};
        int count[2] = {};
        for (int i = 0; i < 6; ++i) {
            ++count[assign[i]];
            for (int x = 0; x < 2; ++x) next[assign[i]][x] += pts[i][x];
        }
        double shift = 0;
        for (int k = 0; k < 2; ++k) {
            for (int x = 0; x < 2; ++x) {
                if (count[k] > 0) next[k][x] /= count[k];
                else next[k][x] = c[k][x];
                shift = std::max(shift, std::abs(next[k][x] - c[k][x]));
                c[k][x] = next[k][x];
            }
        }
        if (shift < 1e-6) break;
    }
    const auto r = ms::kmeans(pts, 2, 7);
    for (int i = 0; i < 6; ++i) EXPECT_EQ(r.assignments[i], static_cast<std::size_t>(assign[i]));
    for (int k = 0; k < 2; ++k) {
        for (int x = 0; x < 2; ++x) EXPECT_NEAR(r.centroids[k][x], c[k][x], 1e-12);
    }
}

TEST(KMeans, InertiaNonIncreasingAndDeterministic) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;
    std::vector<ms::Embedding> pts(200, ms::Embedding(4));
    for (auto& p : pts) {
        for (auto& x : p) x = g(rng);
    }
    const auto r = ms::kmeans(pts, 6, 5);
    ASSERT_FALSE(r.inertia_history.empty());
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i) {
        EXPECT_LE(r.inertia_history[i], r.inertia_history[i - 1] + 1e-9);
    }
    double inertia = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) inertia += ms::squared_distance(pts[i], r.centroids[r.assignments[i]]);
    EXPECT_NEAR(r.inertia, inertia, 1e-9);
    const auto again = ms::kmeans(pts, 6, 5);
    EXPECT_EQ(again.assignments, r.assignments);
}

TEST(IsolationForest, FarPointScoresHighest) {
    std::mt19937_64 rng(0);
    auto pts = blob(rng, {0, 0, 0, 0}, 0.1, 20);
    pts.push_back({1.0, 1.0, 1.0, 1.0});
    const auto s = ms::iforest_scores(pts, {100, 256, 0});
    EXPECT_EQ(std::max_element(s.begin(), s.end()) - s.begin(), 20);
    for (double x : s) {
        EXPECT_GT(x, 0.0);
        EXPECT_LT(x, 1.0);
    }
}

TEST(IsolationForest, IdenticalPointsAndClamping) {
    const std::vector<ms::Embedding> same(10, ms::Embedding{0.3, 0.3});
    const auto s = ms::iforest_scores(same, {50, 256, 1});
    for (double x : s) EXPECT_DOUBLE_EQ(x, s[0]);

    std::mt19937_64 rng(2);
    const auto pts = blob(rng, {0, 0}, 1.0, 50);
    EXPECT_EQ(ms::iforest_scores(pts, {30, 512, 9}), ms::iforest_scores(pts, {30, 50, 9}));
    EXPECT_THROW(ms::iforest_scores(std::vector<ms::Embedding>{{0, 0}}, {}), ms::Error);
}

TEST(IsolationForest, AveragePathLength) {
    EXPECT_DOUBLE_EQ(ms::average_path_length(1), 0.0);
    EXPECT_DOUBLE_EQ(ms::average_path_length(2), 1.0);
    EXPECT_NEAR(ms::average_path_length(256), 2 * (std::log(255.0) + 0.5772156649015329) - 2 * 255.0 / 256.0, 1e-12);
}

namespace {

struct Scene {
    ms::CharacterBank bank;
    std::vector<ms::CharacterNode> crops;
    ms::Naming truth;
};

Scene separable_scene(std::uint64_t seed, bool with_outliers) {
    std::mt19937_64 rng(seed);
    Scene s;
    std::vector<ms::Embedding> centres{support::unit({1, 0, 0, 0, 0, 0}), support::unit({0, 1, 0, 0, 0, 0})};
    s.bank.characters = {{"A", {centres[0]}}, {"B", {centres[1]}}};
    std::size_t id = 0;
    for (std::size_t j = 0; j < 2; ++j) {
        for (const auto& p : blob(rng, centres[j], 0.01, 8)) {
            s.crops.push_back(support::crop("x" + std::to_string(id++), ms::normalized(p)));
            s.truth[s.crops.back().id] = s.bank.characters[j].name;
        }
    }
    if (with_outliers) {
        for (const auto& p : blob(rng, support::unit({0, 0, 0, 0, 1, 0}), 0.01, 3)) {
            s.crops.push_back(support::crop("x" + std::to_string(id++), ms::normalized(p)));
            s.truth[s.crops.back().id] = "other";
        }
    }
    return s;
}

}  // namespace

TEST(NamingBaselines, KMeansNamesSeparableClusters) {
    const auto s = separable_scene(4, true);
    EXPECT_EQ(ms::name_by_kmeans(s.crops, s.bank, {}), s.truth);

    ms::CharacterBank one{{{"A", {support::unit({1, 0})}}}, 0.75};
    std::vector<ms::CharacterNode> crops;
    for (int i = 0; i < 4; ++i) crops.push_back(support::crop("y" + std::to_string(i), support::unit({1, 0})));
    crops.push_back(support::crop("far", support::unit({-1, 0.2})));
    const auto names = ms::name_by_kmeans(crops, one, {});
    for (int i = 0; i < 4; ++i) EXPECT_EQ(names.at("y" + std::to_string(i)), "A");
    EXPECT_EQ(names.at("far"), "other");

    EXPECT_THROW(ms::name_by_kmeans(std::vector<ms::CharacterNode>(crops.begin(), crops.begin() + 1), one, {}),
                 ms::Error);
}

TEST(NamingBaselines, IForestKMeansSeparable) {
    const auto s = separable_scene(4, true);
    ms::BaselineOptions opts;
    const auto r = ms::name_by_iforest_kmeans(s.crops, s.bank, opts);
    EXPECT_FALSE(r.fallback);
    // Small samples can flag a genuine crop as anomalous, so only check that
    // outliers are dropped and that no character is confused with another.
    std::size_t named = 0;
    for (const auto& [id, name] : s.truth) {
        if (name == "other") {
            EXPECT_EQ(r.names.at(id), "other") << id;
        } else if (r.names.at(id) != "other") {
            EXPECT_EQ(r.names.at(id), name) << id;
            ++named;
        }
    }
    EXPECT_GE(named, 14u);
}

TEST(NamingBaselines, IForestWithoutOutliersEqualsKClusterKMeans) {
    const auto s = separable_scene(6, false);
    ms::BaselineOptions opts;
    opts.anomaly_threshold = 1.0;  // filters nothing
    const auto r = ms::name_by_iforest_kmeans(s.crops, s.bank, opts);
    std::vector<ms::Embedding> pts;
    for (const auto& c : s.crops) pts.push_back(c.embedding);
    const auto km = ms::kmeans(pts, 2, opts.seed);
    const ms::Matrix cost{{ms::distance(ms::normalized(km.centroids[0]), s.bank.characters[0].exemplars[0]),
                           ms::distance(ms::normalized(km.centroids[0]), s.bank.characters[1].exemplars[0])},
                          {ms::distance(ms::normalized(km.centroids[1]), s.bank.characters[0].exemplars[0]),
                           ms::distance(ms::normalized(km.centroids[1]), s.bank.characters[1].exemplars[0])}};
    const auto m = ms::hungarian(cost);
    for (std::size_t i = 0; i < s.crops.size(); ++i) {
        EXPECT_EQ(r.names.at(s.crops[i].id), s.bank.characters[m.row_to_col[km.assignments[i]]].name);
    }
    EXPECT_EQ(r.names, s.truth);
}

TEST(NamingBaselines, FallbackWhenFilteringRemovesTooMuch) {
    const auto s = separable_scene(4, true);
    ms::BaselineOptions opts;
    opts.anomaly_threshold = 0.0;  // everything is an outlier
    const auto r = ms::name_by_iforest_kmeans(s.crops, s.bank, opts);
    EXPECT_TRUE(r.fallback);
    EXPECT_EQ(r.names, ms::name_by_kmeans(s.crops, s.bank, opts));
}

TEST(NamingBaselines, LookalikesInOnePanel) {
    // Two look-alike characters appear together in one panel on every page.
    // K-means cannot separate them; the solver's cannot-links can.
    std::size_t kmeans_collisions = 0, solver_collisions = 0;
    double kmeans_acc = 0, solver_acc = 0, iforest_acc = 0;
    const int runs = 10;
    for (int seed = 0; seed < runs; ++seed) {
        ms::SynthConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(seed);
        cfg.noise_sigma = 0.15;
        cfg.lookalike_distance = 0.15;
        cfg.edge_noise = 0.0;
        cfg.pages = 8;
        const auto s = ms::generate(cfg);
        const auto crops = s.chapter.all_characters();
        const auto km = ms::name_by_kmeans(crops, s.bank, {});
        const auto sol = ms::name_chapter(s.chapter, s.bank).names;
        const auto ifk = ms::name_by_iforest_kmeans(crops, s.bank, {}).names;
        for (const auto& page : s.chapter.pages) {
            if (page.characters.size() < 2) continue;
            const auto& a = page.characters[0].id;
            const auto& b = page.characters[1].id;
            kmeans_collisions += km.at(a) != "other" && km.at(a) == km.at(b);
            solver_collisions += sol.at(a) != "other" && sol.at(a) == sol.at(b);
        }
        kmeans_acc += ms::naming_accuracy(s.truth.names, km);
        solver_acc += ms::naming_accuracy(s.truth.names, sol);
        iforest_acc += ms::naming_accuracy(s.truth.names, ifk);
    }
    EXPECT_GT(kmeans_collisions, 0u);
    EXPECT_EQ(solver_collisions, 0u);
    EXPECT_GE(solver_acc, kmeans_acc);
    EXPECT_GE(solver_acc, iforest_acc);
}
