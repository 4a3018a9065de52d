#pragma once

// Synthetic chapters with complete ground truth.
//
// A bank of well-separated unit vectors plays the principal characters.
// Each page gets a grid of panels, character crops whose embeddings are their
// identity vector plus isotropic Gaussian noise, texts spoken by crops on the
// page, optional tails, and edge scores derived from the ground truth with a
// configurable flip rate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mangascript/chapter.hpp"
#include "mangascript/character_bank.hpp"
#include "mangascript/error.hpp"
#include "mangascript/ground_truth.hpp"

namespace mangascript {

struct SynthConfig {
    std::uint64_t seed = 0;
    std::size_t k_bank = 4;
    std::size_t pages = 5;
    std::size_t panels_min = 2;
    std::size_t panels_max = 6;
    std::size_t crops_min = 2;
    std::size_t crops_max = 6;
    std::size_t texts_min = 1;
    std::size_t texts_max = 6;
    std::size_t embedding_dim = 32;
    double noise_sigma = 0.05;  // expected norm of the embedding noise
    double other_rate = 0.2;
    double edge_noise = 0.05;
    double essential_rate = 0.8;
    double tail_rate = 0.5;
    // When positive, bank character 1 is placed this far from character 0 and
    // both appear together in one panel on every page.
    double lookalike_distance = 0.0;
    double eta = kDefaultEta;

    void validate() const {
        if (k_bank < 1) throw Error("synth: k_bank must be at least 1");
        if (embedding_dim < 2) throw Error("synth: embedding_dim must be at least 2");
        if (panels_min < 1 || panels_min > panels_max) throw Error("synth: invalid panels range");
        if (crops_min > crops_max) throw Error("synth: invalid crops range");
        if (texts_min > texts_max) throw Error("synth: invalid texts range");
        if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw Error("synth: noise_sigma must be >= 0");
        if (!(other_rate >= 0.0 && other_rate < 1.0)) throw Error("synth: other_rate must lie in [0,1)");
        if (!(edge_noise >= 0.0 && edge_noise < 1.0)) throw Error("synth: edge_noise must lie in [0,1)");
        if (!(essential_rate > 0.0 && essential_rate <= 1.0)) throw Error("synth: essential_rate must lie in (0,1]");
        if (!(tail_rate >= 0.0 && tail_rate <= 1.0)) throw Error("synth: tail_rate must lie in [0,1]");
        if (!(lookalike_distance >= 0.0 && lookalike_distance <= 2.0)) {
            throw Error("synth: lookalike_distance must lie in [0,2]");
        }
        if (!(eta > 0.0)) throw Error("synth: eta must be positive");
    }
};

struct SynthChapter {
    Chapter chapter;
    CharacterBank bank;
    GroundTruth truth;
};

inline constexpr std::size_t kBankMaxTries = 100000;
inline constexpr double kPageWidth = 1000.0;
inline constexpr double kPageHeight = 1400.0;

namespace detail {

inline Embedding random_unit(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    while (true) {
        Embedding v(dim);
        for (double& x : v) x = g(rng);
        if (norm(v) > 1e-9) return normalized(v);
    }
}

inline double round_to(double x, double scale) { return std::round(x * scale) / scale; }

}  // namespace detail

// `k_bank` unit vectors, pairwise at least 4 * noise_sigma apart, one exemplar each.
inline CharacterBank generate_bank(const SynthConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed * 0x9E3779B97F4A7C15ULL + 1);
    const double min_gap = 4.0 * config.noise_sigma;
    std::vector<Embedding> vectors;
    std::size_t tries = 0;
    while (vectors.size() < config.k_bank) {
        if (++tries > kBankMaxTries) throw Error("synth: separation unachievable for the given dim/k/sigma");
        auto v = detail::random_unit(config.embedding_dim, rng);
        const bool ok = std::all_of(vectors.begin(), vectors.end(),
                                    [&](const Embedding& u) { return distance(u, v) >= min_gap; });
        if (ok) vectors.push_back(std::move(v));
    }
    if (config.lookalike_distance > 0.0 && vectors.size() >= 2) {
        // v1 = cos(t) v0 + sin(t) w with w orthogonal to v0, |v1 - v0| = 2 sin(t/2).
        const Embedding& v0 = vectors[0];
        Embedding w = detail::random_unit(config.embedding_dim, rng);
        double dot = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) dot += w[i] * v0[i];
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= dot * v0[i];
        w = normalized(w);
        const double t = 2.0 * std::asin(config.lookalike_distance / 2.0);
        Embedding v1(v0.size());
        for (std::size_t i = 0; i < v1.size(); ++i) v1[i] = std::cos(t) * v0[i] + std::sin(t) * w[i];
        vectors[1] = normalized(v1);
    }
    CharacterBank bank;
    bank.eta = config.eta;
    for (std::size_t j = 0; j < vectors.size(); ++j) {
        const std::string name = "char_" + std::string(j < 10 ? "0" : "") + std::to_string(j);
        bank.characters.push_back({name, {vectors[j]}});
    }
    return bank;
}

inline SynthChapter generate_chapter(const CharacterBank& bank, const SynthConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed * 0xD1B54A32D192ED03ULL + 7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double noise_scale = config.noise_sigma / std::sqrt(static_cast<double>(config.embedding_dim));
    auto range = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    auto noisy_score = [&](bool truth) {
        bool b = truth;
        if (unif(rng) < config.edge_noise) b = !b;
        const double s = b ? 0.55 + 0.45 * unif(rng) : 0.45 * unif(rng);
        return detail::round_to(s, 1e4);
    };
    auto random_box_in = [&](const BoundingBox& area, double w, double h) {
        w = std::min(w, area.width() - 2.0);
        h = std::min(h, area.height() - 2.0);
        const double x = area.x1 + 1.0 + unif(rng) * (area.width() - w - 2.0);
        const double y = area.y1 + 1.0 + unif(rng) * (area.height() - h - 2.0);
        return BoundingBox{detail::round_to(x, 10.0), detail::round_to(y, 10.0), detail::round_to(x + w, 10.0),
                           detail::round_to(y + h, 10.0)};
    };

    const bool lookalike = config.lookalike_distance > 0.0 && bank.size() >= 2;
    SynthChapter out;
    out.bank = bank;
    out.chapter.embedding_dim = config.embedding_dim;

    for (std::size_t pi = 0; pi < config.pages; ++pi) {
        Page page;
        page.index = static_cast<int>(pi) + 1;
        const std::string prefix = "p" + std::to_string(pi) + "_";

        // Two panels per row, the last row full width when the count is odd.
        const std::size_t npanels = range(config.panels_min, config.panels_max);
        const std::size_t rows = (npanels + 1) / 2;
        const double margin = 20.0, gutter = 10.0;
        const double row_h = (kPageHeight - 2 * margin - gutter * static_cast<double>(rows - 1)) / static_cast<double>(rows);
        std::size_t placed = 0;
        for (std::size_t r = 0; r < rows; ++r) {
            const double y1 = margin + static_cast<double>(r) * (row_h + gutter);
            const std::size_t in_row = std::min<std::size_t>(2, npanels - placed);
            const double col_w = (kPageWidth - 2 * margin - gutter * static_cast<double>(in_row - 1)) / static_cast<double>(in_row);
            for (std::size_t c = 0; c < in_row; ++c) {
                // Reading order is right to left, so the first panel of a row is the right one.
                const double x1 = kPageWidth - margin - static_cast<double>(c + 1) * col_w - static_cast<double>(c) * gutter;
                page.panels.push_back({prefix + "panel" + std::to_string(placed), pi, BoundingBox{x1, y1, x1 + col_w, y1 + row_h}});
                ++placed;
            }
        }

        const std::size_t ncrops = range(config.crops_min, config.crops_max);
        std::vector<std::string> identity;  // bank name or "other" per crop
        std::vector<std::size_t> crop_panel;
        for (std::size_t c = 0; c < ncrops; ++c) {
            CharacterNode node;
            node.id = prefix + "c" + std::to_string(c);
            node.page_index = pi;
            Embedding base;
            std::size_t panel = range(0, npanels - 1);
            if (lookalike && ncrops >= 2 && c < 2) {
                if (c == 1) panel = crop_panel[0];
                base = bank.characters[c].exemplars.front();
                identity.push_back(bank.characters[c].name);
                // Burn the draw an ordinary crop would consume, keeping streams aligned.
                (void)unif(rng);
            } else if (unif(rng) >= config.other_rate) {
                const std::size_t j = range(0, bank.size() - 1);
                base = bank.characters[j].exemplars.front();
                identity.push_back(bank.characters[j].name);
            } else {
                base = detail::random_unit(config.embedding_dim, rng);
                identity.push_back(kOtherName);
            }
            Embedding e = base;
            for (double& x : e) x += noise_scale * gauss(rng);
            node.embedding = normalized(e);
            node.gt_name = identity.back();
            node.bbox = random_box_in(page.panels[panel].bbox, 60.0 + 90.0 * unif(rng), 80.0 + 120.0 * unif(rng));
            crop_panel.push_back(panel);
            out.truth.names[node.id] = identity.back();
            page.characters.push_back(std::move(node));
        }

        const std::size_t ntexts = range(config.texts_min, config.texts_max);
        std::vector<long> speaker(ntexts, -1);
        std::vector<long> tail_of(ntexts, -1);
        for (std::size_t t = 0; t < ntexts; ++t) {
            TextNode node;
            node.id = prefix + "t" + std::to_string(t);
            node.page_index = pi;
            std::size_t panel = range(0, npanels - 1);
            if (ncrops > 0) {
                speaker[t] = static_cast<long>(range(0, ncrops - 1));
                panel = crop_panel[static_cast<std::size_t>(speaker[t])];
                out.truth.speakers[node.id] = page.characters[static_cast<std::size_t>(speaker[t])].id;
            }
            const bool essential = unif(rng) < config.essential_rate;
            std::vector<TextCategory> pool;
            for (TextCategory c : kAllTextCategories) {
                if (category_to_essential(c) == essential) pool.push_back(c);
            }
            node.category = pool[range(0, pool.size() - 1)];
            node.gt_essential = essential;
            node.essential_score = noisy_score(essential);
            node.content = "line " + std::to_string(pi + 1) + "." + std::to_string(t + 1);
            node.bbox = random_box_in(page.panels[panel].bbox, 50.0 + 60.0 * unif(rng), 60.0 + 100.0 * unif(rng));
            out.truth.essential[node.id] = essential;

            if (unif(rng) < config.tail_rate) {
                TailNode tail;
                tail.id = prefix + "l" + std::to_string(page.tails.size());
                tail.page_index = pi;
                const auto& b = node.bbox;
                const double tx = std::max(0.0, b.center_x() - 8.0);
                tail.bbox = BoundingBox{tx, b.y2, tx + 16.0, b.y2 + 20.0};
                tail_of[t] = static_cast<long>(page.tails.size());
                out.truth.tails[node.id] = {tail.id};
                page.tails.push_back(std::move(tail));
            }
            page.texts.push_back(std::move(node));
        }

        for (std::size_t t = 0; t < ntexts; ++t) {
            for (std::size_t c = 0; c < ncrops; ++c) {
                page.edges.text_char[{page.texts[t].id, page.characters[c].id}] = noisy_score(speaker[t] == static_cast<long>(c));
            }
            for (std::size_t l = 0; l < page.tails.size(); ++l) {
                page.edges.text_tail[{page.texts[t].id, page.tails[l].id}] = noisy_score(tail_of[t] == static_cast<long>(l));
            }
        }
        for (std::size_t a = 0; a < ncrops; ++a) {
            for (std::size_t b = a + 1; b < ncrops; ++b) {
                const bool same = identity[a] != kOtherName && identity[a] == identity[b];
                page.edges.char_char[unordered_pair(page.characters[a].id, page.characters[b].id)] = noisy_score(same);
            }
        }
        out.chapter.pages.push_back(std::move(page));
    }
    return out;
}

inline SynthChapter generate(const SynthConfig& config) { return generate_chapter(generate_bank(config), config); }

}  // namespace mangascript
