#pragma once

// Evaluation metrics: box matching, average precision, clustering agreement
// (NMI / AMI), nearest-neighbour retrieval quality, identity-pooled edge AP,
// text classification AP and naming accuracy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mangascript/chapter.hpp"
#include "mangascript/constraints.hpp"
#include "mangascript/embedding.hpp"
#include "mangascript/error.hpp"
#include "mangascript/geometry.hpp"
#include "mangascript/ground_truth.hpp"
#include "mangascript/solver.hpp"

namespace mangascript {

inline constexpr double kDefaultIouMin = 0.5;

struct ScoredBox {
    BoundingBox box;
    double score = 1.0;
};

// Greedy matching in descending prediction score (stable for equal scores).
// Each prediction takes the unmatched ground-truth box of highest IoU, if
// that IoU reaches `iou_min`; IoU ties go to the lower ground-truth index.
inline std::map<std::size_t, std::size_t> match_boxes(const std::vector<ScoredBox>& pred,
                                                      const std::vector<BoundingBox>& gt,
                                                      double iou_min = kDefaultIouMin) {
    if (!(iou_min > 0.0 && iou_min <= 1.0)) throw Error("iou_min must lie in (0, 1]");
    std::vector<std::size_t> order(pred.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pred[a].score > pred[b].score; });
    std::vector<char> taken(gt.size(), 0);
    std::map<std::size_t, std::size_t> out;
    for (std::size_t p : order) {
        long best = -1;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (taken[g]) continue;
            const double v = iou(pred[p].box, gt[g]);
            if (v >= iou_min && v > best_iou) {
                best_iou = v;
                best = static_cast<long>(g);
            }
        }
        if (best >= 0) {
            taken[static_cast<std::size_t>(best)] = 1;
            out[p] = static_cast<std::size_t>(best);
        }
    }
    return out;
}

// Mean over positives of the precision at each positive's rank, ranking by
// descending score with ties kept in input order.
inline double average_precision(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw Error("average_precision: length mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (labels[order[r]]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    if (hits == 0) throw Error("AP undefined: no positive labels");
    return sum / static_cast<double>(hits);
}

// ---------------------------------------------------------------------------
// Clustering agreement

struct ClusteringScores {
    double ami = 0.0;
    double nmi = 0.0;
};

namespace detail {

template <typename L>
std::vector<std::size_t> dense_labels(const std::vector<L>& labels) {
    std::map<L, std::size_t> ids;
    std::vector<std::size_t> out;
    for (const auto& l : labels) out.push_back(ids.emplace(l, ids.size()).first->second);
    return out;
}

inline double entropy(const std::vector<std::size_t>& counts, double n) {
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c > 0) {
            const double p = static_cast<double>(c) / n;
            h -= p * std::log(p);
        }
    }
    return h;
}

// Expected mutual information under the hypergeometric model of random
// labellings with the given cluster sizes.
inline double expected_mutual_information(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                                          std::size_t n_total) {
    const double n = static_cast<double>(n_total);
    const double lg_n = std::lgamma(n + 1.0);
    double emi = 0.0;
    for (std::size_t ai : a) {
        for (std::size_t bj : b) {
            const double x = static_cast<double>(ai), y = static_cast<double>(bj);
            const std::size_t lo = std::max<long>(1, static_cast<long>(ai + bj) - static_cast<long>(n_total));
            const std::size_t hi = std::min(ai, bj);
            const double fixed = std::lgamma(x + 1.0) + std::lgamma(y + 1.0) + std::lgamma(n - x + 1.0) +
                                 std::lgamma(n - y + 1.0) - lg_n;
            for (std::size_t nij = lo; nij <= hi; ++nij) {
                const double v = static_cast<double>(nij);
                const double log_p = fixed - std::lgamma(v + 1.0) - std::lgamma(x - v + 1.0) -
                                     std::lgamma(y - v + 1.0) - std::lgamma(n - x - y + v + 1.0);
                emi += (v / n) * std::log(n * v / (x * y)) * std::exp(log_p);
            }
        }
    }
    return emi;
}

}  // namespace detail

// NMI with the arithmetic-mean normaliser; AMI with hypergeometric expected
// MI. Both are 1 for partitions equal up to relabelling.
template <typename L>
ClusteringScores clustering_metrics(const std::vector<L>& true_labels, const std::vector<L>& pred_labels) {
    if (true_labels.size() != pred_labels.size()) throw Error("clustering_metrics: length mismatch");
    if (true_labels.empty()) throw Error("clustering_metrics: empty input");
    const auto t = detail::dense_labels(true_labels);
    const auto p = detail::dense_labels(pred_labels);
    if (t == p) return {1.0, 1.0};  // dense relabelling is canonical

    const std::size_t n_total = t.size();
    const double n = static_cast<double>(n_total);
    const std::size_t kt = *std::max_element(t.begin(), t.end()) + 1;
    const std::size_t kp = *std::max_element(p.begin(), p.end()) + 1;
    std::vector<std::size_t> a(kt, 0), b(kp, 0);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> joint;
    for (std::size_t i = 0; i < n_total; ++i) {
        ++a[t[i]];
        ++b[p[i]];
        ++joint[{t[i], p[i]}];
    }
    double mi = 0.0;
    for (const auto& [key, c] : joint) {
        const double nij = static_cast<double>(c);
        mi += (nij / n) * std::log(n * nij / (static_cast<double>(a[key.first]) * static_cast<double>(b[key.second])));
    }
    const double ht = detail::entropy(a, n);
    const double hp = detail::entropy(b, n);
    const double mean_h = 0.5 * (ht + hp);

    ClusteringScores s;
    s.nmi = (ht == 0.0 || hp == 0.0) ? 0.0 : std::clamp(mi / mean_h, 0.0, 1.0);
    const double emi = detail::expected_mutual_information(a, b, n_total);
    const double denom = mean_h - emi;
    s.ami = std::abs(denom) < 1e-15 ? 0.0 : (mi - emi) / denom;
    return s;
}

// ---------------------------------------------------------------------------
// Retrieval

struct RetrievalScores {
    double precision_at_1 = 0.0;
    double r_precision = 0.0;
    double mrr = 0.0;
    double map_at_r = 0.0;
    std::size_t queries = 0;  // queries with at least one positive
    std::size_t skipped = 0;  // queries without positives
};

// Every point queries all others, ranked by ascending Euclidean distance
// (ties by index). Queries whose identity has no other member are skipped.
template <typename L>
RetrievalScores retrieval_metrics(const std::vector<Embedding>& embeddings, const std::vector<L>& labels) {
    if (embeddings.size() != labels.size()) throw Error("retrieval_metrics: length mismatch");
    if (embeddings.size() < 2) throw Error("retrieval_metrics: need at least 2 points");
    RetrievalScores s;
    const std::size_t n = embeddings.size();
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t q = 0; q < n; ++q) {
        ranked.clear();
        std::size_t positives = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == q) continue;
            ranked.emplace_back(distance(embeddings[q], embeddings[j]), j);
            if (labels[j] == labels[q]) ++positives;
        }
        if (positives == 0) {
            ++s.skipped;
            continue;
        }
        std::sort(ranked.begin(), ranked.end());
        const double r = static_cast<double>(positives);
        double hits_in_r = 0.0, ap_sum = 0.0, hits = 0.0, first = 0.0;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            const bool rel = labels[ranked[i].second] == labels[q];
            if (!rel) continue;
            hits += 1.0;
            if (first == 0.0) first = static_cast<double>(i + 1);
            if (i < positives) {
                hits_in_r += 1.0;
                ap_sum += hits / static_cast<double>(i + 1);
            }
        }
        s.precision_at_1 += labels[ranked.front().second] == labels[q] ? 1.0 : 0.0;
        s.mrr += 1.0 / first;
        s.r_precision += hits_in_r / r;
        s.map_at_r += ap_sum / r;
        ++s.queries;
    }
    if (s.queries == 0) throw Error("retrieval_metrics: no valid queries");
    const double q = static_cast<double>(s.queries);
    s.precision_at_1 /= q;
    s.mrr /= q;
    s.r_precision /= q;
    s.map_at_r /= q;
    return s;
}

// ---------------------------------------------------------------------------
// Naming and classification

inline double naming_accuracy(const Naming& gt, const Naming& pred) {
    if (gt.size() != pred.size()) throw Error("naming_accuracy: key sets differ");
    if (gt.empty()) throw Error("naming_accuracy: no crops");
    std::size_t correct = 0;
    for (const auto& [id, name] : gt) {
        auto it = pred.find(id);
        if (it == pred.end()) throw Error("naming_accuracy: key sets differ at '" + id + "'");
        if (it->second == name) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(gt.size());
}

// AP with essential texts as the positive class.
inline double text_classification_ap(const std::vector<bool>& gt_essential, const std::vector<double>& scores) {
    return average_precision(scores, gt_essential);
}

// ---------------------------------------------------------------------------
// Chapter-level edge evaluation

// Per page, predicted node index -> ground-truth node index.
struct PageMatches {
    std::map<std::size_t, std::size_t> characters;
    std::map<std::size_t, std::size_t> texts;
    std::map<std::size_t, std::size_t> tails;
};

namespace detail {

template <typename Node>
std::map<std::size_t, std::size_t> match_nodes(const std::vector<Node>& pred, const std::vector<Node>& gt,
                                               double iou_min) {
    std::vector<ScoredBox> ps;
    for (const auto& n : pred) ps.push_back({n.bbox, n.score});
    std::vector<BoundingBox> gs;
    for (const auto& n : gt) gs.push_back(n.bbox);
    return match_boxes(ps, gs, iou_min);
}

}  // namespace detail

inline std::vector<PageMatches> match_chapters(const Chapter& pred, const Chapter& gt, double iou_min = kDefaultIouMin) {
    if (pred.pages.size() != gt.pages.size()) throw Error("prediction and ground truth differ in page count");
    std::vector<PageMatches> out;
    for (std::size_t pi = 0; pi < gt.pages.size(); ++pi) {
        const Page& pp = pred.pages[pi];
        const Page& gp = gt.pages[pi];
        out.push_back({detail::match_nodes(pp.characters, gp.characters, iou_min),
                       detail::match_nodes(pp.texts, gp.texts, iou_min),
                       detail::match_nodes(pp.tails, gp.tails, iou_min)});
    }
    return out;
}

namespace detail {

inline std::map<std::size_t, std::size_t> invert(const std::map<std::size_t, std::size_t>& m) {
    std::map<std::size_t, std::size_t> out;
    for (const auto& [a, b] : m) out[b] = a;
    return out;
}

inline const std::string& gt_name_of(const GroundTruth& truth, const std::string& crop) {
    auto it = truth.names.find(crop);
    if (it == truth.names.end()) throw Error("ground truth has no name for crop '" + crop + "'");
    return it->second;
}

}  // namespace detail

struct ScoredPairs {
    std::vector<double> scores;
    std::vector<bool> labels;
};

// (text, identity) pairs for every ground-truth text with a known speaker and
// every identity present on its page. A pair's score is the maximum predicted
// text-character score over predicted crops matched to ground-truth crops of
// that identity; unmatched texts or identities score 0.
inline ScoredPairs text_identity_pairs(const Chapter& pred, const Chapter& gt_chapter, const GroundTruth& truth,
                                       const std::vector<PageMatches>& matches) {
    ScoredPairs out;
    for (std::size_t pi = 0; pi < gt_chapter.pages.size(); ++pi) {
        const Page& gp = gt_chapter.pages[pi];
        const Page& pp = pred.pages[pi];
        const auto gt_to_pred_text = detail::invert(matches[pi].texts);

        std::map<std::string, std::vector<std::size_t>> crops_by_identity;  // gt crop indices
        std::map<std::string, std::string> identity_of;
        for (std::size_t g = 0; g < gp.characters.size(); ++g) {
            const auto& id = gp.characters[g].id;
            const auto key = identity_key(id, detail::gt_name_of(truth, id));
            crops_by_identity[key].push_back(g);
            identity_of[id] = key;
        }
        const auto gt_to_pred_char = detail::invert(matches[pi].characters);

        for (std::size_t gt_text = 0; gt_text < gp.texts.size(); ++gt_text) {
            auto sp = truth.speakers.find(gp.texts[gt_text].id);
            if (sp == truth.speakers.end()) continue;
            auto speaker_identity = identity_of.find(sp->second);
            if (speaker_identity == identity_of.end()) {
                throw Error("speaker '" + sp->second + "' is not a crop on the text's page");
            }
            auto pt = gt_to_pred_text.find(gt_text);
            for (const auto& [identity, gt_crops] : crops_by_identity) {
                double best = 0.0;
                if (pt != gt_to_pred_text.end()) {
                    for (std::size_t g : gt_crops) {
                        auto pc = gt_to_pred_char.find(g);
                        if (pc == gt_to_pred_char.end()) continue;
                        best = std::max(best, pp.edges.text_char_score(pp.texts[pt->second].id,
                                                                      pp.characters[pc->second].id));
                    }
                }
                out.scores.push_back(best);
                out.labels.push_back(identity == speaker_identity->second);
            }
        }
    }
    return out;
}

inline double edge_ap_text_char_identity(const Chapter& pred, const Chapter& gt_chapter, const GroundTruth& truth,
                                         double iou_min = kDefaultIouMin) {
    const auto pairs = text_identity_pairs(pred, gt_chapter, truth, match_chapters(pred, gt_chapter, iou_min));
    return average_precision(pairs.scores, pairs.labels);
}

// (text, tail) pairs on each page, labelled by the ground-truth tail lists.
inline ScoredPairs text_tail_pairs(const Chapter& pred, const Chapter& gt_chapter, const GroundTruth& truth,
                                   const std::vector<PageMatches>& matches) {
    ScoredPairs out;
    for (std::size_t pi = 0; pi < gt_chapter.pages.size(); ++pi) {
        const Page& gp = gt_chapter.pages[pi];
        const Page& pp = pred.pages[pi];
        const auto text_map = detail::invert(matches[pi].texts);
        const auto tail_map = detail::invert(matches[pi].tails);
        for (std::size_t t = 0; t < gp.texts.size(); ++t) {
            std::set<std::string> attached;
            if (auto it = truth.tails.find(gp.texts[t].id); it != truth.tails.end()) {
                attached.insert(it->second.begin(), it->second.end());
            }
            for (std::size_t l = 0; l < gp.tails.size(); ++l) {
                double s = 0.0;
                auto pt = text_map.find(t);
                auto pl = tail_map.find(l);
                if (pt != text_map.end() && pl != tail_map.end()) {
                    s = pp.edges.text_tail_score(pp.texts[pt->second].id, pp.tails[pl->second].id);
                }
                out.scores.push_back(s);
                out.labels.push_back(attached.contains(gp.tails[l].id));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report

struct MetricReport {
    std::map<std::string, double> values;
    std::map<std::string, std::size_t> counts;
    std::map<std::string, std::string> parameters;

    nlohmann::json to_json() const {
        return nlohmann::json{{"metrics", values}, {"counts", counts}, {"parameters", parameters}};
    }

    std::string table() const {
        std::size_t width = 6;
        for (const auto& [k, v] : values) width = std::max(width, k.size());
        for (const auto& [k, v] : counts) width = std::max(width, k.size());
        std::ostringstream out;
        out << std::left << std::setw(static_cast<int>(width)) << "metric" << "  value\n";
        for (const auto& [k, v] : values) {
            out << std::left << std::setw(static_cast<int>(width)) << k << "  " << std::fixed << std::setprecision(4)
                << v << "\n";
        }
        for (const auto& [k, v] : counts) {
            out << std::left << std::setw(static_cast<int>(width)) << k << "  " << v << "\n";
        }
        return out.str();
    }
};

struct EvaluationInputs {
    const Chapter* pred = nullptr;
    const Chapter* gt_chapter = nullptr;
    const GroundTruth* truth = nullptr;
    const Naming* pred_names = nullptr;  // optional
    double iou_min = kDefaultIouMin;
    double must_link_threshold = kDefaultMustLinkThreshold;
};

// Computes every metric the inputs support. Metrics whose preconditions
// fail (no positives, no valid queries) are left out and counted under
// "skipped_<metric>".
inline MetricReport evaluate(const EvaluationInputs& in) {
    const Chapter& pred = *in.pred;
    const Chapter& gtc = *in.gt_chapter;
    const GroundTruth& truth = *in.truth;
    MetricReport r;
    r.parameters["iou_min"] = std::to_string(in.iou_min);
    r.parameters["must_link_threshold"] = std::to_string(in.must_link_threshold);
    r.parameters["edge_identities"] = "page-present";
    r.parameters["clustering"] = "per-page mean";
    r.parameters["retrieval"] = "chapter-wide";

    if (in.pred_names) {
        r.values["naming_accuracy"] = naming_accuracy(truth.names, *in.pred_names);
        r.counts["crops"] = truth.names.size();
    }

    const auto matches = match_chapters(pred, gtc, in.iou_min);

    // Per-page clustering of matched crops: ground-truth identities against
    // predicted char-char components.
    double ami_sum = 0.0, nmi_sum = 0.0;
    std::size_t pages = 0;
    std::vector<Embedding> embeddings;
    std::vector<std::string> identities;
    for (std::size_t pi = 0; pi < gtc.pages.size(); ++pi) {
        const Page& pp = pred.pages[pi];
        const Page& gp = gtc.pages[pi];
        std::map<std::string, std::size_t> component;
        const auto comps = per_page_components(pp, in.must_link_threshold);
        for (std::size_t c = 0; c < comps.size(); ++c) {
            for (const auto& id : comps[c]) component[id] = c;
        }
        std::vector<std::string> t;
        std::vector<std::size_t> p;
        for (const auto& [pc, gc] : matches[pi].characters) {
            const auto& gid = gp.characters[gc].id;
            t.push_back(identity_key(gid, detail::gt_name_of(truth, gid)));
            p.push_back(component.at(pp.characters[pc].id));
            embeddings.push_back(pp.characters[pc].embedding);
            identities.push_back(t.back());
        }
        if (t.empty()) continue;
        std::vector<std::string> p_str;
        for (std::size_t x : p) p_str.push_back(std::to_string(x));
        const auto cs = clustering_metrics(t, p_str);
        ami_sum += cs.ami;
        nmi_sum += cs.nmi;
        ++pages;
    }
    if (pages > 0) {
        r.values["AMI"] = ami_sum / static_cast<double>(pages);
        r.values["NMI"] = nmi_sum / static_cast<double>(pages);
        r.counts["clustering_pages"] = pages;
    }

    if (embeddings.size() >= 2) {
        try {
            const auto rs = retrieval_metrics(embeddings, identities);
            r.values["P@1"] = rs.precision_at_1;
            r.values["R-P"] = rs.r_precision;
            r.values["MRR"] = rs.mrr;
            r.values["MAP@R"] = rs.map_at_r;
            r.counts["retrieval_queries"] = rs.queries;
            r.counts["retrieval_skipped"] = rs.skipped;
        } catch (const Error&) {
            r.counts["skipped_retrieval"] = 1;
        }
    }

    auto try_ap = [&](const std::string& name, const ScoredPairs& pairs) {
        if (std::find(pairs.labels.begin(), pairs.labels.end(), true) == pairs.labels.end()) {
            r.counts["skipped_" + name] = 1;
            return;
        }
        r.values[name] = average_precision(pairs.scores, pairs.labels);
        r.counts[name + "_pairs"] = pairs.scores.size();
    };
    try_ap("text_char_identity_AP", text_identity_pairs(pred, gtc, truth, matches));
    if (!truth.tails.empty()) try_ap("text_tail_AP", text_tail_pairs(pred, gtc, truth, matches));

    ScoredPairs essential;
    for (std::size_t pi = 0; pi < gtc.pages.size(); ++pi) {
        const auto gt_to_pred = detail::invert(matches[pi].texts);
        for (std::size_t t = 0; t < gtc.pages[pi].texts.size(); ++t) {
            auto e = truth.essential.find(gtc.pages[pi].texts[t].id);
            if (e == truth.essential.end()) continue;
            auto pt = gt_to_pred.find(t);
            essential.scores.push_back(pt == gt_to_pred.end() ? 0.0 : pred.pages[pi].texts[pt->second].essential_score);
            essential.labels.push_back(e->second);
        }
    }
    try_ap("text_classification_AP", essential);
    return r;
}

}  // namespace mangascript
