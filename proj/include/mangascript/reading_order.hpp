#pragma once

// Right-to-left reading order for manga pages.
//
// Panels are ordered by recursive XY-cut: a set of boxes is split at its
// widest horizontal gap (top part first) if one exists, otherwise at its
// widest vertical gap (right part first). Sets that cannot be cut are
// ordered by descending right edge, then ascending top edge. Texts are
// assigned to the panel they overlap most and ordered within a panel by
// descending centre-x, then ascending centre-y.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include "mangascript/chapter.hpp"
#include "mangascript/geometry.hpp"

namespace mangascript {

namespace detail {

struct Gap {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
};

// Widest empty interval between the projections of `boxes` on one axis.
// `first`/`second` select the axis. Returns false when the projections overlap
// into one run. Equal widths resolve to the lowest gap.
template <typename Lo, typename Hi>
bool widest_gap(const std::vector<BoundingBox>& boxes, const std::vector<std::size_t>& idx, Lo first, Hi second,
                Gap& out) {
    std::vector<std::pair<double, double>> spans;
    for (std::size_t i : idx) spans.emplace_back(first(boxes[i]), second(boxes[i]));
    std::sort(spans.begin(), spans.end());
    bool found = false;
    double reach = spans.front().second;
    for (std::size_t s = 1; s < spans.size(); ++s) {
        if (spans[s].first >= reach) {
            const Gap g{reach, spans[s].first};
            if (!found || g.width() > out.width()) {
                out = g;
                found = true;
            }
        }
        reach = std::max(reach, spans[s].second);
    }
    return found;
}

inline void xy_cut(const std::vector<BoundingBox>& boxes, const std::vector<std::string>& ids,
                   std::vector<std::size_t> idx, std::vector<std::size_t>& out) {
    if (idx.size() <= 1) {
        out.insert(out.end(), idx.begin(), idx.end());
        return;
    }
    Gap g;
    if (widest_gap(boxes, idx, [](const BoundingBox& b) { return b.y1; }, [](const BoundingBox& b) { return b.y2; },
                   g)) {
        std::vector<std::size_t> top, bottom;
        for (std::size_t i : idx) (boxes[i].y2 <= g.lo ? top : bottom).push_back(i);
        xy_cut(boxes, ids, std::move(top), out);
        xy_cut(boxes, ids, std::move(bottom), out);
        return;
    }
    if (widest_gap(boxes, idx, [](const BoundingBox& b) { return b.x1; }, [](const BoundingBox& b) { return b.x2; },
                   g)) {
        std::vector<std::size_t> right, left;
        for (std::size_t i : idx) (boxes[i].x1 >= g.hi ? right : left).push_back(i);
        xy_cut(boxes, ids, std::move(right), out);
        xy_cut(boxes, ids, std::move(left), out);
        return;
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::make_tuple(-boxes[a].x2, boxes[a].y1, ids[a]) < std::make_tuple(-boxes[b].x2, boxes[b].y1, ids[b]);
    });
    out.insert(out.end(), idx.begin(), idx.end());
}

}  // namespace detail

inline std::vector<std::string> order_panels(const Page& page) {
    std::vector<BoundingBox> boxes;
    std::vector<std::string> ids;
    for (const auto& p : page.panels) {
        boxes.push_back(p.bbox);
        ids.push_back(p.id);
    }
    std::vector<std::size_t> idx(boxes.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<std::size_t> order;
    if (!idx.empty()) detail::xy_cut(boxes, ids, std::move(idx), order);
    std::vector<std::string> out;
    for (std::size_t i : order) out.push_back(ids[i]);
    return out;
}

// Position in `panel_order` of the panel that owns `box`: largest overlap
// area, ties to the earlier panel; with no overlap, nearest centre. -1 when
// the page has no panels.
inline long owning_panel(const Page& page, const std::vector<std::string>& panel_order, const BoundingBox& box) {
    std::vector<const PanelNode*> ordered;
    for (const auto& id : panel_order) {
        for (const auto& p : page.panels) {
            if (p.id == id) ordered.push_back(&p);
        }
    }
    if (ordered.empty()) return -1;
    long best = -1;
    double best_area = 0.0;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        const double a = intersection_area(ordered[i]->bbox, box);
        if (a > best_area) {
            best_area = a;
            best = static_cast<long>(i);
        }
    }
    if (best >= 0) return best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        const double d = center_distance(ordered[i]->bbox, box);
        if (d < best_d) {
            best_d = d;
            best = static_cast<long>(i);
        }
    }
    return best;
}

struct OrderedText {
    std::string text_id;
    std::string panel_id;  // empty when the page has no panels
};

inline std::vector<OrderedText> order_texts_with_panels(const Page& page, const std::vector<std::string>& panel_order) {
    struct Keyed {
        long panel;
        double neg_cx;
        double cy;
        std::string id;
    };
    std::vector<Keyed> keyed;
    for (const auto& t : page.texts) {
        keyed.push_back({owning_panel(page, panel_order, t.bbox), -t.bbox.center_x(), t.bbox.center_y(), t.id});
    }
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        return std::tie(a.panel, a.neg_cx, a.cy, a.id) < std::tie(b.panel, b.neg_cx, b.cy, b.id);
    });
    std::vector<OrderedText> out;
    for (const auto& k : keyed) {
        out.push_back({k.id, k.panel < 0 ? std::string{} : panel_order[static_cast<std::size_t>(k.panel)]});
    }
    return out;
}

inline std::vector<std::string> order_texts(const Page& page, const std::vector<std::string>& panel_order) {
    std::vector<std::string> out;
    for (auto& t : order_texts_with_panels(page, panel_order)) out.push_back(std::move(t.text_id));
    return out;
}

}  // namespace mangascript
