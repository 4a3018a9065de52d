#pragma once

// Minimum-cost bipartite matching (Kuhn-Munkres with potentials, O(n^2 m)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mangascript/error.hpp"

namespace mangascript {

using Matrix = std::vector<std::vector<double>>;

struct Matching {
    std::vector<long> row_to_col;  // -1 for rows left unmatched (rows > cols)
    double cost = 0.0;
};

namespace detail {

// Requires rows <= cols. Returns column per row.
inline std::vector<long> hungarian_wide(const Matrix& a) {
    const std::size_t n = a.size();
    const std::size_t m = a.front().size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<long> row_to_col(n, -1);
    for (std::size_t j = 1; j <= m; ++j) {
        if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<long>(j - 1);
    }
    return row_to_col;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.front().size(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a[i].size(); ++j) t[j][i] = a[i][j];
    }
    return t;
}

inline double optimal_cost(const Matrix& a) {
    if (a.empty() || a.front().empty()) return 0.0;
    const bool wide = a.size() <= a.front().size();
    const Matrix& w = wide ? a : transpose(a);
    const auto rc = hungarian_wide(w);
    double c = 0.0;
    for (std::size_t i = 0; i < rc.size(); ++i) c += w[i][static_cast<std::size_t>(rc[i])];
    return c;
}

}  // namespace detail

// Minimum-cost maximal matching. Among optimal matchings, the one whose
// row->column sequence is lexicographically smallest is returned (unmatched
// rows sort after every column).
inline Matching hungarian(const Matrix& cost) {
    if (cost.empty() || cost.front().empty()) throw Error("hungarian: empty matrix");
    const std::size_t rows = cost.size();
    const std::size_t cols = cost.front().size();
    for (const auto& r : cost) {
        if (r.size() != cols) throw Error("hungarian: ragged matrix");
        for (double x : r) {
            if (!std::isfinite(x)) throw Error("hungarian: non-finite cost");
        }
    }

    const double target = detail::optimal_cost(cost);
    const double tol = 1e-9 * (1.0 + std::abs(target));

    // Fix rows one at a time to the smallest column that keeps the optimum
    // reachable; the remaining free rows and columns form a smaller problem.
    Matching out;
    out.row_to_col.assign(rows, -1);
    std::vector<char> col_used(cols, 0);
    double fixed = 0.0;
    std::size_t matches_left = std::min(rows, cols);
    for (std::size_t r = 0; r < rows && matches_left > 0; ++r) {
        auto residual = [&](long chosen) {
            Matrix sub;
            for (std::size_t i = r + 1; i < rows; ++i) {
                std::vector<double> row;
                for (std::size_t j = 0; j < cols; ++j) {
                    if (!col_used[j] && static_cast<long>(j) != chosen) row.push_back(cost[i][j]);
                }
                sub.push_back(std::move(row));
            }
            return detail::optimal_cost(sub);
        };
        bool placed = false;
        for (std::size_t j = 0; j < cols && !placed; ++j) {
            if (col_used[j]) continue;
            const double total = fixed + cost[r][j] + residual(static_cast<long>(j));
            if (total <= target + tol) {
                out.row_to_col[r] = static_cast<long>(j);
                col_used[j] = 1;
                fixed += cost[r][j];
                --matches_left;
                placed = true;
            }
        }
        // Leaving r unmatched is only an option when rows outnumber columns.
    }
    out.cost = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (out.row_to_col[r] >= 0) out.cost += cost[r][static_cast<std::size_t>(out.row_to_col[r])];
    }
    return out;
}

}  // namespace mangascript
