#pragma once

// Test-only reference computations. These deliberately share no code with
// the library paths they check.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace tom::oracle {

/// sum * 100 / 30 as a reduced fraction, rounded half-up by comparing the
/// remainder against half the denominator.
inline int composite_brute_force(const std::array<int, 6>& levels) {
    std::int64_t num = 0;
    for (int l : levels) num += l;
    num *= 100;
    std::int64_t den = 30;
    const std::int64_t g = std::gcd(num, den);
    num /= g;
    den /= g;
    const std::int64_t whole = num / den;
    const std::int64_t rem = num % den;
    return static_cast<int>(2 * rem >= den ? whole + 1 : whole);
}

/// Every card in canonical order: 5^6 = 15,625 entries.
inline std::vector<std::array<int, 6>> all_cards() {
    std::vector<std::array<int, 6>> out;
    out.reserve(15625);
    for (int code = 0; code < 15625; ++code) {
        std::array<int, 6> levels{};
        int c = code;
        for (int i = 0; i < 6; ++i) {
            levels[i] = c % 5 + 1;
            c /= 5;
        }
        out.push_back(levels);
    }
    return out;
}

/// Exact probability that each IU keeps its unperturbed rank position when
/// every level independently moves +/-1 (fair sign) with probability p and
/// is clamped to [1,5]. Computed by convolving per-level distributions into
/// raw-sum distributions and enumerating the joint outcome space.
/// `cards` must be sorted by id; the result is indexed like `cards`.
inline std::vector<double> exact_rank_retention(
    const std::vector<std::pair<std::string, std::array<int, 6>>>& cards, double p) {
    const std::size_t n = cards.size();
    std::vector<std::map<int, double>> sum_dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::map<int, double> dist{{0, 1.0}};
        for (int level : cards[i].second) {
            std::map<int, double> step;
            step[level] += 1.0 - p;
            step[std::min(5, level + 1)] += p / 2;
            step[std::max(1, level - 1)] += p / 2;
            std::map<int, double> next;
            for (auto [s, ps] : dist) {
                for (auto [v, pv] : step) next[s + v] += ps * pv;
            }
            dist = std::move(next);
        }
        sum_dist[i] = std::move(dist);
    }

    auto ranking = [&](const std::vector<int>& sums) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            if (sums[a] != sums[b]) return sums[a] > sums[b];
            return cards[a].first < cards[b].first;
        });
        return idx;
    };

    std::vector<int> base(n);
    for (std::size_t i = 0; i < n; ++i) {
        base[i] = std::accumulate(cards[i].second.begin(), cards[i].second.end(), 0);
    }
    const auto base_rank = ranking(base);

    std::vector<double> keep(n, 0.0);
    std::vector<std::vector<std::pair<int, double>>> support(n);
    for (std::size_t i = 0; i < n; ++i) support[i].assign(sum_dist[i].begin(), sum_dist[i].end());

    std::vector<std::size_t> odometer(n, 0);
    std::vector<int> sums(n);
    for (;;) {
        double prob = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            sums[i] = support[i][odometer[i]].first;
            prob *= support[i][odometer[i]].second;
        }
        const auto r = ranking(sums);
        for (std::size_t pos = 0; pos < n; ++pos) {
            if (r[pos] == base_rank[pos]) keep[r[pos]] += prob;
        }
        std::size_t k = 0;
        while (k < n && ++odometer[k] == support[k].size()) odometer[k++] = 0;
        if (k == n) break;
    }
    return keep;
}

}  // namespace tom::oracle
