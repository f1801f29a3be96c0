#include "softseg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace softseg::stats {

namespace {

// Exact two-sided p over the null distribution of W+ via subset-sum counting
// on doubled ranks (mid-ranks over ties make them half-integers).
double exact_p(const std::vector<double>& ranks, double w_plus) {
    std::vector<int> r2;
    int total2 = 0;
    for (double r : ranks) {
        const int d = static_cast<int>(std::llround(2.0 * r));
        r2.push_back(d);
        total2 += d;
    }
    // dp[s] = number of sign assignments whose positive-rank sum (doubled) is s
    std::vector<double> dp(total2 + 1, 0.0);
    dp[0] = 1.0;
    for (int d : r2)
        for (int s = total2; s >= d; --s) dp[s] += dp[s - d];

    const double w2 = 2.0 * w_plus;
    const double mu2 = total2 / 2.0;
    const double dev = std::abs(w2 - mu2);
    double count = 0, all = 0;
    for (int s = 0; s <= total2; ++s) {
        all += dp[s];
        if (std::abs(s - mu2) >= dev - 1e-9) count += dp[s];
    }
    return std::min(1.0, count / all);
}

double normal_p(const std::vector<double>& ranks, const std::vector<int>& tie_sizes, double w_plus) {
    const double n = static_cast<double>(ranks.size());
    const double mu = n * (n + 1.0) / 4.0;
    double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    for (int t : tie_sizes) var -= (static_cast<double>(t) * t * t - t) / 48.0;
    if (var <= 0.0) return 1.0;
    const double dev = std::abs(w_plus - mu);
    const double z = std::max(0.0, dev - 0.5) / std::sqrt(var);  // continuity correction
    const double p = std::erfc(z / std::sqrt(2.0));
    return std::min(1.0, std::max(p, 1e-300));
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                    WilcoxonMethod method) {
    if (a.size() != b.size()) throw ConfigError("wilcoxon: samples must be paired");
    if (a.empty()) throw ConfigError("wilcoxon: empty samples");

    std::vector<double> diffs;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    WilcoxonResult res;
    if (diffs.empty()) {
        res.degenerate = true;
        res.p_value = 1.0;
        res.n_effective = 0;
        return res;
    }
    const int n = static_cast<int>(diffs.size());
    res.n_effective = n;

    // mid-ranks of |d|
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return std::abs(diffs[i]) < std::abs(diffs[j]); });
    std::vector<double> ranks(n, 0.0);
    std::vector<int> tie_sizes;
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
        const double mid = (i + j) / 2.0 + 1.0;
        for (int k = i; k <= j; ++k) ranks[order[k]] = mid;
        if (j > i) tie_sizes.push_back(j - i + 1);
        i = j + 1;
    }

    double w_plus = 0;
    for (int k = 0; k < n; ++k)
        if (diffs[k] > 0) w_plus += ranks[k];
    res.statistic = w_plus;

    const bool exact = method == WilcoxonMethod::Exact || (method == WilcoxonMethod::Auto && n <= 25);
    if (exact) {
        res.method_used = WilcoxonMethod::Exact;
        res.p_value = exact_p(ranks, w_plus);
    } else {
        res.method_used = WilcoxonMethod::Normal;
        res.p_value = normal_p(ranks, tie_sizes, w_plus);
    }
    return res;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace softseg::stats
