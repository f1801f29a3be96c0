#include <doctest.h>

#include <cmath>

#include "softseg/rng.hpp"
#include "softseg/stats.hpp"

using namespace softseg;
using namespace softseg::stats;

namespace {

// Literal 2^n enumeration oracle with mid-ranks, independent of the DP path.
double enumerate_two_sided_p(const std::vector<double>& diffs) {
    const int n = static_cast<int>(diffs.size());
    std::vector<double> ranks(n);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return std::abs(diffs[i]) < std::abs(diffs[j]); });
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
        for (int k = i; k <= j; ++k) ranks[order[k]] = (i + j) / 2.0 + 1.0;
        i = j + 1;
    }
    double w_obs = 0, total = 0;
    for (int k = 0; k < n; ++k) {
        total += ranks[k];
        if (diffs[k] > 0) w_obs += ranks[k];
    }
    const double mu = total / 2.0;
    long count = 0;
    const long all = 1L << n;
    for (long m = 0; m < all; ++m) {
        double w = 0;
        for (int k = 0; k < n; ++k)
            if (m & (1L << k)) w += ranks[k];
        if (std::abs(w - mu) >= std::abs(w_obs - mu) - 1e-9) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(all);
}

}  // namespace

TEST_CASE("identical samples give p = 1 with a degenerate flag") {
    std::vector<double> a = {1, 2, 3, 4};
    const auto r = wilcoxon_signed_rank(a, a);
    CHECK(r.p_value == 1.0);
    CHECK(r.degenerate);
    CHECK(r.n_effective == 0);
}

TEST_CASE("n=8 all-positive differences: exact two-sided p = 2/256") {
    std::vector<double> a = {2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<double> b = {1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5};
    const auto r = wilcoxon_signed_rank(a, b);
    CHECK(r.method_used == WilcoxonMethod::Exact);
    CHECK(r.statistic == doctest::Approx(36.0));
    CHECK(r.p_value == doctest::Approx(0.0078125).epsilon(1e-12));
}

TEST_CASE("exact p matches the literal enumeration oracle on random samples") {
    Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 3 + static_cast<int>(rng.below(10));  // up to 12
        std::vector<double> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a[i] = std::round(rng.normal() * 4.0) / 2.0;
            b[i] = std::round(rng.normal() * 4.0) / 2.0;  // rounding forces ties
        }
        std::vector<double> diffs;
        for (int i = 0; i < n; ++i)
            if (a[i] != b[i]) diffs.push_back(a[i] - b[i]);
        if (diffs.empty()) continue;
        const auto r = wilcoxon_signed_rank(a, b, WilcoxonMethod::Exact);
        CHECK(r.p_value == doctest::Approx(enumerate_two_sided_p(diffs)).epsilon(1e-10));
    }
}

TEST_CASE("exact and normal approximation agree within 0.01 at n = 25") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(25), b(25);
        for (int i = 0; i < 25; ++i) {
            a[i] = rng.normal();
            b[i] = rng.normal() + 0.3;
        }
        const auto exact = wilcoxon_signed_rank(a, b, WilcoxonMethod::Exact);
        const auto approx = wilcoxon_signed_rank(a, b, WilcoxonMethod::Normal);
        if (exact.p_value > 0.001)  // moderate statistics; the extreme tail is quantized
            CHECK(std::abs(exact.p_value - approx.p_value) < 0.01);
    }
}

TEST_CASE("auto switches to the normal approximation above n = 25") {
    Rng rng(13);
    std::vector<double> a(30), b(30);
    for (int i = 0; i < 30; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
    }
    CHECK(wilcoxon_signed_rank(a, b).method_used == WilcoxonMethod::Normal);
    std::vector<double> a2(a.begin(), a.begin() + 20), b2(b.begin(), b.begin() + 20);
    CHECK(wilcoxon_signed_rank(a2, b2).method_used == WilcoxonMethod::Exact);
}

TEST_CASE("test is symmetric and shift invariant") {
    Rng rng(14);
    std::vector<double> a(12), b(12);
    for (int i = 0; i < 12; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal() + 0.5;
    }
    const auto ab = wilcoxon_signed_rank(a, b);
    const auto ba = wilcoxon_signed_rank(b, a);
    CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-12));

    std::vector<double> as = a, bs = b;
    for (auto& x : as) x += 17.0;
    for (auto& x : bs) x += 17.0;
    const auto shifted = wilcoxon_signed_rank(as, bs);
    CHECK(shifted.p_value == doctest::Approx(ab.p_value).epsilon(1e-12));

    // common positive scaling of the differences preserves signs and ranks
    std::vector<double> a2(12), b2(12);
    for (int i = 0; i < 12; ++i) {
        a2[i] = 3.0 * (a[i] - b[i]);
        b2[i] = 0.0;
    }
    const auto scaled = wilcoxon_signed_rank(a2, b2);
    CHECK(scaled.p_value == doctest::Approx(ab.p_value).epsilon(1e-12));
}

TEST_CASE("p values stay in (0, 1]") {
    Rng rng(15);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(40));
        std::vector<double> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a[i] = rng.normal();
            b[i] = rng.normal() + rng.uniform(-1, 1);
        }
        const auto r = wilcoxon_signed_rank(a, b);
        CHECK(r.p_value > 0.0);
        CHECK(r.p_value <= 1.0);
    }
}

TEST_CASE("mismatched or empty samples are rejected") {
    CHECK_THROWS_AS(wilcoxon_signed_rank({1, 2}, {1}), ConfigError);
    CHECK_THROWS_AS(wilcoxon_signed_rank({}, {}), ConfigError);
}

TEST_CASE("mean and population stddev") {
    CHECK(mean({1, 2, 3, 4}) == doctest::Approx(2.5));
    CHECK(stddev({5}) == 0.0);
    CHECK(stddev({1, 3}) == doctest::Approx(1.0));
}
