#pragma once

#include <vector>

#include "softseg/errors.hpp"

namespace softseg::stats {

enum class WilcoxonMethod { Auto, Exact, Normal };

struct WilcoxonResult {
    double p_value = 1.0;       // two-sided, in (0, 1]
    double statistic = 0.0;     // W+ (sum of positive-difference ranks)
    int n_effective = 0;        // pairs left after dropping zero differences
    bool degenerate = false;    // all differences were zero
    WilcoxonMethod method_used = WilcoxonMethod::Exact;
};

// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences are
// dropped, ties get mid-ranks. Exact null distribution for n <= 25, normal
// approximation with tie and continuity corrections above (or when forced).
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                    WilcoxonMethod method = WilcoxonMethod::Auto);

double mean(const std::vector<double>& v);
// population standard deviation; a single observation yields 0
double stddev(const std::vector<double>& v);

}  // namespace softseg::stats
