#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rgr {

// log2 C(m(m-1), m') / (2 b d_model); the additive O(1) slack is dropped.
double lower_bound_dk(std::int64_t m, std::int64_t m_prime, int d_model, int bits_per_param);

// C m ln(m) / d_model.
double predicted_dk(int m, int d_model, double c);

struct Interval {
    double mean = 0.0;
    double low = 0.0;
    double high = 0.0;
};

// mean +- t_{(1+level)/2, n-1} s / sqrt(n).
Interval t_interval(const std::vector<double>& samples, double level = 0.95);

double student_t_quantile(double prob, double dof);

struct PairedTTest {
    double mean_difference = 0.0;  // mean of a - b
    double t = 0.0;
    double p_value = 1.0;  // two-sided; 1 when every difference is zero
};

PairedTTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct RunRecord {
    int m = 0;
    int d_model = 0;
    int h = 0;
    int total_key_dim = 0;
    std::uint64_t seed = 0;
    double test_f1 = 0.0;
    int steps = 0;
    bool stopped_early = false;
    int ell = 0;       // 0 when not logged
    int ell_test = 0;  // 0 when not logged
};

struct SweepRecord {
    int m = 0;
    int d_model = 0;
    int h = 0;
    int total_key_dim = 0;
    int seeds = 0;
    double mean_f1 = 0.0;
    double f1_ci_low = 0.0;
    double f1_ci_high = 0.0;
    std::vector<std::uint64_t> seed_ids;  // ascending
    std::vector<double> per_seed_f1;      // aligned with seed_ids
};

// Groups runs by (m, d_model, h, D_K); a single seed gets a zero-width interval.
std::vector<SweepRecord> aggregate_runs(const std::vector<RunRecord>& runs, double level = 0.95);

struct DkStarEstimate {
    std::optional<int> central;
    std::optional<int> optimistic;
    std::optional<int> conservative;
    std::optional<int> h_star;
    std::optional<int> h_min;
    std::optional<int> h_max;
};

// h_star and its interval come from optimal_heads_interval at alpha = 0.05, so
// records must come from one (m, d_model).
DkStarEstimate extract_dk_star(const std::vector<SweepRecord>& records, double bar = 0.99);

struct HeadInterval {
    int h_star = 0;
    int h_min = 0;
    int h_max = 0;
    std::vector<int> pool;      // head counts whose best D_K is within 10% of D_K*
    std::vector<int> retained;  // pool members not rejected by the paired test
};

// Records from one (m, d_model). Each head count is represented by its
// smallest D_K reaching the bar on mean F1; that is compared seed-by-seed
// with h*'s record at D_K*. Returns nullopt when nothing passes.
std::optional<HeadInterval> optimal_heads_interval(const std::vector<SweepRecord>& records, double alpha = 0.05,
                                                   double bar = 0.99, double pool_tolerance = 0.10);

struct ScalingFit {
    double slope = 0.0;
    double r_squared = 0.0;
};

struct AffineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// Through-origin least squares; R^2 is taken about the mean of y.
ScalingFit fit_scaling(const std::vector<Point>& points);
AffineFit fit_affine(const std::vector<Point>& points);

}  // namespace rgr
