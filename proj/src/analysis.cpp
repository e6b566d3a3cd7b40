#include "rgr/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include <gmp.h>

#include <boost/math/distributions/students_t.hpp>

namespace rgr {

double lower_bound_dk(std::int64_t m, std::int64_t m_prime, int d_model, int bits_per_param) {
    if (m < 1 || d_model < 1 || bits_per_param < 1) {
        throw std::invalid_argument("lower bound needs m, d_model, b >= 1");
    }
    const std::int64_t n = m * (m - 1);
    if (m_prime < 0 || m_prime > n) {
        throw std::invalid_argument("edge count must lie in [0, m(m-1)]");
    }
    mpz_t binom;
    mpz_init(binom);
    mpz_bin_uiui(binom, static_cast<unsigned long>(n), static_cast<unsigned long>(m_prime));
    long exponent = 0;
    const double mantissa = mpz_get_d_2exp(&exponent, binom);
    mpz_clear(binom);
    // binom = mantissa * 2^exponent with mantissa in [0.5, 1).
    const double log2_binom = static_cast<double>(exponent) + std::log2(mantissa);
    return log2_binom / (2.0 * bits_per_param * d_model);
}

double predicted_dk(int m, int d_model, double c) {
    if (m < 2 || d_model < 1) {
        throw std::invalid_argument("predicted_dk needs m >= 2 and d_model >= 1");
    }
    return c * m * std::log(static_cast<double>(m)) / d_model;
}

double student_t_quantile(double prob, double dof) {
    const boost::math::students_t dist(dof);
    return boost::math::quantile(dist, prob);
}

Interval t_interval(const std::vector<double>& samples, double level) {
    const auto n = samples.size();
    if (n < 2) {
        throw std::invalid_argument("t interval needs at least two samples");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw std::invalid_argument("confidence level must lie in (0, 1)");
    }
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples) {
        ss += (x - mean) * (x - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const double half = student_t_quantile(0.5 + level / 2.0, static_cast<double>(n - 1)) * sd /
                        std::sqrt(static_cast<double>(n));
    return {mean, mean - half, mean + half};
}

PairedTTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("paired samples differ in length");
    }
    const auto n = a.size();
    if (n < 2) {
        throw std::invalid_argument("paired t-test needs at least two pairs");
    }
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = a[i] - b[i];
    }
    PairedTTest out;
    out.mean_difference = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : d) {
        ss += (x - out.mean_difference) * (x - out.mean_difference);
    }
    const double se = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
    if (se == 0.0) {
        if (out.mean_difference == 0.0) {
            return out;
        }
        out.t = std::copysign(std::numeric_limits<double>::infinity(), out.mean_difference);
        out.p_value = 0.0;
        return out;
    }
    out.t = out.mean_difference / se;
    const boost::math::students_t dist(static_cast<double>(n - 1));
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
    return out;
}

std::vector<SweepRecord> aggregate_runs(const std::vector<RunRecord>& runs, double level) {
    using Key = std::tuple<int, int, int, int>;
    std::map<Key, std::map<std::uint64_t, double>> groups;
    for (const auto& r : runs) {
        if (r.test_f1 < 0.0 || r.test_f1 > 1.0) {
            throw std::invalid_argument("F1 outside [0, 1] in a run record");
        }
        groups[{r.m, r.d_model, r.h, r.total_key_dim}][r.seed] = r.test_f1;
    }
    std::vector<SweepRecord> out;
    for (const auto& [key, by_seed] : groups) {
        SweepRecord rec;
        std::tie(rec.m, rec.d_model, rec.h, rec.total_key_dim) = key;
        for (const auto& [seed, f1] : by_seed) {
            rec.seed_ids.push_back(seed);
            rec.per_seed_f1.push_back(f1);
        }
        rec.seeds = static_cast<int>(rec.per_seed_f1.size());
        if (rec.seeds == 1) {
            rec.mean_f1 = rec.f1_ci_low = rec.f1_ci_high = rec.per_seed_f1.front();
        } else {
            const auto ci = t_interval(rec.per_seed_f1, level);
            rec.mean_f1 = ci.mean;
            rec.f1_ci_low = ci.low;
            rec.f1_ci_high = ci.high;
        }
        out.push_back(std::move(rec));
    }
    return out;
}

namespace {

std::optional<int> min_dk_where(const std::vector<SweepRecord>& records, auto&& pred) {
    std::optional<int> best;
    for (const auto& r : records) {
        if (pred(r) && (!best || r.total_key_dim < *best)) {
            best = r.total_key_dim;
        }
    }
    return best;
}

}  // namespace

DkStarEstimate extract_dk_star(const std::vector<SweepRecord>& records, double bar) {
    DkStarEstimate est;
    est.central = min_dk_where(records, [bar](const SweepRecord& r) { return r.mean_f1 >= bar; });
    est.conservative = min_dk_where(records, [bar](const SweepRecord& r) { return r.f1_ci_low >= bar; });
    est.optimistic = min_dk_where(records, [bar](const SweepRecord& r) { return r.f1_ci_high >= bar; });
    if (const auto heads = optimal_heads_interval(records, 0.05, bar)) {
        est.h_star = heads->h_star;
        est.h_min = heads->h_min;
        est.h_max = heads->h_max;
    }
    return est;
}

std::optional<HeadInterval> optimal_heads_interval(const std::vector<SweepRecord>& records, double alpha, double bar,
                                                   double pool_tolerance) {
    // Smallest passing record per head count.
    std::map<int, const SweepRecord*> best;
    for (const auto& r : records) {
        if (r.mean_f1 < bar) {
            continue;
        }
        auto it = best.find(r.h);
        if (it == best.end() || r.total_key_dim < it->second->total_key_dim ||
            (r.total_key_dim == it->second->total_key_dim && r.mean_f1 > it->second->mean_f1)) {
            best[r.h] = &r;
        }
    }
    if (best.empty()) {
        return std::nullopt;
    }
    const SweepRecord* star = nullptr;
    for (const auto& [h, rec] : best) {
        if (!star || rec->total_key_dim < star->total_key_dim ||
            (rec->total_key_dim == star->total_key_dim && rec->mean_f1 > star->mean_f1)) {
            star = rec;
        }
    }

    HeadInterval out;
    out.h_star = out.h_min = out.h_max = star->h;
    const double limit = (1.0 + pool_tolerance) * star->total_key_dim;
    for (const auto& [h, rec] : best) {
        if (rec->total_key_dim > limit) {
            continue;
        }
        out.pool.push_back(h);
        bool keep = rec == star;
        if (!keep) {
            if (rec->per_seed_f1.size() != star->per_seed_f1.size() || rec->seed_ids != star->seed_ids) {
                throw std::invalid_argument("per-seed F1 lists are not aligned by seed");
            }
            keep = rec->per_seed_f1.size() < 2 ||
                   paired_t_test(rec->per_seed_f1, star->per_seed_f1).p_value > alpha;
        }
        if (keep) {
            out.retained.push_back(h);
            out.h_min = std::min(out.h_min, h);
            out.h_max = std::max(out.h_max, h);
        }
    }
    return out;
}

ScalingFit fit_scaling(const std::vector<Point>& points) {
    if (points.size() < 2) {
        throw std::invalid_argument("fit needs at least two points");
    }
    double sxy = 0.0;
    double sxx = 0.0;
    double sy = 0.0;
    for (const auto& p : points) {
        sxy += p.x * p.y;
        sxx += p.x * p.x;
        sy += p.y;
    }
    if (sxx == 0.0) {
        throw std::invalid_argument("fit needs a non-zero x");
    }
    ScalingFit fit;
    fit.slope = sxy / sxx;
    const double mean_y = sy / static_cast<double>(points.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (const auto& p : points) {
        ss_res += (p.y - fit.slope * p.x) * (p.y - fit.slope * p.x);
        ss_tot += (p.y - mean_y) * (p.y - mean_y);
    }
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity());
    return fit;
}

AffineFit fit_affine(const std::vector<Point>& points) {
    if (points.size() < 2) {
        throw std::invalid_argument("affine fit needs at least two points");
    }
    const auto n = static_cast<double>(points.size());
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (const auto& p : points) {
        sxx += (p.x - mx) * (p.x - mx);
        sxy += (p.x - mx) * (p.y - my);
        syy += (p.y - my) * (p.y - my);
    }
    if (sxx == 0.0) {
        throw std::invalid_argument("affine fit needs at least two distinct x values");
    }
    AffineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (const auto& p : points) {
        const double r = p.y - (fit.slope * p.x + fit.intercept);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

}  // namespace rgr
