#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "anderson/analysis.hpp"

using namespace anderson;

namespace {

const auto kUniform = DisorderModel::uniform(-0.5, 0.5, 1.0);

MomentEstimate point_estimate(double v, double rel = 0.01)
{
    MomentEstimate m;
    m.value = v;
    m.ci_low = v * (1 - rel);
    m.ci_high = v * (1 + rel);
    return m;
}

MomentEstimate interval(double lo, double hi)
{
    MomentEstimate m;
    m.ci_low = lo;
    m.ci_high = hi;
    m.value = 0.5 * (lo + hi);
    return m;
}

// Block means exp(log f(r) + noise), with the median and sign-rank interval
// computed here so the fit sees a consistent estimate.
DecaySeries noisy_series(std::mt19937_64& gen, double A, double mu, double sigma, std::size_t k = 20)
{
    std::normal_distribution<double> noise(0.0, sigma);
    DecaySeries s;
    for (int r = 1; r <= 8; ++r) {
        MomentEstimate m;
        for (std::size_t b = 0; b < k; ++b) m.block_means.push_back(A * std::exp(-mu * r + noise(gen)));
        auto sorted = m.block_means;
        std::sort(sorted.begin(), sorted.end());
        m.value = 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
        const std::size_t j = sign_interval_rank(k);
        m.ci_low = sorted[j - 1];
        m.ci_high = sorted[k - j];
        s.points.push_back({double(r), m});
    }
    return s;
}

}  // namespace

TEST(FitExponential, ExactData)
{
    DecaySeries s;
    for (int r = 0; r < 10; ++r) s.points.push_back({double(r), point_estimate(3.0 * std::exp(-0.7 * r))});
    const auto f = fit_exponential(s);
    EXPECT_NEAR(f.A, 3.0, 1e-10);
    EXPECT_NEAR(f.mu, 0.7, 1e-12);
    EXPECT_NEAR(f.mu_ci_low, 0.7, 1e-9);
    EXPECT_NEAR(f.mu_ci_high, 0.7, 1e-9);
    EXPECT_EQ(f.ci_method, "wls_t");
    EXPECT_LT(f.goodness.rms_residual, 1e-12);
    EXPECT_FALSE(f.goodness.curvature_flag);
}

TEST(FitExponential, CurvatureDetected)
{
    DecaySeries s;
    for (int r = 0; r < 10; ++r) s.points.push_back({double(r), point_estimate(std::exp(-0.5 * r - 0.05 * r * r))});
    const auto f = fit_exponential(s);
    EXPECT_NEAR(f.goodness.curvature, -0.05, 1e-9);
    EXPECT_TRUE(f.goodness.curvature_flag);
}

TEST(FitExponential, Preconditions)
{
    DecaySeries s;
    s.points = {{0, point_estimate(1)}, {1, point_estimate(0.5)}};
    EXPECT_THROW(fit_exponential(s), std::invalid_argument);
    s.points.push_back({1, point_estimate(0.2)});
    EXPECT_THROW(fit_exponential(s), std::invalid_argument);
    s.points.back().distance = 2;
    s.points.back().moment.value = 0.0;
    EXPECT_THROW(fit_exponential(s), std::invalid_argument);
}

TEST(FitExponential, BootstrapCoverage)
{
    std::mt19937_64 gen(31);
    int covered = 0;
    const int trials = 40;
    for (int t = 0; t < trials; ++t) {
        const auto s = noisy_series(gen, 2.0, 0.4, 0.3);
        FitOptions opt;
        opt.bootstrap_reps = 500;
        opt.bootstrap_seed = 100 + t;
        const auto f = fit_exponential(s, opt);
        ASSERT_EQ(f.ci_method, "block_bootstrap");
        ASSERT_LE(f.mu_ci_low, f.mu_ci_high);
        if (f.mu_ci_low <= 0.4 && 0.4 <= f.mu_ci_high) ++covered;
    }
    // nominal 95%; Bin(40, 0.95) falls below 32 with probability < 0.1%
    EXPECT_GE(covered, 32);
}

TEST(FitExponential, BootstrapIsSeeded)
{
    std::mt19937_64 gen(5);
    const auto s = noisy_series(gen, 1.0, 1.0, 0.2);
    FitOptions opt;
    opt.bootstrap_reps = 300;
    const auto a = fit_exponential(s, opt);
    const auto b = fit_exponential(s, opt);
    EXPECT_EQ(a.mu_ci_low, b.mu_ci_low);
    EXPECT_EQ(a.mu_ci_high, b.mu_ci_high);
}

TEST(DecaySeries, OrderingAndReduction)
{
    const Region r = Region::box(2, 2);
    const std::vector<Site> targets{{2, 0}, {0, 1}, {1, 0}, {0, 0}, {-2, 0}};
    const auto s = decay_series(kUniform.with_coupling(10.0), r, {0, 0}, targets, {0.0, 0.0}, 1.0 / 3.0, 200, 3);
    ASSERT_EQ(s.points.size(), 3u);
    EXPECT_EQ(s.points[0].distance, 0.0);
    EXPECT_EQ(s.points[1].distance, 1.0);
    EXPECT_EQ(s.points[2].distance, 2.0);
    const auto row = estimate_row_moments(kUniform.with_coupling(10.0), r, {0, 0}, targets, {0.0, 0.0}, 1.0 / 3.0, 200, 3);
    EXPECT_EQ(s.points[1].moment.value, std::max(row[1].value, row[2].value));
    EXPECT_EQ(s.points[2].moment.value, std::max(row[0].value, row[4].value));
    EXPECT_EQ(s.lambda, 10.0);
}

TEST(DecaySeries, StrongDisorderRateNearSingleSiteValue)
{
    // for large coupling G(0, r) is close to prod_{i=0}^{r} 1/(lambda V_i), whose
    // s-th moment is m^{r+1} with m = E|lambda V|^{-s}
    const double lambda = 200.0, s = 1.0 / 3.0;
    const double m = std::pow(2.0, s) / ((1 - s) * std::pow(lambda, s));
    const Region chain = Region::interval(0, 10);
    std::vector<Site> targets;
    for (int r = 1; r <= 10; ++r) targets.push_back({r});
    const auto series = decay_series(kUniform.with_coupling(lambda), chain, {0}, targets, {0.0, 0.0}, s, 4000, 8);
    const auto f = fit_exponential(series);
    EXPECT_NEAR(f.mu, -std::log(m), 0.05 * -std::log(m));
    EXPECT_EQ(f.ci_method, "block_bootstrap");
}

TEST(PowerLaw, ThresholdsAndOutcomes)
{
    EXPECT_EQ(power_law_exponent(PowerLawVariant::finite_volume, 1), 0);
    EXPECT_EQ(power_law_exponent(PowerLawVariant::finite_volume, 3), 6);
    EXPECT_EQ(power_law_exponent(PowerLawVariant::infinite_volume_proxy, 2), 4);
    EXPECT_EQ(power_law_region(PowerLawVariant::infinite_volume_proxy, 2, 4).size(), 17u * 17u);
    const auto pass = power_law_from_estimate(interval(0.001, 0.002), {4, 0}, 2, 4, 1.0, PowerLawVariant::finite_volume);
    EXPECT_DOUBLE_EQ(pass.threshold, 1.0 / 64.0);
    EXPECT_EQ(pass.outcome, Outcome::pass);
    EXPECT_EQ(power_law_from_estimate(interval(0.1, 0.2), {4, 0}, 2, 4, 1.0, PowerLawVariant::finite_volume).outcome,
              Outcome::fail);
    EXPECT_EQ(power_law_from_estimate(interval(0.01, 0.02), {4, 0}, 2, 4, 1.0, PowerLawVariant::finite_volume).outcome,
              Outcome::inconclusive);
    EXPECT_THROW(power_law_test(kUniform, 2, 0.0, 3, 0.3, PowerLawVariant::finite_volume, 1.0, 100, 1), std::invalid_argument);
    EXPECT_THROW(power_law_test(kUniform, 2, 0.0, 4, 0.3, PowerLawVariant::finite_volume, 0.0, 100, 1), std::invalid_argument);
    EXPECT_THROW(parse_power_law_variant("bulk"), std::invalid_argument);
}

TEST(PowerLaw, RunsOnBox)
{
    const auto r = power_law_test(kUniform.with_coupling(50.0), 1, 0.0, 4, 1.0 / 3.0, PowerLawVariant::finite_volume, 1.0,
                                  200, 4);
    EXPECT_EQ(r.region_sites, 9u);
    // the shell is L/2 <= |y| <= L; strong disorder favours its inner edge
    EXPECT_EQ(std::abs(r.maximizer[0]), 2);
    // d = 1 makes the threshold B itself; a strongly localized chain sits far below it
    EXPECT_EQ(r.threshold, 1.0);
    EXPECT_EQ(r.outcome, Outcome::pass);
}

TEST(MobilityEdge, ViolationMatchesPowerLawPass)
{
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> u(-6, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 1 + trial % 3;
        const int L = 4 + trial % 5;
        const double a = std::pow(10.0, u(gen)), b = std::pow(10.0, u(gen));
        const auto est = interval(std::min(a, b), std::max(a, b));
        for (auto v : {PowerLawVariant::finite_volume, PowerLawVariant::infinite_volume_proxy}) {
            const double B = 0.5;
            const auto pl = power_law_from_estimate(est, {}, d, L, B, v);
            const auto me = mobility_edge_bound_check({{L, est}}, d, B, B, v);
            EXPECT_EQ(pl.outcome == Outcome::pass, me.status[0] == BoundStatus::violated);
            EXPECT_EQ(pl.outcome == Outcome::fail, me.status[0] == BoundStatus::satisfied);
            EXPECT_EQ(me.inconsistent_with_mobility_edge, me.status[0] == BoundStatus::violated);
        }
    }
    EXPECT_THROW(mobility_edge_bound_check({}, 1, 1, 1), std::invalid_argument);
}

TEST(MobilityEdge, PicksConstantByVariant)
{
    const std::vector<ShellPoint> pts{{4, interval(0.01, 0.02)}, {8, interval(0.001, 0.002)}};
    const auto fv = mobility_edge_bound_check(pts, 2, 1.0, 100.0, PowerLawVariant::finite_volume);
    EXPECT_DOUBLE_EQ(fv.bounds[0], 1.0 / 64.0);
    EXPECT_DOUBLE_EQ(fv.bounds[1], 1.0 / 512.0);
    const auto px = mobility_edge_bound_check(pts, 2, 1.0, 100.0, PowerLawVariant::infinite_volume_proxy);
    EXPECT_DOUBLE_EQ(px.bounds[0], 100.0 / 256.0);
    EXPECT_EQ(px.status[0], BoundStatus::violated);
    EXPECT_TRUE(px.inconsistent_with_mobility_edge);
}

TEST(OffAxis, Scan)
{
    const Region r = Region::interval(-3, 3);
    const std::vector<double> etas{0.0, 0.1, 1.0, 10.0};
    const auto scan = off_axis_scan(kUniform.with_coupling(2.0), r, {0}, {2}, 0.0, etas, 0.5, 400, 6);
    ASSERT_EQ(scan.estimates.size(), 4u);
    // |G| <= 1/eta
    for (const double b : scan.estimates[3].block_means) EXPECT_LE(b, std::pow(10.0, -0.5));
    EXPECT_GT(scan.estimates[0].value, scan.estimates[3].value);
    EXPECT_TRUE(scan.attained_near_zero);
    EXPECT_EQ(scan.estimates[0].block_means,
              estimate_moment(kUniform.with_coupling(2.0), {r, {0}, {2}, {0.0, 0.0}, 0.5, std::nullopt}, 400, 6).block_means);
    EXPECT_THROW(off_axis_scan(kUniform, r, {0}, {2}, 0.0, {0.1, 1.0}, 0.5, 400, 6), std::invalid_argument);
}

TEST(FitExponential, ScalingEquivariance)
{
    std::mt19937_64 gen(17);
    const auto s = noisy_series(gen, 1.5, 0.6, 0.2);
    auto scaled = s;
    const double c = 7.25;
    for (auto& p : scaled.points) {
        p.moment.value *= c;
        p.moment.ci_low *= c;
        p.moment.ci_high *= c;
        for (auto& b : p.moment.block_means) b *= c;
    }
    FitOptions opt;
    opt.bootstrap_reps = 300;
    const auto a = fit_exponential(s, opt);
    const auto b = fit_exponential(scaled, opt);
    EXPECT_NEAR(b.A, c * a.A, 1e-12 * c * a.A);
    EXPECT_NEAR(b.mu, a.mu, 1e-12);
    EXPECT_NEAR(b.mu_ci_low, a.mu_ci_low, 1e-12);
    EXPECT_NEAR(b.mu_ci_high, a.mu_ci_high, 1e-12);
}

TEST(DecaySeries, CsvRoundTrip)
{
    std::mt19937_64 gen(23);
    const auto s = noisy_series(gen, 2.0, 0.3, 0.1);
    std::istringstream in(decay_series_csv(s));
    const auto back = parse_decay_series_csv(in);
    ASSERT_EQ(back.points.size(), s.points.size());
    auto stripped = s;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        EXPECT_EQ(back.points[i].distance, s.points[i].distance);
        EXPECT_EQ(back.points[i].moment.value, s.points[i].moment.value);
        EXPECT_EQ(back.points[i].moment.ci_low, s.points[i].moment.ci_low);
        EXPECT_EQ(back.points[i].moment.ci_high, s.points[i].moment.ci_high);
        stripped.points[i].moment.block_means.clear();
    }
    EXPECT_EQ(fit_exponential(back).mu, fit_exponential(stripped).mu);
    EXPECT_EQ(fit_exponential(back).ci_method, "wls_t");
    std::istringstream bad("r,m\n1,2\n");
    EXPECT_THROW(parse_decay_series_csv(bad), std::invalid_argument);
}

TEST(PowerLaw, ExponentialSeriesPassesForLargeL)
{
    for (int L : {30, 40}) {
        const double v = std::exp(-0.5 * L);
        EXPECT_EQ(power_law_from_estimate(interval(0.9 * v, 1.1 * v), {L, 0}, 2, L, 1.0, PowerLawVariant::finite_volume).outcome,
                  Outcome::pass);
    }
}

TEST(PowerLaw, StrongDisorderSquareRecorded)
{
    // recorded from a pilot run: at L = 6 the threshold 1/216 sits far below the
    // shell supremum, which is dominated by the inner shell |y| = 3
    const auto r = power_law_test(kUniform.with_coupling(30.0), 2, 0.0, 6, 1.0 / 3.0, PowerLawVariant::finite_volume, 1.0,
                                  400, 6);
    EXPECT_EQ(r.exponent, 3);
    EXPECT_DOUBLE_EQ(r.threshold, 1.0 / 216.0);
    EXPECT_EQ(norm1(r.maximizer), 3);
    EXPECT_EQ(r.outcome, Outcome::fail);
}

TEST(MobilityEdge, SyntheticSeries)
{
    std::vector<ShellPoint> slow, fast;
    for (int L = 4; L <= 20; L += 4) {
        const double p = 1.0 / L, e = std::exp(-double(L));
        slow.push_back({L, interval(0.9 * p, 1.1 * p)});
        fast.push_back({L, interval(0.9 * e, 1.1 * e)});
    }
    const auto a = mobility_edge_bound_check(slow, 2, 1.0, 1.0);
    for (auto st : a.status) EXPECT_EQ(st, BoundStatus::satisfied);
    EXPECT_FALSE(a.inconsistent_with_mobility_edge);
    const auto b = mobility_edge_bound_check(fast, 2, 1.0, 1.0);
    EXPECT_EQ(b.status.back(), BoundStatus::violated);
    EXPECT_TRUE(b.inconsistent_with_mobility_edge);
    // d = 1: the bound is the constant B1 at every L
    const auto c = mobility_edge_bound_check(slow, 1, 0.5, 1.0);
    for (double bound : c.bounds) EXPECT_EQ(bound, 0.5);
}

TEST(OffAxis, EvenInEta)
{
    const Region r = Region::interval(0, 9);
    const auto scan = off_axis_scan(kUniform.with_coupling(3.0), r, {0}, {4}, 0.2, {-1.0, -0.1, 0.0, 0.1, 1.0}, 1.0 / 3.0,
                                    400, 9);
    // H is real symmetric, so G(E - i eta) is the conjugate of G(E + i eta)
    EXPECT_EQ(scan.estimates[0].block_means, scan.estimates[4].block_means);
    EXPECT_EQ(scan.estimates[1].block_means, scan.estimates[3].block_means);
}

TEST(OffAxis, StrongDisorderChainPeaksAtZero)
{
    const Region r = Region::interval(0, 9);
    const auto scan = off_axis_scan(kUniform.with_coupling(30.0), r, {0}, {9}, 0.0, {0.0, 0.1, 1.0, 10.0}, 1.0 / 3.0, 2000, 10);
    EXPECT_EQ(scan.argmax_eta, 0.0);
    EXPECT_TRUE(scan.attained_near_zero);
}
