#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "anderson/moments.hpp"

using namespace anderson;

namespace {

const auto kUniform = DisorderModel::uniform(-0.5, 0.5, 1.0);

// E|lambda V|^{-s} for V ~ uniform(-1/2, 1/2)
double single_site_exact(double lambda, double s) { return std::pow(2.0, s) / ((1.0 - s) * std::pow(lambda, s)); }

MomentEstimate single_site(double lambda, double s, std::size_t n, std::uint64_t seed, double E = 0.0)
{
    const Region o = Region::box(1, 0);
    return estimate_moment(kUniform.with_coupling(lambda), {o, {0}, {0}, {E, 0.0}, s, std::nullopt}, n, seed);
}

bool covers(const MomentEstimate& e, double v) { return e.ci_low <= v && v <= e.ci_high; }

double binomial_cdf_half(std::size_t k, std::size_t j)
{
    double acc = 0;
    for (std::size_t m = 0; m <= j; ++m) acc += std::exp(std::lgamma(k + 1.0) - std::lgamma(m + 1.0) - std::lgamma(k - m + 1.0)) * std::pow(0.5, k);
    return acc;
}

}  // namespace

TEST(SignInterval, Ranks)
{
    EXPECT_EQ(sign_interval_rank(20), 6u);
    EXPECT_EQ(sign_interval_rank(10), 2u);
    for (std::size_t k = 10; k <= 60; ++k) {
        const std::size_t j = sign_interval_rank(k);
        // [X_(j), X_(k+1-j)] misses the median with probability 2 P(Bin(k,1/2) <= j-1)
        EXPECT_LE(2 * binomial_cdf_half(k, j - 1), 0.05 + 1e-12) << k;
        EXPECT_GT(2 * binomial_cdf_half(k, j), 0.05) << k;
    }
}

TEST(MedianOfMeans, KnownBlocks)
{
    std::vector<double> samples(100);
    std::iota(samples.begin(), samples.end(), 0.0);
    const auto e = median_of_means(samples, 10);
    // block means 4.5, 14.5, ..., 94.5; median 49.5; ranks 2 and 9
    EXPECT_DOUBLE_EQ(e.value, 49.5);
    EXPECT_DOUBLE_EQ(e.ci_low, 14.5);
    EXPECT_DOUBLE_EQ(e.ci_high, 84.5);
    EXPECT_THROW(median_of_means(samples, 7), std::invalid_argument);
}

TEST(Estimate, SingleSiteClosedForm)
{
    const auto e = single_site(4.0, 0.5, 20000, 1);
    EXPECT_NEAR(single_site_exact(4.0, 0.5), std::sqrt(2.0), 1e-15);
    EXPECT_TRUE(covers(e, std::sqrt(2.0))) << e.ci_low << " " << e.value << " " << e.ci_high;
    EXPECT_LE(e.ci_low, e.value);
    EXPECT_LE(e.value, e.ci_high);
    EXPECT_EQ(e.n_samples, 20000u);
    EXPECT_EQ(e.n_blocks, 20u);
    EXPECT_EQ(e.block_means.size(), 20u);
}

TEST(Estimate, SmallExponentNearOne)
{
    const auto e = single_site(1.0, 0.01, 10000, 2);
    EXPECT_TRUE(covers(e, single_site_exact(1.0, 0.01)));
    EXPECT_NEAR(e.value, 1.0, 0.03);
}

TEST(Estimate, TwoSiteChainMatchesQuadrature)
{
    // H = [[a, -1], [-1, b]] with a, b uniform on [-1/2, 1/2]; at E = 0,
    // G(1,1) = b / (ab - 1), G(1,2) = 1 / (ab - 1). Midpoint rule, 800^2 nodes.
    const double s = 1.0 / 3.0;
    const int n = 800;
    double q12 = 0, q11 = 0;
    for (int i = 0; i < n; ++i) {
        const double a = -0.5 + (i + 0.5) / n;
        for (int j = 0; j < n; ++j) {
            const double b = -0.5 + (j + 0.5) / n;
            const double det = a * b - 1.0;
            q12 += std::pow(std::abs(1.0 / det), s);
            q11 += std::pow(std::abs(b / det), s);
        }
    }
    q12 /= double(n) * n;
    q11 /= double(n) * n;
    const Region chain = Region::interval(0, 1);
    const auto e12 = estimate_moment(kUniform, {chain, {0}, {1}, {0.0, 0.0}, s, std::nullopt}, 20000, 3);
    const auto e11 = estimate_moment(kUniform, {chain, {0}, {0}, {0.0, 0.0}, s, std::nullopt}, 20000, 3);
    EXPECT_TRUE(covers(e12, q12)) << e12.ci_low << " " << q12 << " " << e12.ci_high;
    EXPECT_TRUE(covers(e11, q11)) << e11.ci_low << " " << q11 << " " << e11.ci_high;
}

TEST(Estimate, LambdaScalingSlope)
{
    const double s = 1.0 / 3.0;
    std::vector<double> lx, ly;
    for (double lambda : {1.0, 10.0, 100.0}) {
        lx.push_back(std::log(lambda));
        ly.push_back(std::log(single_site(lambda, s, 20000, 4).value));
    }
    const double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (ly[0] + ly[1] + ly[2]) / 3;
    double sxy = 0, sxx = 0;
    for (int k = 0; k < 3; ++k) {
        sxy += (lx[k] - mx) * (ly[k] - my);
        sxx += (lx[k] - mx) * (lx[k] - mx);
    }
    EXPECT_NEAR(sxy / sxx, -s, 0.05 * s);
}

TEST(Estimate, DeterministicAcrossThreads)
{
    const Region r = Region::box(2, 2);
    const MomentQuery q{r, {0, 0}, {2, 0}, {0.1, 0.0}, 1.0 / 3.0, std::nullopt};
    EstimatorOptions one, four;
    four.threads = 4;
    const auto a = estimate_moment(kUniform.with_coupling(5.0), q, 400, 77, one);
    const auto b = estimate_moment(kUniform.with_coupling(5.0), q, 400, 77, four);
    const auto c = estimate_moment(kUniform.with_coupling(5.0), q, 400, 77, one);
    EXPECT_EQ(a.block_means, b.block_means);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.block_means, c.block_means);
    EXPECT_NE(a.value, estimate_moment(kUniform.with_coupling(5.0), q, 400, 78, one).value);
}

TEST(Estimate, MonotoneInSWhenGreenBelowOne)
{
    // E = 5 is at distance > 2 from the spectrum, so every |G| < 1/2
    const Region r = Region::interval(-2, 2);
    std::vector<double> values;
    for (double s : {0.2, 0.5, 0.8}) {
        values.push_back(estimate_moment(kUniform, {r, {0}, {1}, {5.0, 0.0}, s, std::nullopt}, 200, 9).value);
    }
    EXPECT_GT(values[0], values[1]);
    EXPECT_GT(values[1], values[2]);
}

TEST(Estimate, RestrictionEqualsDirectSubregion)
{
    const Region big = Region::interval(-3, 3);
    const Region w = Region::interval(-1, 2);
    const auto a = estimate_moment(kUniform.with_coupling(2.0), {big, {0}, {2}, {0.0, 0.0}, 0.3, w}, 200, 12);
    const auto b = estimate_moment(kUniform.with_coupling(2.0), {w, {0}, {2}, {0.0, 0.0}, 0.3, std::nullopt}, 200, 12);
    EXPECT_EQ(a.block_means, b.block_means);
    EXPECT_THROW(estimate_moment(kUniform, {w, {0}, {0}, {0, 0}, 0.3, big}, 200, 1), std::invalid_argument);
}

TEST(Estimate, Preconditions)
{
    const Region r = Region::interval(0, 2);
    EXPECT_THROW(estimate_moment(kUniform, {r, {0}, {1}, {0, 0}, 0.3, std::nullopt}, 99, 1), std::invalid_argument);
    EstimatorOptions odd;
    odd.n_blocks = 7;
    EXPECT_THROW(estimate_moment(kUniform, {r, {0}, {1}, {0, 0}, 0.3, std::nullopt}, 700, 1, odd), std::invalid_argument);
    EXPECT_THROW(estimate_moment(kUniform, {r, {0}, {1}, {0, 0}, 1.0, std::nullopt}, 100, 1), std::invalid_argument);
    EXPECT_THROW(estimate_moment(kUniform, {r, {0}, {5}, {0, 0}, 0.3, std::nullopt}, 100, 1), std::invalid_argument);
}

TEST(Estimator, SolverErrorsAreResampledAndCounted)
{
    EstimatorOptions opt;
    opt.n_blocks = 10;
    std::vector<std::uint64_t> seen;
    auto est = estimate_blocked(100, 1, opt, [&](std::uint64_t index, std::span<double> out) {
        if (index == 3 || index == 50) throw SolverError("singular", 1e300);
        seen.push_back(index);
        out[0] = 1.0;
        return index == 7;
    });
    EXPECT_EQ(est[0].resample_events, 2u);
    EXPECT_EQ(est[0].near_singular, 1u);
    EXPECT_EQ(est[0].value, 1.0);
    EXPECT_EQ(seen[3], resample_index(3, 1));

    EXPECT_THROW(estimate_blocked(100, 1, opt,
                                  [](std::uint64_t index, std::span<double> out) {
                                      out[0] = index == 10 ? NAN : 1.0;
                                      return false;
                                  }),
                 EstimationError);
    EXPECT_THROW(estimate_blocked(100, 1, opt, [](std::uint64_t, std::span<double>) -> bool { throw SolverError("always", 1e300); }),
                 SolverError);
}

TEST(ShellSupremum, Enumeration)
{
    const auto sup = estimate_shell_supremum(kUniform.with_coupling(5.0), Region::box(1, 2), 2, {0, 0}, 1.0 / 3.0, 200, 1);
    EXPECT_EQ(sup.shell, (std::vector<Site>{{-2}, {-1}, {1}, {2}}));
    EXPECT_EQ(sup.all.size(), 4u);
    for (const auto& e : sup.all) EXPECT_LE(e.value, sup.estimate.value);
    EXPECT_THROW(estimate_shell_supremum(kUniform, Region::box(1, 2), 1, {0, 0}, 0.3, 200, 1), std::invalid_argument);
}

TEST(ShellSupremum, SymmetricSitesAgree)
{
    const auto sup = estimate_shell_supremum(kUniform.with_coupling(3.0), Region::box(1, 4), 4, {0, 0}, 1.0 / 3.0, 4000, 2);
    // shell sites are -4..-2, 2..4
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& a = sup.all[k];
        const auto& b = sup.all[5 - k];
        EXPECT_EQ(sup.shell[k][0], -sup.shell[5 - k][0]);
        EXPECT_TRUE(a.ci_low <= b.ci_high && b.ci_low <= a.ci_high);
    }
}

TEST(ShellSupremum, DecreasesWithLAtStrongDisorder)
{
    const auto m = kUniform.with_coupling(30.0);
    const auto s4 = estimate_shell_supremum(m, Region::box(1, 4), 4, {0, 0}, 1.0 / 3.0, 2000, 5);
    const auto s8 = estimate_shell_supremum(m, Region::box(1, 8), 8, {0, 0}, 1.0 / 3.0, 2000, 5);
    EXPECT_GT(s4.estimate.value, s8.estimate.value);
}
