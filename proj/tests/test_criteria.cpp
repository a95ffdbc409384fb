#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "anderson/criteria.hpp"

using namespace anderson;

namespace {

const auto kUniform = DisorderModel::uniform(-0.5, 0.5, 1.0);

// E|lambda V - E|^{-s} for V uniform on [a, b], by the antiderivative of |w|^{-s}.
double uniform_inverse_moment(double a, double b, double lambda, double E, double s)
{
    const double lo = lambda * a - E, hi = lambda * b - E;
    auto F = [s](double w) { return (w < 0 ? -1.0 : 1.0) * std::pow(std::abs(w), 1 - s) / (1 - s); };
    return (F(hi) - F(lo)) / (lambda * (b - a));
}

// Check for tabulated densities: substitution w = sign * t^{1/(1-s)} removes
// the singularity; each piece between density breakpoints is smooth in t and
// gets its own midpoint rule.
double tabulated_inverse_moment_quadrature(const DisorderModel& m, double E, double s)
{
    const double lambda = m.coupling();
    auto density_w = [&](double w) { return m.density((w + E) / lambda) / lambda; };
    const double p = 1.0 / (1.0 - s);
    std::vector<double> cuts{0.0};
    for (const auto& seg : m.segments()) {
        cuts.push_back(lambda * seg.x0 - E);
        cuts.push_back(lambda * seg.x1 - E);
    }
    double total = 0;
    for (int side : {-1, 1}) {
        std::vector<double> ts;
        for (double w : cuts) {
            if (side * w >= 0) ts.push_back(std::pow(side * w, 1.0 - s));
        }
        std::sort(ts.begin(), ts.end());
        for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
            const int n = 20000;
            const double h = (ts[k + 1] - ts[k]) / n;
            double acc = 0;
            // |w|^{-s} dw = p dt for w = t^p
            for (int i = 0; i < n; ++i) acc += p * density_w(side * std::pow(ts[k] + (i + 0.5) * h, p));
            total += acc * h;
        }
    }
    return total;
}

bool covers(const CriterionReport& r, double v) { return r.ci_low <= v && v <= r.ci_high; }

}  // namespace

TEST(InverseMoment, UniformExamples)
{
    EXPECT_NEAR(inverse_moment_closed_form(kUniform, 0.0, 0.5), 2.0 * std::sqrt(2.0), 1e-12);
    for (double lambda : {0.5, 3.0, 100.0}) {
        EXPECT_NEAR(inverse_moment_closed_form(kUniform.with_coupling(lambda), 0.0, 0.3),
                    std::pow(lambda, -0.3) * inverse_moment_closed_form(kUniform, 0.0, 0.3), 1e-12);
    }
    const double v = inverse_moment_closed_form(kUniform, 10.0, 0.5);
    EXPECT_GE(v, 0.30861);
    EXPECT_LE(v, 0.32444);
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-3, 3), l(0.1, 50), ss(0.05, 0.95);
    for (int k = 0; k < 50; ++k) {
        const double E = u(gen), lambda = l(gen), s = ss(gen);
        const auto m = DisorderModel::uniform(-0.5, 1.5, lambda);
        EXPECT_NEAR(inverse_moment_closed_form(m, E, s), uniform_inverse_moment(-0.5, 1.5, lambda, E, s),
                    1e-10 * uniform_inverse_moment(-0.5, 1.5, lambda, E, s));
    }
}

TEST(InverseMoment, TabulatedMatchesQuadrature)
{
    const auto tri = DisorderModel::tabulated({-1, 0, 1}, {0, 1, 0}, 2.0);
    const auto lumpy = DisorderModel::tabulated({-1, -0.2, 0.5, 2}, {0.3, 1.0, 0.1, 0.6}, 1.5);
    for (const auto& m : {tri, lumpy}) {
        for (double E : {0.0, 0.4, -1.3, 5.0}) {
            for (double s : {0.2, 1.0 / 3.0, 0.7}) {
                const double exact = inverse_moment_closed_form(m, E, s);
                EXPECT_NEAR(exact, tabulated_inverse_moment_quadrature(m, E, s), 1e-6 * exact) << E << " " << s;
            }
        }
    }
    // a uniform density entered as a table gives the uniform closed form
    const auto flat = DisorderModel::tabulated({-0.5, 0.5}, {1, 1}, 3.0);
    EXPECT_NEAR(inverse_moment_closed_form(flat, 0.2, 0.4), inverse_moment_closed_form(kUniform.with_coupling(3.0), 0.2, 0.4), 1e-12);
}

TEST(SingleSite, Examples)
{
    EXPECT_DOUBLE_EQ(single_site_prefactor(2), 40.0);
    EXPECT_DOUBLE_EQ(single_site_prefactor(1), 6.0);
    CriterionConstants c;
    c.s = 0.5;
    for (double lambda : {1.0, 16.9, 17.0, 100.0}) {
        const auto r = single_site_test(kUniform.with_coupling(lambda), 1, 0.0, c);
        EXPECT_NEAR(r.lhs, 12.0 * std::sqrt(2.0) / lambda, 1e-12);
        EXPECT_EQ(r.verdict, lambda > 12.0 * std::sqrt(2.0) ? Verdict::certified : Verdict::not_certified);
        EXPECT_EQ(r.rigor, Rigor::analytic);
        EXPECT_EQ(r.ci_low, r.lhs);
        EXPECT_EQ(r.ci_high, r.lhs);
    }
    double prev = INFINITY;
    for (double lambda = 1; lambda < 1e4; lambda *= 1.7) {
        const double v = single_site_test(kUniform.with_coupling(lambda), 2, 0.0, c).lhs;
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(Verdict, Rule)
{
    EXPECT_EQ(verdict_for(0.5, 0.99), Verdict::certified);
    EXPECT_EQ(verdict_for(0.5, 1.0), Verdict::inconclusive);
    EXPECT_EQ(verdict_for(1.0, 2.0), Verdict::not_certified);
    EXPECT_EQ(verdict_for(0.9, 1.1), Verdict::inconclusive);
}

TEST(Theorem1, AnalyticAnchor)
{
    CriterionConstants c;
    const auto r = theorem1_lhs(kUniform.with_coupling(1000.0), Region::box(1, 0), {0.0, 0.0}, c, 100000, 2024);
    const double analytic = 1.2 * 1.2 * 2.0 * inverse_moment_closed_form(kUniform.with_coupling(1000.0), 0.0, 1.0 / 3.0);
    EXPECT_NEAR(analytic, 0.54429, 5e-6);
    EXPECT_TRUE(covers(r, analytic)) << r.ci_low << " " << r.ci_high;
    EXPECT_EQ(r.verdict, Verdict::certified);
    EXPECT_EQ(r.boundary_bonds, 2u);
    EXPECT_EQ(r.sub_terms.size(), 2u);
    EXPECT_NEAR(r.prefactor, 1.44, 1e-12);
    EXPECT_TRUE(r.statistical);
}

TEST(Theorem1, MatchesClosedFormAtRandomParameters)
{
    std::mt19937_64 gen(10);
    std::uniform_real_distribution<double> l(1.0, 200.0), e(-0.3, 0.3), ss(0.1, 0.45);
    for (int k = 0; k < 10; ++k) {
        CriterionConstants c;
        c.s = ss(gen);
        const double lambda = l(gen), E = e(gen) * lambda;
        const auto m = kUniform.with_coupling(lambda);
        const auto r = theorem1_lhs(m, Region::box(1, 0), {E, 0.0}, c, 20000, 100 + k);
        const double a = 1.0 + 2.0 / std::pow(lambda, c.s);
        const double analytic = a * a * 2.0 * inverse_moment_closed_form(m, E, c.s);
        EXPECT_TRUE(covers(r, analytic)) << "lambda " << lambda << " E " << E << " s " << c.s;
    }
}

TEST(Theorem1, MonotoneInConstantAndLambda)
{
    const Region r = Region::box(1, 1);
    CriterionConstants c1, c2;
    c2.C_s = 2.0;
    const auto a = theorem1_lhs(kUniform.with_coupling(5.0), r, {0, 0}, c1, 200, 3);
    const auto b = theorem1_lhs(kUniform.with_coupling(5.0), r, {0, 0}, c2, 200, 3);
    EXPECT_LT(a.lhs, b.lhs);
    EXPECT_EQ(a.moment_sum, b.moment_sum);

    const Region o = Region::box(1, 0);
    const double l1 = theorem1_lhs(kUniform.with_coupling(1.0), o, {0, 0}, c1, 2000, 4).lhs;
    const double l3 = theorem1_lhs(kUniform.with_coupling(1000.0), o, {0, 0}, c1, 2000, 4).lhs;
    EXPECT_LT(l3 / l1, 0.1);
    const double l10 = theorem1_lhs(kUniform.with_coupling(10.0), o, {0, 0}, c1, 2000, 4).lhs;
    const double l1e4 = theorem1_lhs(kUniform.with_coupling(1e4), o, {0, 0}, c1, 2000, 4).lhs;
    EXPECT_GT(l10 / l1e4, 10.0);
}

TEST(Theorem1, BondSumUsesInsideEndpoint)
{
    // Lambda = [-1, 2]: bonds (-1,-2) and (2,3); terms are G(0,-1) and G(0,2)
    const Region r = Region::interval(-1, 2);
    CriterionConstants c;
    const auto rep = theorem1_lhs(kUniform.with_coupling(3.0), r, {0, 0}, c, 400, 5);
    ASSERT_EQ(rep.sub_terms.size(), 2u);
    EXPECT_EQ(rep.sub_terms[0].bond.inside, Site{-1});
    EXPECT_EQ(rep.sub_terms[1].bond.inside, Site{2});
    const auto g_m1 = estimate_moment(kUniform.with_coupling(3.0), {r, {0}, {-1}, {0, 0}, c.s, std::nullopt}, 400, 5);
    EXPECT_EQ(rep.sub_terms[0].estimate.block_means, g_m1.block_means);
    EXPECT_THROW(theorem1_lhs(kUniform, Region::interval(1, 3), {0, 0}, c, 400, 5), std::invalid_argument);
}

TEST(Theorem2, SingleSiteRegion)
{
    CriterionConstants c;
    const auto m = kUniform.with_coupling(50.0);
    const auto r = theorem2_lhs(m, Region::box(1, 0), {0, 0}, c, SubsetStrategy::automatic(Region::box(1, 0)), 20000, 8);
    EXPECT_EQ(r.subsets_evaluated, 1u);
    EXPECT_NEAR(r.prefactor, 2.0 / std::pow(50.0, 1.0 / 3.0), 1e-12);
    const double analytic = r.prefactor * 2.0 * inverse_moment_closed_form(m, 0.0, 1.0 / 3.0);
    EXPECT_TRUE(covers(r, analytic));
    EXPECT_EQ(r.rigor, Rigor::full_subset_max);
}

TEST(Theorem2, SubsetWithoutOriginContributesZero)
{
    const Region lambda = Region::interval(-1, 1);
    SubsetStrategy st;
    st.kind = SubsetStrategy::Kind::user_list;
    st.user_subsets = {Region::from_sites({{-1}, {1}})};
    CriterionConstants c;
    const auto r = theorem2_lhs(kUniform, lambda, {0, 0}, c, st, 100, 1);
    EXPECT_EQ(r.lhs, 0.0);
    EXPECT_EQ(r.rigor, Rigor::partial_subset_max);
}

TEST(Theorem2, ExhaustiveDominatesEveryMember)
{
    const Region lambda = Region::interval(-1, 1);
    CriterionConstants c;
    const auto m = kUniform.with_coupling(2.0);
    SubsetStrategy ex;
    const auto full = theorem2_lhs(m, lambda, {0, 0}, c, ex, 400, 9);
    EXPECT_EQ(full.subsets_evaluated, 4u);
    SubsetStrategy just_lambda;
    just_lambda.kind = SubsetStrategy::Kind::user_list;
    just_lambda.user_subsets = {lambda};
    EXPECT_GE(full.lhs, theorem2_lhs(m, lambda, {0, 0}, c, just_lambda, 400, 9).lhs);
}

TEST(Theorem2, ExhaustiveLimitEnforced)
{
    SubsetStrategy st;
    st.max_exhaustive_sites = 4;
    CriterionConstants c;
    EXPECT_THROW(theorem2_lhs(kUniform, Region::interval(-2, 2), {0, 0}, c, st, 100, 1), std::invalid_argument);
    EXPECT_EQ(SubsetStrategy::automatic(Region::box(2, 2)).kind, SubsetStrategy::Kind::subboxes);
    EXPECT_EQ(SubsetStrategy::automatic(Region::box(2, 1)).kind, SubsetStrategy::Kind::exhaustive);
}

TEST(Theorem2, SubboxesAreBoxesContainingOrigin)
{
    SubsetStrategy st;
    st.kind = SubsetStrategy::Kind::subboxes;
    const auto fam = subset_family(Region::box(2, 1), st);
    EXPECT_EQ(fam.size(), 16u);  // (a, b) in {-1,0} x {0,1} per axis
    for (const auto& w : fam) EXPECT_TRUE(w.contains({0, 0}));
    const auto fam1 = subset_family(Region::interval(-2, 3), st);
    EXPECT_EQ(fam1.size(), 12u);
}

TEST(Theorem2, SubboxesNeverExceedExhaustive)
{
    std::mt19937_64 gen(4);
    CriterionConstants c;
    for (int trial = 0; trial < 12; ++trial) {
        std::uniform_int_distribution<int> a(-4, 0);
        const int lo = a(gen);
        const int hi = std::uniform_int_distribution<int>(0, 7 + lo)(gen);
        const Region lambda = Region::interval(lo, hi);
        SubsetStrategy ex, sb;
        sb.kind = SubsetStrategy::Kind::subboxes;
        const auto m = kUniform.with_coupling(1.0 + trial);
        const auto e = theorem2_lhs(m, lambda, {0.1, 0}, c, ex, 100, 50 + trial);
        const auto s = theorem2_lhs(m, lambda, {0.1, 0}, c, sb, 100, 50 + trial);
        EXPECT_GE(e.lhs, s.lhs);
        EXPECT_GE(e.ci_high, s.ci_high);
        EXPECT_EQ(s.rigor, Rigor::partial_subset_max);
    }
}

TEST(Theorem2, DecreasesWithLambda)
{
    CriterionConstants c;
    const Region r = Region::interval(-1, 1);
    SubsetStrategy ex;
    const double a = theorem2_lhs(kUniform.with_coupling(10.0), r, {0, 0}, c, ex, 1000, 2).lhs;
    const double b = theorem2_lhs(kUniform.with_coupling(1e4), r, {0, 0}, c, ex, 1000, 2).lhs;
    EXPECT_GT(a / b, 10.0);
}

TEST(CertifyInterval, Grid)
{
    CriterionConstants c;
    const auto m = kUniform.with_coupling(1000.0);
    const Region o = Region::box(1, 0);
    const auto res = certify_interval(m, o, {-1.0, 0.0, 1.0}, c, Criterion::theorem1, 2000, 6);
    ASSERT_EQ(res.reports.size(), 3u);
    for (const auto& r : res.reports) EXPECT_EQ(r.verdict, Verdict::certified);
    ASSERT_EQ(res.candidate_intervals.size(), 1u);
    EXPECT_EQ(res.candidate_intervals[0], std::make_pair(-1.0, 1.0));

    const auto one = certify_interval(m, o, {0.0}, c, Criterion::theorem1, 2000, 6);
    EXPECT_EQ(one.reports[0].lhs, theorem1_lhs(m, o, {0.0, 0.0}, c, 2000, 6).lhs);
    EXPECT_THROW(certify_interval(m, o, {}, c, Criterion::theorem1, 2000, 6), std::invalid_argument);
}

TEST(CertifyInterval, SymmetricEnergiesAgree)
{
    CriterionConstants c;
    const auto m = kUniform.with_coupling(3.0);
    const auto res = certify_interval(m, Region::interval(-1, 1), {-0.4, 0.4}, c, Criterion::theorem1, 4000, 7);
    const auto& a = res.reports[0];
    const auto& b = res.reports[1];
    EXPECT_TRUE(a.ci_low <= b.ci_high && b.ci_low <= a.ci_high);
}
