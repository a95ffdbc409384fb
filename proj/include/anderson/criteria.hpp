#pragma once

// Finite-volume fractional-moment localization criteria.
//
//   theorem1:    (1 + C_s |Gamma(L)| / lambda^s)^2 * sum_{<u,u'> in Gamma(L)} E|<O|(H_L - E)^{-1}|u>|^s  < 1
//   theorem2:    max_{W in L} |Gamma(L+)| C~_s / lambda^s * sum_{<u,u'> in Gamma(L)} E|<O|(H_W - E)^{-1}|u>|^s  < 1
//   single_site: 2 d^2 (2d+1) C_s / lambda^s * E(1 / |lambda V - E|^s)  < 1
//
// The constants C_s and C~_s are inputs. Their existence is known but their
// values are not computed here, so every report carries the constants used.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "anderson/disorder.hpp"
#include "anderson/lattice.hpp"
#include "anderson/moments.hpp"
#include "anderson/operator.hpp"
#include "anderson/resolvent.hpp"

namespace anderson {

struct CriterionConstants {
    double C_s = 1.0;
    double C_tilde_s = 1.0;
    double s = 1.0 / 3.0;
    std::string source;  // provenance of the constants; empty means unspecified
};

enum class Verdict { certified, not_certified, inconclusive };
enum class Rigor { full_subset_max, partial_subset_max, analytic };
enum class Criterion { single_site, theorem1, theorem2 };

inline std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::certified: return "certified";
    case Verdict::not_certified: return "not_certified";
    default: return "inconclusive";
    }
}

inline std::string to_string(Rigor r)
{
    switch (r) {
    case Rigor::full_subset_max: return "full_subset_max";
    case Rigor::partial_subset_max: return "partial_subset_max";
    default: return "analytic";
    }
}

inline std::string to_string(Criterion c)
{
    switch (c) {
    case Criterion::single_site: return "single-site";
    case Criterion::theorem1: return "1";
    default: return "2";
    }
}

inline Criterion parse_criterion(const std::string& s)
{
    if (s == "1" || s == "thm1" || s == "theorem1") return Criterion::theorem1;
    if (s == "2" || s == "thm2" || s == "theorem2") return Criterion::theorem2;
    if (s == "single-site" || s == "single_site") return Criterion::single_site;
    throw std::invalid_argument("unknown criterion '" + s + "' (expected 1, 2 or single-site)");
}

struct SubsetStrategy {
    enum class Kind { exhaustive, subboxes, user_list };
    Kind kind = Kind::exhaustive;
    std::size_t max_exhaustive_sites = 16;
    std::vector<Region> user_subsets;

    /// Exhaustive when affordable, otherwise sub-boxes containing the origin.
    static SubsetStrategy automatic(const Region& region, std::size_t max_exhaustive_sites = 16)
    {
        SubsetStrategy s;
        s.max_exhaustive_sites = max_exhaustive_sites;
        s.kind = region.size() <= max_exhaustive_sites ? Kind::exhaustive : Kind::subboxes;
        return s;
    }
};

inline std::string to_string(SubsetStrategy::Kind k)
{
    switch (k) {
    case SubsetStrategy::Kind::exhaustive: return "exhaustive";
    case SubsetStrategy::Kind::subboxes: return "subboxes";
    default: return "user_list";
    }
}

struct BondTerm {
    Bond bond;
    MomentEstimate estimate;
};

struct CriterionReport {
    Criterion criterion = Criterion::theorem1;
    double lhs = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double threshold = 1.0;
    Verdict verdict = Verdict::inconclusive;
    Rigor rigor = Rigor::analytic;
    double prefactor = 0.0;  // lhs = prefactor * moment_sum
    double moment_sum = 0.0;
    std::vector<BondTerm> sub_terms;
    CriterionConstants constants;

    double lambda = 1.0;
    SpectralPoint z;
    int dimension = 1;
    std::size_t region_sites = 1;
    std::size_t boundary_bonds = 0;
    std::size_t subsets_evaluated = 0;
    std::string subset_strategy;
    std::vector<Site> maximizing_subset;
    std::size_t n_samples = 0;
    std::size_t n_blocks = 0;
    std::size_t resample_events = 0;
    std::size_t near_singular = 0;
    std::uint64_t seed = 0;
    LaplacianConvention convention = LaplacianConvention::hopping_only;
    std::string model_id;
    bool statistical = false;  // Monte Carlo verdict at the estimator's confidence level
};

/// certified iff ci_high < threshold, not_certified iff ci_low >= threshold.
inline Verdict verdict_for(double ci_low, double ci_high, double threshold = 1.0)
{
    if (ci_high < threshold) return Verdict::certified;
    if (ci_low >= threshold) return Verdict::not_certified;
    return Verdict::inconclusive;
}

/// E(|lambda V - E|^{-s}) for the model's piecewise-linear density, integrated
/// exactly: with w = lambda v - E the density is c0 + c1 w on each piece and
///   int |w|^{-s} dw = sgn(w)|w|^{1-s}/(1-s),  int w|w|^{-s} dw = |w|^{2-s}/(2-s).
inline double inverse_moment_closed_form(const DisorderModel& model, double E, double s)
{
    check_exponent(s);
    const double lambda = model.coupling();
    auto i0 = [s](double w) { return std::copysign(std::pow(std::abs(w), 1.0 - s), w) / (1.0 - s); };
    auto i1 = [s](double w) { return std::pow(std::abs(w), 2.0 - s) / (2.0 - s); };
    double total = 0.0;
    for (const auto& seg : model.segments()) {
        const double k = (seg.p1 - seg.p0) / (seg.x1 - seg.x0);
        const double c1 = k / lambda;
        const double c0 = seg.p0 + k * (E / lambda - seg.x0);
        const double lo = lambda * seg.x0 - E;
        const double hi = lambda * seg.x1 - E;
        total += c0 * (i0(hi) - i0(lo));
        if (c1 != 0.0) total += c1 * (i1(hi) - i1(lo));
    }
    return total / lambda;
}

inline double single_site_prefactor(int d) { return 2.0 * d * d * (2.0 * d + 1.0); }

inline CriterionReport single_site_test(const DisorderModel& model, int d, double E, const CriterionConstants& c)
{
    if (d < 1) throw std::invalid_argument("single_site_test: dimension must be >= 1");
    CriterionReport r;
    r.criterion = Criterion::single_site;
    r.constants = c;
    r.lambda = model.coupling();
    r.z = {E, 0.0};
    r.dimension = d;
    r.model_id = model.id();
    r.prefactor = single_site_prefactor(d) * c.C_s / std::pow(r.lambda, c.s);
    r.moment_sum = inverse_moment_closed_form(model, E, c.s);
    r.lhs = r.ci_low = r.ci_high = r.prefactor * r.moment_sum;
    r.rigor = Rigor::analytic;
    r.verdict = r.lhs < r.threshold ? Verdict::certified : Verdict::not_certified;
    return r;
}

namespace detail {

inline void fill_statistics(CriterionReport& r, const MomentEstimate& sum, std::size_t n_samples, std::uint64_t seed,
                            const EstimatorOptions& opt)
{
    r.moment_sum = sum.value;
    r.lhs = r.prefactor * sum.value;
    r.ci_low = r.prefactor * sum.ci_low;
    r.ci_high = r.prefactor * sum.ci_high;
    r.n_samples = n_samples;
    r.n_blocks = opt.n_blocks;
    r.resample_events = sum.resample_events;
    r.near_singular = sum.near_singular;
    r.seed = seed;
    r.convention = opt.convention;
    r.statistical = true;
}

/// Per-realization bond terms |<O|(H_W - z)^{-1}|u>|^s for the bonds whose
/// inside site lies in W, plus their sum in the last column.
inline std::vector<MomentEstimate> bond_moments(const DisorderModel& model, const Region& w, const BondSet& bonds,
                                                const SpectralPoint& z, double s, std::size_t n_samples,
                                                std::uint64_t seed, const EstimatorOptions& opt,
                                                std::vector<std::size_t>& used)
{
    std::vector<std::size_t> local;
    used.clear();
    for (std::size_t b = 0; b < bonds.size(); ++b) {
        if (auto i = w.index_of(bonds[b].inside)) {
            used.push_back(b);
            local.push_back(*i);
        }
    }
    const Site o = origin(w.dimension());
    return estimate_blocked(n_samples, local.size() + 1, opt, [&](std::uint64_t index, std::span<double> out) {
        const auto omega = sample_realization(model, w, seed, index);
        const auto h = assemble(w, omega, opt.convention);
        const auto row = green_row(h, o, z, opt.solver);
        double sum = 0;
        for (std::size_t k = 0; k < local.size(); ++k) {
            out[k] = std::pow(std::abs(row.values[static_cast<Eigen::Index>(local[k])]), s);
            sum += out[k];
        }
        out[local.size()] = sum;
        return row.near_singular;
    });
}

inline MomentEstimate zero_estimate(std::size_t n_samples, std::size_t n_blocks)
{
    return summarize_blocks(std::vector<double>(n_blocks, 0.0), n_samples);
}

}  // namespace detail

inline CriterionReport theorem1_lhs(const DisorderModel& model, const Region& region, const SpectralPoint& z,
                                    const CriterionConstants& c, std::size_t n_samples, std::uint64_t seed,
                                    const EstimatorOptions& opt = {})
{
    check_exponent(c.s);
    const Site o = origin(region.dimension());
    if (!region.contains(o)) throw std::invalid_argument("theorem1_lhs: the region must contain the origin");
    const BondSet bonds = boundary_bonds(region);

    CriterionReport r;
    r.criterion = Criterion::theorem1;
    r.constants = c;
    r.lambda = model.coupling();
    r.z = z;
    r.dimension = region.dimension();
    r.region_sites = region.size();
    r.boundary_bonds = bonds.size();
    r.subsets_evaluated = 1;
    r.model_id = model.id();
    r.rigor = Rigor::full_subset_max;
    const double a = 1.0 + c.C_s * static_cast<double>(bonds.size()) / std::pow(r.lambda, c.s);
    r.prefactor = a * a;

    std::vector<std::size_t> used;
    auto est = detail::bond_moments(model, region, bonds, z, c.s, n_samples, seed, opt, used);
    for (std::size_t k = 0; k < used.size(); ++k) r.sub_terms.push_back({bonds[used[k]], est[k]});
    detail::fill_statistics(r, est.back(), n_samples, seed, opt);
    r.verdict = verdict_for(r.ci_low, r.ci_high, r.threshold);
    return r;
}

/// The subset family for the max in theorem 2. Every member contains the origin
/// except user-supplied ones, which then contribute zero.
inline std::vector<Region> subset_family(const Region& region, const SubsetStrategy& strategy)
{
    const Site o = origin(region.dimension());
    std::vector<Region> out;
    switch (strategy.kind) {
    case SubsetStrategy::Kind::exhaustive: {
        if (region.size() > strategy.max_exhaustive_sites) {
            throw std::invalid_argument("exhaustive subset enumeration requested for " + std::to_string(region.size()) +
                                        " sites (limit " + std::to_string(strategy.max_exhaustive_sites) + ")");
        }
        if (region.size() > 30) throw std::invalid_argument("exhaustive enumeration limited to 30 sites");
        std::vector<Site> others;
        for (const auto& s : region.sites()) {
            if (s != o) others.push_back(s);
        }
        const std::uint64_t count = std::uint64_t{1} << others.size();
        out.reserve(count);
        for (std::uint64_t mask = 0; mask < count; ++mask) {
            std::vector<Site> w{o};
            for (std::size_t k = 0; k < others.size(); ++k) {
                if (mask >> k & 1U) w.push_back(others[k]);
            }
            out.push_back(Region::from_sites(std::move(w)));
        }
        break;
    }
    case SubsetStrategy::Kind::subboxes: {
        auto [lo, hi] = region.bounds();
        const std::size_t d = lo.size();
        // odometer over (a_j in [lo_j, 0], b_j in [0, hi_j])
        std::vector<std::pair<int, int>> ranges;
        for (std::size_t j = 0; j < d; ++j) ranges.emplace_back(lo[j], hi[j]);
        std::vector<int> ca(d), cb(d);
        for (std::size_t j = 0; j < d; ++j) {
            ca[j] = std::min(0, ranges[j].first);
            cb[j] = 0;
        }
        auto advance = [&]() {
            for (std::size_t j = 0; j < d; ++j) {
                if (cb[j] < std::max(0, ranges[j].second)) {
                    ++cb[j];
                    return true;
                }
                cb[j] = 0;
                if (ca[j] < 0) {
                    ++ca[j];
                    return true;
                }
                ca[j] = std::min(0, ranges[j].first);
            }
            return false;
        };
        do {
            Site blo(ca.begin(), ca.end()), bhi(cb.begin(), cb.end());
            Region box = Region::box(blo, bhi);
            if (box.is_subset_of(region)) out.push_back(std::move(box));
        } while (advance());
        break;
    }
    case SubsetStrategy::Kind::user_list:
        for (const auto& w : strategy.user_subsets) {
            if (!w.is_subset_of(region)) throw std::invalid_argument("user subset is not contained in the region");
            out.push_back(w);
        }
        if (out.empty()) throw std::invalid_argument("user_list strategy needs at least one subset");
        break;
    }
    return out;
}

inline CriterionReport theorem2_lhs(const DisorderModel& model, const Region& region, const SpectralPoint& z,
                                    const CriterionConstants& c, const SubsetStrategy& strategy, std::size_t n_samples,
                                    std::uint64_t seed, const EstimatorOptions& opt = {})
{
    check_exponent(c.s);
    check_budget(n_samples, opt.n_blocks);
    const Site o = origin(region.dimension());
    if (!region.contains(o)) throw std::invalid_argument("theorem2_lhs: the region must contain the origin");
    const BondSet bonds = boundary_bonds(region);
    const auto family = subset_family(region, strategy);

    CriterionReport r;
    r.criterion = Criterion::theorem2;
    r.constants = c;
    r.lambda = model.coupling();
    r.z = z;
    r.dimension = region.dimension();
    r.region_sites = region.size();
    r.boundary_bonds = bonds.size();
    r.subset_strategy = to_string(strategy.kind);
    r.subsets_evaluated = family.size();
    r.model_id = model.id();
    r.rigor = strategy.kind == SubsetStrategy::Kind::exhaustive ? Rigor::full_subset_max : Rigor::partial_subset_max;
    r.prefactor = static_cast<double>(boundary_bonds(extend_plus(region)).size()) * c.C_tilde_s / std::pow(r.lambda, c.s);

    bool have = false;
    MomentEstimate best_sum;
    double best_low = 0.0, best_high = 0.0;
    std::size_t resampled = 0, singular = 0;
    for (const auto& w : family) {
        std::vector<std::size_t> used;
        std::vector<MomentEstimate> est;
        if (w.contains(o)) {
            est = detail::bond_moments(model, w, bonds, z, c.s, n_samples, seed, opt, used);
        }
        if (est.empty() || used.empty()) {
            used.clear();
            est = {detail::zero_estimate(n_samples, opt.n_blocks)};
        }
        const MomentEstimate& sum = est.back();
        resampled += sum.resample_events;
        singular += sum.near_singular;
        best_low = std::max(best_low, sum.ci_low);
        best_high = std::max(best_high, sum.ci_high);
        if (!have || sum.value > best_sum.value) {
            have = true;
            best_sum = sum;
            r.maximizing_subset = w.sites();
            r.sub_terms.clear();
            for (std::size_t k = 0; k < used.size(); ++k) r.sub_terms.push_back({bonds[used[k]], est[k]});
        }
    }
    detail::fill_statistics(r, best_sum, n_samples, seed, opt);
    r.ci_low = r.prefactor * best_low;
    r.ci_high = r.prefactor * best_high;
    r.resample_events = resampled;
    r.near_singular = singular;
    r.verdict = verdict_for(r.ci_low, r.ci_high, r.threshold);
    return r;
}

struct IntervalCertification {
    std::vector<CriterionReport> reports;
    /// Maximal runs [first, last] of consecutive certified grid points.
    std::vector<std::pair<double, double>> candidate_intervals;
};

/// Evaluates one criterion along an energy grid with matched seeds.
inline IntervalCertification certify_interval(const DisorderModel& model, const Region& region,
                                              const std::vector<double>& energies, const CriterionConstants& c,
                                              Criterion which, std::size_t n_samples, std::uint64_t seed,
                                              const EstimatorOptions& opt = {}, double eta = 0.0,
                                              const SubsetStrategy* strategy = nullptr)
{
    if (energies.empty()) throw std::invalid_argument("certify_interval: empty energy grid");
    IntervalCertification out;
    for (double E : energies) {
        const SpectralPoint z{E, eta};
        switch (which) {
        case Criterion::single_site: out.reports.push_back(single_site_test(model, region.dimension(), E, c)); break;
        case Criterion::theorem1: out.reports.push_back(theorem1_lhs(model, region, z, c, n_samples, seed, opt)); break;
        case Criterion::theorem2: {
            const auto st = strategy ? *strategy : SubsetStrategy::automatic(region);
            out.reports.push_back(theorem2_lhs(model, region, z, c, st, n_samples, seed, opt));
            break;
        }
        }
    }
    for (std::size_t i = 0; i < energies.size();) {
        if (out.reports[i].verdict != Verdict::certified) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < energies.size() && out.reports[j + 1].verdict == Verdict::certified) ++j;
        out.candidate_intervals.emplace_back(energies[i], energies[j]);
        i = j + 1;
    }
    return out;
}

}  // namespace anderson
