#pragma once

// Decay-law extraction from moment series and the asymptotic tests built on
// shell suprema: power-law thresholds B / L^k, the matching lower bounds at a
// candidate mobility edge, and uniformity of moments along eta.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "anderson/format.hpp"
#include "anderson/lattice.hpp"
#include "anderson/moments.hpp"

namespace anderson {

struct DecayPoint {
    double distance = 0.0;
    MomentEstimate moment;
};

struct DecaySeries {
    std::vector<DecayPoint> points;
    double s = 1.0 / 3.0;
    double E = 0.0;
    double eta = 0.0;
    double lambda = 1.0;
    int L = 0;
    LaplacianConvention convention = LaplacianConvention::hopping_only;
};

enum class DecayModel { exponential, power_law };

struct FitGoodness {
    double rms_residual = 0.0;  // weighted, in log space
    double curvature = 0.0;     // quadratic coefficient of log(moment) vs distance
    double curvature_se = 0.0;
    bool curvature_flag = false;  // significant curvature: not a clean exponential
};

struct DecayFit {
    DecayModel model = DecayModel::exponential;
    double A = 0.0;
    double mu = 0.0;
    double mu_ci_low = 0.0;
    double mu_ci_high = 0.0;
    std::string ci_method;  // "block_bootstrap" or "wls_t"
    FitGoodness goodness;
};

struct FitOptions {
    std::size_t bootstrap_reps = 2000;
    std::uint64_t bootstrap_seed = 0x5eedULL;
    double confidence = 0.95;
};

namespace detail {

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double sxx = 0.0;  // sum w (x - xbar)^2
    double ssr = 0.0;  // sum w r^2
};

inline LineFit weighted_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w)
{
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double xb = sx / sw, yb = sy / sw;
    double sxy = 0;
    LineFit f;
    for (std::size_t i = 0; i < x.size(); ++i) {
        f.sxx += w[i] * (x[i] - xb) * (x[i] - xb);
        sxy += w[i] * (x[i] - xb) * (y[i] - yb);
    }
    f.slope = sxy / f.sxx;
    f.intercept = yb - f.slope * xb;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        f.ssr += w[i] * r * r;
    }
    return f;
}

/// Log-space weights 1/sigma^2 with sigma read off the 95% interval.
inline std::vector<double> log_weights(const DecaySeries& series)
{
    std::vector<double> sigma(series.points.size(), 0.0);
    std::vector<double> known;
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        const auto& m = series.points[i].moment;
        if (m.ci_low > 0 && m.ci_high > m.ci_low) {
            sigma[i] = (std::log(m.ci_high) - std::log(m.ci_low)) / (2 * 1.959963984540054);
            known.push_back(sigma[i]);
        }
    }
    std::vector<double> w(sigma.size(), 1.0);
    if (known.empty()) return w;
    const double fill = median_of(known);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double sg = sigma[i] > 0 ? sigma[i] : fill;
        w[i] = 1.0 / (sg * sg);
    }
    return w;
}

}  // namespace detail

/// Weighted least squares of log(moment) against distance:
/// moment ~ A exp(-mu r). With block data the mu interval is a percentile
/// block bootstrap (blocks resampled jointly across distances); otherwise a
/// t interval from the weighted residuals.
inline DecayFit fit_exponential(const DecaySeries& series, const FitOptions& opt = {})
{
    const auto& pts = series.points;
    if (pts.size() < 3) throw std::invalid_argument("fit_exponential: need at least 3 points");
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!(pts[i].moment.value > 0) || !std::isfinite(pts[i].moment.value)) {
            throw std::invalid_argument("fit_exponential: moment values must be positive");
        }
        if (i > 0 && !(pts[i].distance > pts[i - 1].distance)) {
            throw std::invalid_argument("fit_exponential: distances must increase strictly");
        }
    }
    const std::size_t n = pts.size();
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = pts[i].distance;
        y[i] = std::log(pts[i].moment.value);
    }
    const auto w = detail::log_weights(series);
    const auto line = detail::weighted_line(x, y, w);

    DecayFit fit;
    fit.A = std::exp(line.intercept);
    fit.mu = -line.slope;
    double wsum = 0;
    for (double wi : w) wsum += wi;
    fit.goodness.rms_residual = std::sqrt(line.ssr / wsum);

    // curvature: weighted quadratic fit
    if (n > 3) {
        Eigen::MatrixXd X(n, 3);
        Eigen::VectorXd Y(n);
        const double x0 = x.front(), span = x.back() - x.front();
        for (std::size_t i = 0; i < n; ++i) {
            const double sw = std::sqrt(w[i]);
            const double t = (x[i] - x0) / span;
            X(i, 0) = sw;
            X(i, 1) = sw * t;
            X(i, 2) = sw * t * t;
            Y(i) = sw * y[i];
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
        const Eigen::VectorXd beta = qr.solve(Y);
        const double ssr = (Y - X * beta).squaredNorm();
        const Eigen::MatrixXd cov = (X.transpose() * X).inverse() * (ssr / static_cast<double>(n - 3));
        fit.goodness.curvature = beta[2] / (span * span);
        fit.goodness.curvature_se = std::sqrt(std::max(0.0, cov(2, 2))) / (span * span);
        // beta[2] is the curvature contribution across the range (unit-range variable)
        const double effect = std::abs(beta[2]);
        const double scale = 1.0 + std::abs(line.slope) * span;
        fit.goodness.curvature_flag = effect > 3.0 * std::sqrt(std::max(0.0, cov(2, 2))) && effect > 1e-6 * scale;
    }

    const double alpha = 1.0 - opt.confidence;
    const std::size_t k = pts.front().moment.block_means.size();
    bool blocked = k >= 2;
    for (const auto& p : pts) blocked = blocked && p.moment.block_means.size() == k;

    if (blocked) {
        std::mt19937_64 gen(opt.bootstrap_seed);
        std::uniform_int_distribution<std::size_t> pick(0, k - 1);
        std::vector<double> mus;
        mus.reserve(opt.bootstrap_reps);
        std::vector<std::size_t> draw(k);
        std::vector<double> yb(n), tmp(k);
        for (std::size_t rep = 0; rep < opt.bootstrap_reps; ++rep) {
            for (auto& d : draw) d = pick(gen);
            bool ok = true;
            for (std::size_t i = 0; i < n && ok; ++i) {
                for (std::size_t b = 0; b < k; ++b) tmp[b] = pts[i].moment.block_means[draw[b]];
                const double med = median_of(tmp);
                ok = med > 0;
                if (ok) yb[i] = std::log(med);
            }
            if (ok) mus.push_back(-detail::weighted_line(x, yb, w).slope);
        }
        if (mus.size() * 2 >= opt.bootstrap_reps) {
            std::sort(mus.begin(), mus.end());
            auto quant = [&](double q) {
                const double pos = q * static_cast<double>(mus.size() - 1);
                const auto lo = static_cast<std::size_t>(std::floor(pos));
                const auto hi = std::min(lo + 1, mus.size() - 1);
                return mus[lo] + (pos - static_cast<double>(lo)) * (mus[hi] - mus[lo]);
            };
            fit.mu_ci_low = quant(alpha / 2);
            fit.mu_ci_high = quant(1 - alpha / 2);
            fit.ci_method = "block_bootstrap";
            return fit;
        }
    }
    const double se = std::sqrt(line.ssr / static_cast<double>(n - 2) / line.sxx);
    boost::math::students_t dist(static_cast<double>(n - 2));
    const double t = boost::math::quantile(boost::math::complement(dist, alpha / 2));
    fit.mu_ci_low = fit.mu - t * se;
    fit.mu_ci_high = fit.mu + t * se;
    fit.ci_method = "wls_t";
    return fit;
}

/// Moments E|<x|(H - z)^{-1}|y>|^s for the given targets, ordered by 1-norm
/// distance from x; targets at equal distance are reduced to the largest.
inline DecaySeries decay_series(const DisorderModel& model, const Region& region, const Site& x,
                                const std::vector<Site>& targets, const SpectralPoint& z, double s,
                                std::size_t n_samples, std::uint64_t seed, const EstimatorOptions& opt = {})
{
    auto est = estimate_row_moments(model, region, x, targets, z, s, n_samples, seed, opt);
    std::vector<std::pair<int, std::size_t>> order;
    for (std::size_t k = 0; k < targets.size(); ++k) order.emplace_back(distance1(x, targets[k]), k);
    std::stable_sort(order.begin(), order.end(), [](auto& a, auto& b) { return a.first < b.first; });
    DecaySeries series;
    series.s = s;
    series.E = z.E;
    series.eta = z.eta;
    series.lambda = model.coupling();
    series.convention = opt.convention;
    for (const auto& [dist, k] : order) {
        if (!series.points.empty() && series.points.back().distance == dist) {
            if (est[k].value > series.points.back().moment.value) series.points.back().moment = est[k];
            continue;
        }
        series.points.push_back({static_cast<double>(dist), est[k]});
    }
    return series;
}

/// "distance,moment,ci_low,ci_high" rows, header first.
inline std::string decay_series_csv(const DecaySeries& series)
{
    std::string out = "distance,moment,ci_low,ci_high\n";
    for (const auto& p : series.points) {
        out += format_double(p.distance) + "," + format_double(p.moment.value) + "," + format_double(p.moment.ci_low) +
               "," + format_double(p.moment.ci_high) + "\n";
    }
    return out;
}

/// Inverse of decay_series_csv. Block data is not carried, so fits of a
/// parsed series use the weighted t interval.
inline DecaySeries parse_decay_series_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line.rfind("distance,moment,ci_low,ci_high", 0) != 0) {
        throw std::invalid_argument("decay series CSV: expected header distance,moment,ci_low,ci_high");
    }
    DecaySeries series;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<double> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(parse_double(field));
        if (f.size() != 4) throw std::invalid_argument("decay series CSV: expected 4 columns in '" + line + "'");
        MomentEstimate m;
        m.value = f[1];
        m.ci_low = f[2];
        m.ci_high = f[3];
        series.points.push_back({f[0], m});
    }
    return series;
}

enum class PowerLawVariant { finite_volume, infinite_volume_proxy };

inline std::string to_string(PowerLawVariant v)
{
    return v == PowerLawVariant::finite_volume ? "finite_volume" : "infinite_volume_proxy";
}

inline PowerLawVariant parse_power_law_variant(const std::string& s)
{
    if (s == "finite_volume" || s == "finite") return PowerLawVariant::finite_volume;
    if (s == "infinite_volume_proxy" || s == "proxy") return PowerLawVariant::infinite_volume_proxy;
    throw std::invalid_argument("unknown power-law variant '" + s + "'");
}

/// 3(d-1) on Lambda_L, 4(d-1) for the infinite-volume statement.
inline int power_law_exponent(PowerLawVariant v, int d) { return (v == PowerLawVariant::finite_volume ? 3 : 4) * (d - 1); }

/// Region used for a variant: Lambda_L, or [-2L, 2L]^d (side >= 4L) as a bulk proxy.
inline Region power_law_region(PowerLawVariant v, int d, int L)
{
    return Region::box(d, v == PowerLawVariant::finite_volume ? L : 2 * L);
}

enum class Outcome { pass, fail, inconclusive };

inline std::string to_string(Outcome o)
{
    switch (o) {
    case Outcome::pass: return "pass";
    case Outcome::fail: return "fail";
    default: return "inconclusive";
    }
}

struct PowerLawReport {
    PowerLawVariant variant = PowerLawVariant::finite_volume;
    int dimension = 1;
    int L = 0;
    double B = 1.0;
    int exponent = 0;
    double threshold = 0.0;  // B / L^exponent
    Site maximizer;
    MomentEstimate supremum;
    Outcome outcome = Outcome::inconclusive;  // pass iff ci_high < threshold
    std::size_t region_sites = 0;
};

inline PowerLawReport power_law_from_estimate(const MomentEstimate& sup, const Site& maximizer, int d, int L, double B,
                                              PowerLawVariant variant)
{
    PowerLawReport r;
    r.variant = variant;
    r.dimension = d;
    r.L = L;
    r.B = B;
    r.exponent = power_law_exponent(variant, d);
    r.threshold = B / std::pow(static_cast<double>(L), r.exponent);
    r.maximizer = maximizer;
    r.supremum = sup;
    if (sup.ci_high < r.threshold) {
        r.outcome = Outcome::pass;
    } else if (sup.ci_low >= r.threshold) {
        r.outcome = Outcome::fail;
    } else {
        r.outcome = Outcome::inconclusive;
    }
    return r;
}

/// Shell supremum of the moment compared with B / L^{3(d-1)} (finite volume)
/// or B / L^{4(d-1)} (bulk proxy). L below L_o is rejected.
inline PowerLawReport power_law_test(const DisorderModel& model, int d, double E, int L, double s,
                                     PowerLawVariant variant, double B, std::size_t n_samples, std::uint64_t seed,
                                     const EstimatorOptions& opt = {}, int L_o = 4)
{
    if (L < L_o) throw std::invalid_argument("power_law_test: L must be at least L_o = " + std::to_string(L_o));
    if (!(B > 0)) throw std::invalid_argument("power_law_test: B must be positive");
    const Region region = power_law_region(variant, d, L);
    const auto sup = estimate_shell_supremum(model, region, L, {E, 0.0}, s, n_samples, seed, opt);
    auto rep = power_law_from_estimate(sup.estimate, sup.site, d, L, B, variant);
    rep.region_sites = region.size();
    return rep;
}

struct ShellPoint {
    int L = 0;
    MomentEstimate supremum;
};

enum class BoundStatus { satisfied, violated, inconclusive };

inline std::string to_string(BoundStatus b)
{
    switch (b) {
    case BoundStatus::satisfied: return "satisfied";
    case BoundStatus::violated: return "violated";
    default: return "inconclusive";
    }
}

struct MobilityEdgeCheck {
    PowerLawVariant variant = PowerLawVariant::finite_volume;
    int dimension = 1;
    double B = 1.0;
    int exponent = 0;
    std::vector<double> bounds;  // B L^{-exponent} per point
    std::vector<BoundStatus> status;
    bool inconsistent_with_mobility_edge = false;  // some L violates the lower bound
};

/// Lower bounds sup-shell >= B1 L^{-3(d-1)} (finite volume) or B2 L^{-4(d-1)}
/// (proxy). violated iff ci_high < bound, satisfied iff ci_low >= bound, so a
/// violation here is exactly a pass of power_law_test on the same data.
inline MobilityEdgeCheck mobility_edge_bound_check(const std::vector<ShellPoint>& series, int d, double B1, double B2,
                                                   PowerLawVariant variant = PowerLawVariant::finite_volume)
{
    if (series.empty()) throw std::invalid_argument("mobility_edge_bound_check: empty series");
    MobilityEdgeCheck c;
    c.variant = variant;
    c.dimension = d;
    c.B = variant == PowerLawVariant::finite_volume ? B1 : B2;
    c.exponent = power_law_exponent(variant, d);
    for (const auto& p : series) {
        const double bound = c.B * std::pow(static_cast<double>(p.L), -c.exponent);
        c.bounds.push_back(bound);
        BoundStatus st = BoundStatus::inconclusive;
        if (p.supremum.ci_high < bound) {
            st = BoundStatus::violated;
        } else if (p.supremum.ci_low >= bound) {
            st = BoundStatus::satisfied;
        }
        c.status.push_back(st);
        c.inconsistent_with_mobility_edge = c.inconsistent_with_mobility_edge || st == BoundStatus::violated;
    }
    return c;
}

struct OffAxisScan {
    std::vector<double> etas;
    std::vector<MomentEstimate> estimates;
    double max_value = 0.0;
    double argmax_eta = 0.0;
    bool attained_near_zero = false;  // max at eta = 0, or within the eta = 0 interval
};

/// E|<x|(H - E - i eta)^{-1}|y>|^s along an eta grid that contains 0, with a
/// common seed so all grid points see the same realizations.
inline OffAxisScan off_axis_scan(const DisorderModel& model, const Region& region, const Site& x, const Site& y,
                                 double E, const std::vector<double>& etas, double s, std::size_t n_samples,
                                 std::uint64_t seed, const EstimatorOptions& opt = {})
{
    if (std::find(etas.begin(), etas.end(), 0.0) == etas.end()) throw std::invalid_argument("off_axis_scan: eta grid must include 0");
    OffAxisScan scan;
    scan.etas = etas;
    std::size_t zero = 0, best = 0;
    for (std::size_t k = 0; k < etas.size(); ++k) {
        MomentQuery q{region, x, y, {E, etas[k]}, s, std::nullopt};
        scan.estimates.push_back(estimate_moment(model, q, n_samples, seed, opt));
        if (etas[k] == 0.0) zero = k;
        if (scan.estimates[k].value > scan.estimates[best].value) best = k;
    }
    scan.max_value = scan.estimates[best].value;
    scan.argmax_eta = etas[best];
    scan.attained_near_zero = best == zero || scan.estimates[zero].ci_high >= scan.max_value;
    return scan;
}

}  // namespace anderson
