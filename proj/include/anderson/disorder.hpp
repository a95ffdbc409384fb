#pragma once

// I.i.d. site potentials with bounded density and compact support, sampled
// with a site-addressed counter RNG so that any subregion sees the same values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "anderson/format.hpp"
#include "anderson/lattice.hpp"
#include "anderson/rng.hpp"

namespace anderson {

struct Interval {
    double lo = 0;
    double hi = 0;
    double width() const { return hi - lo; }
    bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Piece of a piecewise-linear density: p(v) = p0 + (p1 - p0)(v - x0)/(x1 - x0).
struct DensitySegment {
    double x0, x1, p0, p1;
};

class DisorderModel {
public:
    enum class Kind { uniform, tabulated };

    static DisorderModel uniform(double a, double b, double coupling)
    {
        if (!(b > a) || !std::isfinite(a) || !std::isfinite(b)) {
            throw std::invalid_argument("uniform disorder needs a finite interval a < b");
        }
        const double p = 1.0 / (b - a);
        return DisorderModel(Kind::uniform, {{a, b, p, p}}, coupling);
    }

    /// Continuous piecewise-linear density through (x_i, p_i); normalized here.
    static DisorderModel tabulated(const std::vector<double>& x, const std::vector<double>& p, double coupling)
    {
        if (x.size() < 2 || x.size() != p.size()) {
            throw std::invalid_argument("tabulated density needs >= 2 nodes and matching value count");
        }
        double mass = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!std::isfinite(x[i]) || !std::isfinite(p[i]) || p[i] < 0) {
                throw std::invalid_argument("tabulated density: nodes and values must be finite, values >= 0");
            }
            if (i > 0) {
                if (!(x[i] > x[i - 1])) throw std::invalid_argument("tabulated density: nodes must increase strictly");
                mass += 0.5 * (p[i] + p[i - 1]) * (x[i] - x[i - 1]);
            }
        }
        if (!(mass > 0) || !std::isfinite(mass)) throw std::invalid_argument("tabulated density is not normalizable");
        std::vector<DensitySegment> segs;
        for (std::size_t i = 1; i < x.size(); ++i) segs.push_back({x[i - 1], x[i], p[i - 1] / mass, p[i] / mass});
        return DisorderModel(Kind::tabulated, std::move(segs), coupling);
    }

    Kind kind() const { return kind_; }
    double coupling() const { return coupling_; }
    Interval support() const { return {segments_.front().x0, segments_.back().x1}; }
    const std::vector<DensitySegment>& segments() const { return segments_; }

    DisorderModel with_coupling(double coupling) const
    {
        DisorderModel m = *this;
        m.set_coupling(coupling);
        return m;
    }

    /// Supremum of the density on its support.
    double density_bound() const
    {
        double b = 0;
        for (const auto& s : segments_) b = std::max({b, s.p0, s.p1});
        return b;
    }

    double density(double v) const
    {
        for (const auto& s : segments_) {
            if (v >= s.x0 && v <= s.x1) return s.p0 + (s.p1 - s.p0) * (v - s.x0) / (s.x1 - s.x0);
        }
        return 0.0;
    }

    double cdf(double v) const
    {
        if (v <= segments_.front().x0) return 0.0;
        double acc = 0;
        for (const auto& s : segments_) {
            const double h = s.x1 - s.x0;
            if (v < s.x1) {
                const double t = v - s.x0;
                return acc + s.p0 * t + 0.5 * (s.p1 - s.p0) * t * t / h;
            }
            acc += 0.5 * (s.p0 + s.p1) * h;
        }
        return 1.0;
    }

    /// Inverse CDF on (0, 1).
    double quantile(double u) const
    {
        if (kind_ == Kind::uniform) {
            const auto& s = segments_.front();
            return s.x0 + (s.x1 - s.x0) * u;
        }
        double acc = 0;
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            const auto& s = segments_[i];
            const double h = s.x1 - s.x0;
            const double m = 0.5 * (s.p0 + s.p1) * h;
            if (u <= acc + m || i + 1 == segments_.size()) {
                const double r = std::max(0.0, u - acc);
                const double k = (s.p1 - s.p0) / h;
                const double disc = std::max(0.0, s.p0 * s.p0 + 2.0 * k * r);
                const double denom = s.p0 + std::sqrt(disc);
                const double t = denom > 0 ? 2.0 * r / denom : 0.0;
                return std::clamp(s.x0 + t, s.x0, s.x1);
            }
            acc += m;
        }
        return segments_.back().x1;
    }

    std::string id() const
    {
        const auto sup = support();
        if (kind_ == Kind::uniform) return "uniform(" + format_double(sup.lo) + "," + format_double(sup.hi) + ")";
        return "tabulated(" + std::to_string(segments_.size() + 1) + " nodes on [" + format_double(sup.lo) + "," +
               format_double(sup.hi) + "])";
    }

private:
    DisorderModel(Kind k, std::vector<DensitySegment> segs, double coupling) : kind_(k), segments_(std::move(segs))
    {
        set_coupling(coupling);
    }

    void set_coupling(double coupling)
    {
        if (!(coupling > 0) || !std::isfinite(coupling)) throw std::invalid_argument("coupling lambda must be positive");
        coupling_ = coupling;
    }

    Kind kind_;
    std::vector<DensitySegment> segments_;
    double coupling_ = 1.0;
};

/// Potential value V(x) for realization `index` of master seed `seed`.
inline double sample_site(const DisorderModel& model, std::uint64_t seed, std::uint64_t index, const Site& x)
{
    return model.quantile(rng::site_uniform(seed, index, x));
}

/// One realization omega restricted to a region; values align with region order.
struct Realization {
    Region region;
    std::vector<double> values;
    std::uint64_t seed = 0;
    std::uint64_t index = 0;
    double coupling = 1.0;
    std::string model_id;

    std::optional<double> value_at(const Site& x) const
    {
        auto i = region.index_of(x);
        if (!i) return std::nullopt;
        return values[*i];
    }
};

inline Realization sample_realization(const DisorderModel& model, const Region& region, std::uint64_t seed,
                                      std::uint64_t index = 0)
{
    Realization r{region, {}, seed, index, model.coupling(), model.id()};
    r.values.reserve(region.size());
    for (const auto& x : region.sites()) r.values.push_back(sample_site(model, seed, index, x));
    return r;
}

}  // namespace anderson
