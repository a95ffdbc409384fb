#pragma once

// Finite regions of Z^d: site indexing, boundary bonds, the fattened region
// and the boundary-collapsed metric used by the localization bounds.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace anderson {

using Site = std::vector<int>;

struct SiteHash {
    std::size_t operator()(const Site& s) const noexcept
    {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ s.size();
        for (int c : s) {
            h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(c)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

inline Site origin(int d) { return Site(static_cast<std::size_t>(d), 0); }

/// ||y||_1 = sum_j |y_j|
inline int norm1(const Site& y)
{
    int n = 0;
    for (int c : y) n += std::abs(c);
    return n;
}

inline int distance1(const Site& x, const Site& y)
{
    if (x.size() != y.size()) throw std::invalid_argument("distance1: dimension mismatch");
    int n = 0;
    for (std::size_t j = 0; j < x.size(); ++j) n += std::abs(x[j] - y[j]);
    return n;
}

/// Nearest neighbours in the fixed order (-e_0, +e_0, -e_1, +e_1, ...).
inline std::vector<Site> neighbors(const Site& x)
{
    std::vector<Site> out;
    out.reserve(2 * x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        for (int step : {-1, +1}) {
            Site y = x;
            y[j] += step;
            out.push_back(std::move(y));
        }
    }
    return out;
}

inline std::string to_string(const Site& x)
{
    std::ostringstream os;
    os << '(';
    for (std::size_t j = 0; j < x.size(); ++j) os << (j ? "," : "") << x[j];
    os << ')';
    return os.str();
}

/// Parses "3", "1,-2", "(1,-2)" or "1 -2".
inline Site parse_site(const std::string& text)
{
    std::string t;
    for (char c : text) {
        if (c == '(' || c == ')' || c == '[' || c == ']') continue;
        t.push_back(c == ',' ? ' ' : c);
    }
    std::istringstream is(t);
    Site s;
    int v;
    while (is >> v) s.push_back(v);
    if (!is.eof() || s.empty()) throw std::invalid_argument("cannot parse site '" + text + "'");
    return s;
}

/// A nonempty finite subset of Z^d. Sites are kept in lexicographic order, so
/// 1-D intervals index left to right. Copies share one immutable payload.
class Region {
public:
    static Region from_sites(std::vector<Site> sites)
    {
        if (sites.empty()) throw std::invalid_argument("Region: empty site list");
        const std::size_t d = sites.front().size();
        if (d == 0) throw std::invalid_argument("Region: dimension must be >= 1");
        for (const auto& s : sites) {
            if (s.size() != d) throw std::invalid_argument("Region: mixed dimensions");
        }
        std::sort(sites.begin(), sites.end());
        sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
        return Region(std::move(sites));
    }

    /// Box prod_j [lo_j, hi_j].
    static Region box(const Site& lo, const Site& hi)
    {
        if (lo.size() != hi.size() || lo.empty()) throw std::invalid_argument("Region::box: bad corners");
        std::vector<Site> sites;
        Site cur = lo;
        for (std::size_t j = 0; j < lo.size(); ++j) {
            if (hi[j] < lo[j]) throw std::invalid_argument("Region::box: empty extent");
        }
        while (true) {
            sites.push_back(cur);
            std::size_t j = lo.size();
            while (j > 0) {
                --j;
                if (cur[j] < hi[j]) {
                    ++cur[j];
                    break;
                }
                cur[j] = lo[j];
                if (j == 0) return Region(std::move(sites));
            }
        }
    }

    /// Lambda_L = [-L, L]^d
    static Region box(int d, int L)
    {
        if (d < 1 || L < 0) throw std::invalid_argument("Region::box: need d >= 1 and L >= 0");
        return box(Site(static_cast<std::size_t>(d), -L), Site(static_cast<std::size_t>(d), L));
    }

    static Region interval(int a, int b) { return box(Site{a}, Site{b}); }

    int dimension() const { return static_cast<int>(data_->sites.front().size()); }
    std::size_t size() const { return data_->sites.size(); }
    const std::vector<Site>& sites() const& { return data_->sites; }
    std::vector<Site> sites() && { return data_->sites; }  // safe on temporaries
    const Site& site(std::size_t i) const { return data_->sites.at(i); }

    std::optional<std::size_t> index_of(const Site& s) const
    {
        auto it = data_->index.find(s);
        if (it == data_->index.end()) return std::nullopt;
        return it->second;
    }

    std::size_t require_index(const Site& s) const
    {
        auto i = index_of(s);
        if (!i) throw std::out_of_range("site " + to_string(s) + " is not in the region");
        return *i;
    }

    bool contains(const Site& s) const { return s.size() == data_->sites.front().size() && data_->index.count(s) != 0; }

    bool is_subset_of(const Region& other) const
    {
        if (other.dimension() != dimension()) return false;
        return std::all_of(sites().begin(), sites().end(), [&](const Site& s) { return other.contains(s); });
    }

    /// neighbor_index(i, k): region index of the k-th neighbour of site i, or -1.
    std::int64_t neighbor_index(std::size_t i, std::size_t k) const
    {
        return data_->neighbor[i * 2 * static_cast<std::size_t>(dimension()) + k];
    }

    bool operator==(const Region& o) const { return data_ == o.data_ || data_->sites == o.data_->sites; }
    bool same_payload(const Region& o) const { return data_ == o.data_; }

    /// Lexicographic bounding box corners.
    std::pair<Site, Site> bounds() const
    {
        Site lo = sites().front(), hi = sites().front();
        for (const auto& s : sites()) {
            for (std::size_t j = 0; j < s.size(); ++j) {
                lo[j] = std::min(lo[j], s[j]);
                hi[j] = std::max(hi[j], s[j]);
            }
        }
        return {lo, hi};
    }

private:
    struct Data {
        std::vector<Site> sites;
        std::unordered_map<Site, std::size_t, SiteHash> index;
        std::vector<std::int64_t> neighbor;
    };

    explicit Region(std::vector<Site> sorted_sites)
    {
        auto payload = std::make_shared<Data>();
        auto& d = *payload;
        d.sites = std::move(sorted_sites);
        d.index.reserve(d.sites.size());
        for (std::size_t i = 0; i < d.sites.size(); ++i) d.index.emplace(d.sites[i], i);
        const std::size_t nn = 2 * d.sites.front().size();
        d.neighbor.assign(d.sites.size() * nn, std::int64_t{-1});
        for (std::size_t i = 0; i < d.sites.size(); ++i) {
            auto nbrs = neighbors(d.sites[i]);
            for (std::size_t k = 0; k < nn; ++k) {
                auto it = d.index.find(nbrs[k]);
                if (it != d.index.end()) d.neighbor[i * nn + k] = static_cast<std::int64_t>(it->second);
            }
        }
        data_ = std::move(payload);
    }

    std::shared_ptr<const Data> data_;
};

/// A lattice bond <inside, outside> crossing the region boundary.
struct Bond {
    Site inside;
    Site outside;
    bool operator==(const Bond&) const = default;
};

using BondSet = std::vector<Bond>;

/// Gamma(Lambda): every nearest-neighbour pair with one endpoint inside, in
/// region order and neighbour order.
inline BondSet boundary_bonds(const Region& region)
{
    BondSet out;
    const std::size_t nn = 2 * static_cast<std::size_t>(region.dimension());
    for (std::size_t i = 0; i < region.size(); ++i) {
        auto nbrs = neighbors(region.site(i));
        for (std::size_t k = 0; k < nn; ++k) {
            if (region.neighbor_index(i, k) < 0) out.push_back({region.site(i), std::move(nbrs[k])});
        }
    }
    return out;
}

/// Lambda^+ = Lambda together with all of its nearest neighbours.
inline Region extend_plus(const Region& region)
{
    std::vector<Site> sites = region.sites();
    for (const auto& b : boundary_bonds(region)) sites.push_back(b.outside);
    return Region::from_sites(std::move(sites));
}

/// Exterior vertex boundary: sites outside the region adjacent to it.
inline std::vector<Site> exterior_boundary(const Region& region)
{
    std::vector<Site> out;
    for (auto& b : boundary_bonds(region)) out.push_back(std::move(b.outside));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// 1-norm distance from x to the exterior boundary (>= 1 for x inside).
inline int distance_to_boundary(const Region& region, const Site& x)
{
    int best = std::numeric_limits<int>::max();
    for (const auto& b : exterior_boundary(region)) best = std::min(best, distance1(x, b));
    return best;
}

/// min{ |x-y|, dist(x, dOmega) + dist(y, dOmega) }: the whole boundary is
/// treated as a single point.
inline int dist_region(const Region& region, const Site& x, const Site& y)
{
    if (!region.contains(x) || !region.contains(y)) {
        throw std::out_of_range("dist_region: sites must lie in the region");
    }
    const int direct = distance1(x, y);
    if (direct == 0) return 0;
    return std::min(direct, distance_to_boundary(region, x) + distance_to_boundary(region, y));
}

/// Sites y of the box with lo <= ||y||_1 <= hi (the shell used by the
/// power-law tests), in region order.
inline std::vector<Site> shell_sites(const Region& region, double lo, double hi)
{
    std::vector<Site> out;
    for (const auto& s : region.sites()) {
        const double n = norm1(s);
        if (n >= lo && n <= hi) out.push_back(s);
    }
    return out;
}

}  // namespace anderson
