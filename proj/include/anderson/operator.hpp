#pragma once

// Finite-volume Hamiltonian H = -Delta + lambda V restricted to a region with
// plain truncation (bonds leaving the region are dropped).

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "anderson/disorder.hpp"
#include "anderson/format.hpp"
#include "anderson/lattice.hpp"

namespace anderson {

/// hopping_only: H = -A + lambda V (A the adjacency matrix).
/// with_diagonal: adds +2d on the diagonal, i.e. the graph Laplacian form.
enum class LaplacianConvention { hopping_only, with_diagonal };

inline std::string to_string(LaplacianConvention c)
{
    return c == LaplacianConvention::hopping_only ? "hopping_only" : "with_diagonal";
}

inline LaplacianConvention parse_convention(const std::string& s)
{
    if (s == "hopping_only") return LaplacianConvention::hopping_only;
    if (s == "with_diagonal") return LaplacianConvention::with_diagonal;
    throw std::invalid_argument("unknown Laplacian convention '" + s + "'");
}

inline double diagonal_shift(LaplacianConvention c, int d) { return c == LaplacianConvention::with_diagonal ? 2.0 * d : 0.0; }

using SparseMatrix = Eigen::SparseMatrix<double>;

struct OperatorSample {
    Region region;
    SparseMatrix matrix;
    Realization realization;
    LaplacianConvention convention = LaplacianConvention::hopping_only;

    /// Diagonal entries in region order.
    std::vector<double> diagonal() const
    {
        std::vector<double> out(region.size());
        for (std::size_t i = 0; i < region.size(); ++i) out[i] = matrix.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
        return out;
    }
};

namespace detail {

inline SparseMatrix build_matrix(const Region& region, const std::vector<double>& diag)
{
    const std::size_t n = region.size();
    const std::size_t nn = 2 * static_cast<std::size_t>(region.dimension());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(n * (nn + 1));
    for (std::size_t i = 0; i < n; ++i) {
        trips.emplace_back(static_cast<int>(i), static_cast<int>(i), diag[i]);
        for (std::size_t k = 0; k < nn; ++k) {
            const auto j = region.neighbor_index(i, k);
            if (j >= 0) trips.emplace_back(static_cast<int>(i), static_cast<int>(j), -1.0);
        }
    }
    SparseMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

}  // namespace detail

/// Assembles H_{region; omega}. The realization may live on any superset of
/// the region; values are looked up by site.
inline OperatorSample assemble(const Region& region, const Realization& realization,
                               LaplacianConvention convention = LaplacianConvention::hopping_only)
{
    const double shift = diagonal_shift(convention, region.dimension());
    std::vector<double> diag(region.size());
    const bool aligned = realization.region.same_payload(region);
    for (std::size_t i = 0; i < region.size(); ++i) {
        double v;
        if (aligned) {
            v = realization.values[i];
        } else {
            auto val = realization.value_at(region.site(i));
            if (!val) throw std::invalid_argument("assemble: realization has no value at site " + to_string(region.site(i)));
            v = *val;
        }
        diag[i] = realization.coupling * v + shift;
    }
    OperatorSample s{region, detail::build_matrix(region, diag), realization, convention};
    return s;
}

/// H_W for W a subset of the sample's region: same potential, same convention.
inline OperatorSample restrict_to(const OperatorSample& sample, const Region& w)
{
    if (!w.is_subset_of(sample.region)) throw std::invalid_argument("restrict_to: W is not a subset of the region");
    return assemble(w, sample.realization, sample.convention);
}

/// Coordinate-triplet text: one "row col value" line per stored entry, with a
/// header line "n nnz".
inline void write_triplets(std::ostream& os, const OperatorSample& sample)
{
    const auto& m = sample.matrix;
    os << m.rows() << ' ' << m.nonZeros() << '\n';
    for (int k = 0; k < m.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
            os << it.row() << ' ' << it.col() << ' ' << format_double(it.value()) << '\n';
        }
    }
}

}  // namespace anderson
