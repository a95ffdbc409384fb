#pragma once

// Green function entries G(x, y; z) = <x|(H - z)^{-1}|y>.
//
// Real energies (eta == 0) are solved in real arithmetic; finite-volume spectra
// avoid a fixed E almost surely, so no eta -> 0 extrapolation is needed. The
// contract is the residual bound, whichever factorization produced the column.

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "anderson/format.hpp"
#include "anderson/lattice.hpp"
#include "anderson/operator.hpp"

namespace anderson {

using Complex = std::complex<double>;

/// z = E + i eta
struct SpectralPoint {
    double E = 0.0;
    double eta = 0.0;
    Complex z() const { return {E, eta}; }
};

struct SolverOptions {
    std::size_t dense_max_sites = 64;
    std::size_t direct_max_sites = 20000;
    double residual_tolerance = 1e-10;
    int max_refinements = 3;
    double near_singular_condition = 1e14;
};

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double condition_estimate)
        : std::runtime_error(what + " (condition estimate " + format_double(condition_estimate) + ")"),
          condition_estimate_(condition_estimate)
    {}
    double condition_estimate() const { return condition_estimate_; }

private:
    double condition_estimate_;
};

/// One row <x|(H - z)^{-1}|u> for all u in the region (region order).
struct GreenRow {
    Region region;
    Eigen::VectorXcd values;
    double condition_estimate = 1.0;
    double residual = 0.0;
    bool near_singular = false;

    Complex at(const Site& u) const { return values[static_cast<Eigen::Index>(region.require_index(u))]; }
};

namespace detail {

template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
struct ColumnSolve {
    Vec<Scalar> g;
    double condition_estimate = 1.0;
    double residual = 0.0;
};

template <class Scalar>
double inf_norm(const Vec<Scalar>& v)
{
    return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

template <class Scalar>
Eigen::SparseMatrix<Scalar> shifted(const SparseMatrix& h, Scalar z)
{
    Eigen::SparseMatrix<Scalar> a = h.cast<Scalar>();
    for (Eigen::Index i = 0; i < a.rows(); ++i) a.coeffRef(i, i) -= z;
    a.makeCompressed();
    return a;
}

template <class Scalar>
double one_norm(const Eigen::SparseMatrix<Scalar>& a)
{
    double best = 0;
    for (int k = 0; k < a.outerSize(); ++k) {
        double col = 0;
        for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(a, k); it; ++it) col += std::abs(it.value());
        best = std::max(best, col);
    }
    return best;
}

/// Solves (H - z) g = e_col to the residual bound, refining iteratively.
template <class Scalar>
ColumnSolve<Scalar> solve_shifted_column(const SparseMatrix& h, Scalar z, Eigen::Index col, const SolverOptions& opt)
{
    const Eigen::Index n = h.rows();
    const auto a = shifted(h, z);
    Vec<Scalar> rhs = Vec<Scalar>::Zero(n);
    rhs[col] = Scalar(1);

    ColumnSolve<Scalar> out;
    auto residual_of = [&](const Vec<Scalar>& g) { return inf_norm<Scalar>(Vec<Scalar>(a * g - rhs)); };
    auto acceptable = [&](const Vec<Scalar>& g, double res) {
        return g.allFinite() && res < opt.residual_tolerance * (1.0 + inf_norm<Scalar>(g));
    };

    auto refine = [&](auto&& solve) {
        out.residual = residual_of(out.g);
        for (int it = 0; it < opt.max_refinements && out.g.allFinite() && !acceptable(out.g, out.residual); ++it) {
            Vec<Scalar> r = rhs - a * out.g;
            out.g += solve(r);
            out.residual = residual_of(out.g);
        }
    };

    if (static_cast<std::size_t>(n) <= opt.dense_max_sites) {
        using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
        Dense dense(a);
        Eigen::PartialPivLU<Dense> lu(dense);
        const double rc = lu.rcond();
        out.condition_estimate = rc > 0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
        out.g = lu.solve(rhs);
        refine([&](const Vec<Scalar>& r) -> Vec<Scalar> { return lu.solve(r); });
    } else {
        bool done = false;
        if (static_cast<std::size_t>(n) > opt.direct_max_sites) {
            Eigen::BiCGSTAB<Eigen::SparseMatrix<Scalar>, Eigen::IncompleteLUT<Scalar>> it;
            it.setTolerance(1e-14);
            it.setMaxIterations(static_cast<int>(std::max<Eigen::Index>(1000, 4 * n)));
            it.compute(a);
            if (it.info() == Eigen::Success) {
                out.g = it.solve(rhs);
                if (it.info() == Eigen::Success) {
                    refine([&](const Vec<Scalar>& r) -> Vec<Scalar> { return it.solve(r); });
                    done = acceptable(out.g, out.residual);
                }
            }
        }
        if (!done) {
            Eigen::SparseLU<Eigen::SparseMatrix<Scalar>, Eigen::COLAMDOrdering<int>> lu;
            lu.compute(a);
            if (lu.info() != Eigen::Success) {
                throw SolverError("sparse LU failed: matrix numerically singular", std::numeric_limits<double>::infinity());
            }
            out.g = lu.solve(rhs);
            refine([&](const Vec<Scalar>& r) -> Vec<Scalar> { return lu.solve(r); });
        }
        // lower bound on kappa_1 from the computed column
        out.condition_estimate = one_norm(a) * (out.g.allFinite() ? out.g.cwiseAbs().sum() : std::numeric_limits<double>::infinity());
    }

    if (!out.g.allFinite()) throw SolverError("non-finite Green function column", out.condition_estimate);
    if (!acceptable(out.g, out.residual)) {
        throw SolverError("residual " + format_double(out.residual) + " above tolerance", out.condition_estimate);
    }
    return out;
}

}  // namespace detail

inline GreenRow green_row(const OperatorSample& sample, const Site& x, const SpectralPoint& z,
                          const SolverOptions& opt = {})
{
    if (!std::isfinite(z.E) || !std::isfinite(z.eta)) throw std::invalid_argument("green_row: spectral point must be finite");
    const auto col = static_cast<Eigen::Index>(sample.region.require_index(x));
    GreenRow row{sample.region, {}, 1.0, 0.0, false};
    if (z.eta == 0.0) {
        auto s = detail::solve_shifted_column<double>(sample.matrix, z.E, col, opt);
        row.values = s.g.cast<Complex>();
        row.condition_estimate = s.condition_estimate;
        row.residual = s.residual;
    } else {
        auto s = detail::solve_shifted_column<Complex>(sample.matrix, z.z(), col, opt);
        row.values = std::move(s.g);
        row.condition_estimate = s.condition_estimate;
        row.residual = s.residual;
    }
    row.near_singular = !(row.condition_estimate <= opt.near_singular_condition);
    return row;
}

inline Complex green_entry(const OperatorSample& sample, const Site& x, const Site& y, const SpectralPoint& z,
                           const SolverOptions& opt = {})
{
    if (!sample.region.contains(y)) throw std::out_of_range("green_entry: y is not in the region");
    return green_row(sample, x, z, opt).at(y);
}

/// Independent 1-D route: Schur-complement ratios of the transfer recurrence
/// -psi(k-1) + (a_k - z) psi(k) - psi(k+1) = 0 with truncated ends,
///   alpha_k = d_k - 1/alpha_{k-1},  beta_k = d_k - 1/beta_{k+1},
///   G(j,j) = 1/(alpha_j + beta_j - d_j),  G(i,j) = G(j,j) prod_{k=i}^{j-1} 1/alpha_k.
/// The product is accumulated in log form so long chains do not under/overflow.
inline Complex green_1d_transfer(const OperatorSample& sample, const Site& x, const Site& y, const SpectralPoint& z)
{
    const auto& region = sample.region;
    if (region.dimension() != 1) throw std::invalid_argument("green_1d_transfer: region must be one-dimensional");
    const int first = region.site(0)[0];
    const auto n = static_cast<int>(region.size());
    if (region.site(region.size() - 1)[0] - first != n - 1) {
        throw std::invalid_argument("green_1d_transfer: region must be a contiguous interval");
    }
    int i = region.require_index(x) >= region.require_index(y) ? static_cast<int>(region.require_index(y))
                                                               : static_cast<int>(region.require_index(x));
    int j = static_cast<int>(std::max(region.require_index(x), region.require_index(y)));

    const Complex zz = z.z();
    std::vector<Complex> d(static_cast<std::size_t>(n)), alpha(static_cast<std::size_t>(n)), beta(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) d[k] = sample.matrix.coeff(k, k) - zz;
    alpha[0] = d[0];
    for (int k = 1; k < n; ++k) alpha[k] = d[k] - 1.0 / alpha[k - 1];
    beta[n - 1] = d[n - 1];
    for (int k = n - 2; k >= 0; --k) beta[k] = d[k] - 1.0 / beta[k + 1];

    const Complex gjj = 1.0 / (alpha[j] + beta[j] - d[j]);
    if (i == j) return gjj;
    double log_mag = std::log(std::abs(gjj));
    double phase = std::arg(gjj);
    for (int k = i; k < j; ++k) {
        log_mag -= std::log(std::abs(alpha[k]));
        phase -= std::arg(alpha[k]);
    }
    return std::polar(std::exp(log_mag), phase);
}

}  // namespace anderson
