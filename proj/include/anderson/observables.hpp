#pragma once

// Spectral diagnostics on finite volumes: eigen-decompositions, the
// density-of-states hypothesis dist(sigma(H_L), E) <= delta_L, Lifschitz-tail
// probes, adjacent-gap ratios, projection kernels and the eigenbasis bound on
// sup_t |<x|exp(-itH) P_(a,b)|y>|.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "anderson/disorder.hpp"
#include "anderson/lattice.hpp"
#include "anderson/operator.hpp"

namespace anderson {

struct EigenSystem {
    Region region;
    Eigen::VectorXd eigenvalues;   // ascending
    Eigen::MatrixXd eigenvectors;  // column n is psi_n, rows in region order
};

inline void check_dense_size(const OperatorSample& sample, std::size_t dense_max_sites)
{
    if (sample.region.size() > dense_max_sites) {
        throw std::invalid_argument("eigensystem: " + std::to_string(sample.region.size()) +
                                    " sites exceed the dense limit " + std::to_string(dense_max_sites));
    }
}

inline EigenSystem eigensystem(const OperatorSample& sample, std::size_t dense_max_sites = 4000)
{
    check_dense_size(sample, dense_max_sites);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(sample.matrix), Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensystem: decomposition did not converge");
    return {sample.region, es.eigenvalues(), es.eigenvectors()};
}

inline Eigen::VectorXd spectrum(const OperatorSample& sample, std::size_t dense_max_sites = 4000)
{
    check_dense_size(sample, dense_max_sites);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(sample.matrix), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("spectrum: decomposition did not converge");
    return es.eigenvalues();
}

/// Binomial proportion with a Wilson score interval.
struct ProbabilityEstimate {
    double value = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t hits = 0;
    std::size_t n = 0;
};

inline ProbabilityEstimate wilson_interval(std::size_t hits, std::size_t n, double z = 1.959963984540054)
{
    if (n == 0) throw std::invalid_argument("wilson_interval: no trials");
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(hits) / nn;
    const double denom = 1.0 + z * z / nn;
    const double centre = (p + z * z / (2 * nn)) / denom;
    const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / denom;
    return {p, hits == 0 ? 0.0 : std::max(0.0, centre - half), hits == n ? 1.0 : std::min(1.0, centre + half), hits, n};
}

struct DosProbe {
    double E = 0.0;
    double delta_L = 0.1;
    double P_L = 0.1;
    int L = 1;
    double beta = 0.5;
    double xi = 1.0;
};

struct DosConditionReport {
    DosProbe probe;
    int dimension = 1;
    ProbabilityEstimate probability;
    bool passes = false;  // ci_high < P_L
    bool scaling_parameters_valid = false;  // beta in (0,1), xi > 3(d-1)
};

/// dist(sigma(H), E), from an ascending spectrum.
inline double distance_to_spectrum(const Eigen::VectorXd& eig, double E)
{
    const double* first = eig.data();
    const double* last = eig.data() + eig.size();
    const double* it = std::lower_bound(first, last, E);
    double best = std::numeric_limits<double>::infinity();
    if (it != last) best = std::min(best, *it - E);
    if (it != first) best = std::min(best, E - *(it - 1));
    return best;
}

/// Prob[dist(sigma(H_{Lambda_L}), E) <= delta_L], one realization per disorder index.
inline DosConditionReport dos_condition_probability(const DisorderModel& model, int d, const DosProbe& probe,
                                                    std::size_t n_samples, std::uint64_t seed,
                                                    LaplacianConvention convention = LaplacianConvention::hopping_only)
{
    if (n_samples < 100) throw std::invalid_argument("dos_condition_probability: need at least 100 samples");
    if (!(probe.delta_L > 0)) throw std::invalid_argument("dos_condition_probability: delta_L must be positive");
    const Region box = Region::box(d, probe.L);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < n_samples; ++r) {
        const auto h = assemble(box, sample_realization(model, box, seed, r), convention);
        if (distance_to_spectrum(spectrum(h), probe.E) <= probe.delta_L) ++hits;
    }
    DosConditionReport rep;
    rep.probe = probe;
    rep.dimension = d;
    rep.probability = wilson_interval(hits, n_samples);
    rep.passes = rep.probability.ci_high < probe.P_L;
    rep.scaling_parameters_valid = probe.beta > 0 && probe.beta < 1 && probe.xi > 3.0 * (d - 1);
    return rep;
}

struct LifschitzReport {
    int dimension = 1;
    int L = 1;
    double delta_E = 0.0;
    double e0_convention = 0.0;  // inf sigma(-Delta on Lambda_L) + lambda * inf supp V
    double e0_literal = 0.0;     // -lambda * V_0 as written for the bottom of the spectrum
    ProbabilityEstimate probability;
    double reference_bound = 0.0;  // L^d exp(-dE^{-d/2}) with unit constant; not rigorous
};

/// Smallest eigenvalue of the kinetic term on [-L, L]^d under truncation.
inline double kinetic_bottom(int d, int L, LaplacianConvention convention)
{
    const double n = 2.0 * L + 1.0;
    return -2.0 * d * std::cos(M_PI / (n + 1.0)) + diagonal_shift(convention, d);
}

/// Prob[inf sigma(H_{Lambda_L}) <= E_0 + delta_E].
inline LifschitzReport lifschitz_probe(const DisorderModel& model, int d, int L, double delta_E, std::size_t n_samples,
                                       std::uint64_t seed,
                                       LaplacianConvention convention = LaplacianConvention::hopping_only)
{
    if (n_samples < 100) throw std::invalid_argument("lifschitz_probe: need at least 100 samples");
    const Region box = Region::box(d, L);
    LifschitzReport rep;
    rep.dimension = d;
    rep.L = L;
    rep.delta_E = delta_E;
    const double v0 = model.support().lo;
    rep.e0_convention = kinetic_bottom(d, L, convention) + model.coupling() * v0;
    rep.e0_literal = -model.coupling() * v0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < n_samples; ++r) {
        const auto h = assemble(box, sample_realization(model, box, seed, r), convention);
        if (spectrum(h)[0] <= rep.e0_convention + delta_E) ++hits;
    }
    rep.probability = wilson_interval(hits, n_samples);
    rep.reference_bound = delta_E > 0 ? std::pow(static_cast<double>(L), d) * std::exp(-std::pow(delta_E, -d / 2.0))
                                      : 0.0;
    return rep;
}

/// Mean over adjacent gap pairs inside the open window (a, b) of
/// min(g_n, g_{n+1}) / max(g_n, g_{n+1}).
inline double gap_ratio_mean(const std::vector<double>& sorted_eigenvalues, double a, double b)
{
    std::vector<double> in;
    for (double e : sorted_eigenvalues) {
        if (e > a && e < b) in.push_back(e);
    }
    if (in.size() < 3) throw std::invalid_argument("gap statistics need at least 3 eigenvalues in the window");
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n + 2 < in.size(); ++n) {
        const double g1 = in[n + 1] - in[n];
        const double g2 = in[n + 2] - in[n + 1];
        const double hi = std::max(g1, g2);
        acc += hi > 0 ? std::min(g1, g2) / hi : 1.0;
        ++count;
    }
    return acc / static_cast<double>(count);
}

inline double gap_statistics(const EigenSystem& eigs, double a, double b)
{
    const auto& v = eigs.eigenvalues;
    return gap_ratio_mean(std::vector<double>(v.data(), v.data() + v.size()), a, b);
}

/// Open window around the central `fraction` of the levels, by index.
inline std::pair<double, double> central_window(const Eigen::VectorXd& eig, double fraction = 0.5)
{
    const auto n = eig.size();
    if (n < 4) throw std::invalid_argument("central_window: too few eigenvalues");
    const auto drop = static_cast<Eigen::Index>(std::floor(n * (1.0 - fraction) / 2.0));
    const Eigen::Index lo = std::max<Eigen::Index>(drop, 1);
    const Eigen::Index hi = std::min<Eigen::Index>(n - drop, n - 1);
    return {0.5 * (eig[lo - 1] + eig[lo]), 0.5 * (eig[hi - 1] + eig[hi])};
}

/// P_{H <= E_F} as a dense matrix.
inline Eigen::MatrixXd projection_matrix(const EigenSystem& eigs, double fermi_energy)
{
    Eigen::Index m = 0;
    while (m < eigs.eigenvalues.size() && eigs.eigenvalues[m] <= fermi_energy) ++m;
    const auto occupied = eigs.eigenvectors.leftCols(m);
    return occupied * occupied.transpose();
}

/// |<x|P_{H <= E_F}|y>| = |sum_{E_n <= E_F} psi_n(x) psi_n(y)|
inline double projection_kernel(const EigenSystem& eigs, double fermi_energy, const Site& x, const Site& y)
{
    const auto ix = static_cast<Eigen::Index>(eigs.region.require_index(x));
    const auto iy = static_cast<Eigen::Index>(eigs.region.require_index(y));
    double acc = 0.0;
    for (Eigen::Index n = 0; n < eigs.eigenvalues.size() && eigs.eigenvalues[n] <= fermi_energy; ++n) {
        acc += eigs.eigenvectors(ix, n) * eigs.eigenvectors(iy, n);
    }
    return std::abs(acc);
}

/// sum_{E_n in (a,b)} |psi_n(x)| |psi_n(y)|, which dominates
/// |<x|exp(-itH) P_(a,b)|y>| for every t.
inline double dynamical_bound(const EigenSystem& eigs, double a, double b, const Site& x, const Site& y)
{
    const auto ix = static_cast<Eigen::Index>(eigs.region.require_index(x));
    const auto iy = static_cast<Eigen::Index>(eigs.region.require_index(y));
    double acc = 0.0;
    for (Eigen::Index n = 0; n < eigs.eigenvalues.size(); ++n) {
        const double e = eigs.eigenvalues[n];
        if (e > a && e < b) acc += std::abs(eigs.eigenvectors(ix, n)) * std::abs(eigs.eigenvectors(iy, n));
    }
    return acc;
}

/// <x|exp(-itH) P_(a,b)|y>
inline std::complex<double> evolution_amplitude(const EigenSystem& eigs, double a, double b, const Site& x,
                                                const Site& y, double t)
{
    const auto ix = static_cast<Eigen::Index>(eigs.region.require_index(x));
    const auto iy = static_cast<Eigen::Index>(eigs.region.require_index(y));
    std::complex<double> acc = 0.0;
    for (Eigen::Index n = 0; n < eigs.eigenvalues.size(); ++n) {
        const double e = eigs.eigenvalues[n];
        if (e > a && e < b) acc += std::polar(1.0, -t * e) * (eigs.eigenvectors(ix, n) * eigs.eigenvectors(iy, n));
    }
    return acc;
}

}  // namespace anderson
