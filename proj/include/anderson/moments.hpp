#pragma once

// Monte Carlo fractional moments E(|G(x,y;z)|^s).
//
// Estimates are median-of-means over equal blocks of consecutive realizations.
// At eta = 0 and s >= 1/2 the summand has infinite variance, so the interval is
// the distribution-free sign-test interval on the ordered block means.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "anderson/disorder.hpp"
#include "anderson/lattice.hpp"
#include "anderson/operator.hpp"
#include "anderson/resolvent.hpp"

namespace anderson {

struct MomentEstimate {
    double value = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_blocks = 0;
    std::size_t resample_events = 0;
    std::size_t near_singular = 0;
    std::vector<double> block_means;  // in block order
};

struct EstimatorOptions {
    std::size_t n_blocks = 20;
    LaplacianConvention convention = LaplacianConvention::hopping_only;
    SolverOptions solver{};
    unsigned threads = 1;
    double confidence = 0.95;
};

class EstimationError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Largest 1-based rank j with P(Bin(k, 1/2) <= j - 1) <= alpha/2, so that
/// [X_(j), X_(k+1-j)] covers the median with probability >= 1 - alpha.
/// Returns 1 (the full range) when k is too small for the requested level.
inline std::size_t sign_interval_rank(std::size_t k, double alpha = 0.05)
{
    double cdf = 0.0;
    double pmf = std::pow(0.5, static_cast<double>(k));  // P(X = 0)
    std::size_t j = 1;
    for (std::size_t m = 0; m < k; ++m) {
        cdf += pmf;
        if (cdf > alpha / 2) break;
        j = m + 1;
        pmf *= static_cast<double>(k - m) / static_cast<double>(m + 1);
    }
    return std::min(j, (k + 1) / 2);
}

inline double median_of(std::vector<double> v)
{
    if (v.empty()) throw std::invalid_argument("median of empty sequence");
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

/// Median of block means with its order-statistic confidence interval.
inline MomentEstimate summarize_blocks(std::vector<double> block_means, std::size_t n_samples, double confidence = 0.95)
{
    MomentEstimate e;
    e.n_samples = n_samples;
    e.n_blocks = block_means.size();
    std::vector<double> sorted = block_means;
    std::sort(sorted.begin(), sorted.end());
    e.value = median_of(sorted);
    const std::size_t j = sign_interval_rank(sorted.size(), 1.0 - confidence);
    e.ci_low = sorted[j - 1];
    e.ci_high = sorted[sorted.size() - j];
    e.block_means = std::move(block_means);
    return e;
}

/// Median-of-means over raw per-realization samples, blocks in sample order.
inline MomentEstimate median_of_means(std::span<const double> samples, std::size_t n_blocks, double confidence = 0.95)
{
    if (n_blocks == 0 || samples.size() < n_blocks || samples.size() % n_blocks != 0) {
        throw std::invalid_argument("median_of_means: sample count must be a positive multiple of the block count");
    }
    const std::size_t m = samples.size() / n_blocks;
    std::vector<double> means(n_blocks);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        double acc = 0;
        for (std::size_t i = 0; i < m; ++i) acc += samples[b * m + i];
        means[b] = acc / static_cast<double>(m);
    }
    return summarize_blocks(std::move(means), samples.size(), confidence);
}

/// Disorder index used when realization r has to be redrawn (attempt >= 1).
constexpr std::uint64_t resample_index(std::uint64_t r, std::uint64_t attempt)
{
    return (std::uint64_t{1} << 62) | (r << 5) | (attempt & 31);
}

inline void check_budget(std::size_t n_samples, std::size_t n_blocks)
{
    if (n_samples < 100) throw std::invalid_argument("need at least 100 samples");
    if (n_blocks < 10 || n_samples % n_blocks != 0) {
        throw std::invalid_argument("samples must split into >= 10 equal blocks");
    }
}

/// Runs `sample(disorder_index, out)` for realizations r = 0..n_samples-1 and
/// reduces each of the n_outputs columns by median of means. `sample` returns
/// true if the solve was near singular and may throw SolverError, in which
/// case the realization is redrawn from the resample stream and counted.
/// Results do not depend on the thread count.
template <class Sampler>
std::vector<MomentEstimate> estimate_blocked(std::size_t n_samples, std::size_t n_outputs, const EstimatorOptions& opt,
                                             Sampler&& sample)
{
    check_budget(n_samples, opt.n_blocks);
    constexpr std::uint64_t max_attempts = 16;
    std::vector<double> values(n_samples * n_outputs, 0.0);
    std::vector<std::uint8_t> resampled(n_samples, 0), singular(n_samples, 0);

    auto run_one = [&](std::size_t r) {
        std::span<double> out(values.data() + r * n_outputs, n_outputs);
        for (std::uint64_t attempt = 0;; ++attempt) {
            const std::uint64_t index = attempt == 0 ? r : resample_index(r, attempt);
            try {
                singular[r] = sample(index, out) ? 1 : 0;
                break;
            } catch (const SolverError&) {
                if (attempt + 1 >= max_attempts) throw;
                resampled[r] = static_cast<std::uint8_t>(std::min<std::uint64_t>(attempt + 1, 255));
            }
        }
        for (double v : out) {
            if (!std::isfinite(v)) throw EstimationError("non-finite sample at realization " + std::to_string(r));
        }
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(n_samples)));
    if (threads == 1) {
        for (std::size_t r = 0; r < n_samples; ++r) run_one(r);
    } else {
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t r = t; r < n_samples; r += threads) run_one(r);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::size_t n_resampled = 0, n_singular = 0;
    for (std::size_t r = 0; r < n_samples; ++r) {
        n_resampled += resampled[r];
        n_singular += singular[r];
    }

    const std::size_t m = n_samples / opt.n_blocks;
    std::vector<MomentEstimate> out;
    out.reserve(n_outputs);
    for (std::size_t c = 0; c < n_outputs; ++c) {
        std::vector<double> means(opt.n_blocks);
        for (std::size_t b = 0; b < opt.n_blocks; ++b) {
            double acc = 0;
            for (std::size_t i = 0; i < m; ++i) acc += values[(b * m + i) * n_outputs + c];
            means[b] = acc / static_cast<double>(m);
        }
        auto e = summarize_blocks(std::move(means), n_samples, opt.confidence);
        e.resample_events = n_resampled;
        e.near_singular = n_singular;
        out.push_back(std::move(e));
    }
    return out;
}

struct MomentQuery {
    Region region;
    Site x;
    Site y;
    SpectralPoint z;
    double s = 1.0 / 3.0;
    std::optional<Region> restrict_to;

    const Region& effective_region() const { return restrict_to ? *restrict_to : region; }
};

inline void check_exponent(double s)
{
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("fractional exponent s must lie in (0, 1)");
}

/// Estimates E(|G(x, u; z)|^s) for every target u with one solve per realization.
inline std::vector<MomentEstimate> estimate_row_moments(const DisorderModel& model, const Region& region, const Site& x,
                                                        std::span<const Site> targets, const SpectralPoint& z, double s,
                                                        std::size_t n_samples, std::uint64_t seed,
                                                        const EstimatorOptions& opt = {})
{
    check_exponent(s);
    region.require_index(x);
    std::vector<std::size_t> idx;
    idx.reserve(targets.size());
    for (const auto& u : targets) idx.push_back(region.require_index(u));

    return estimate_blocked(n_samples, targets.size(), opt, [&](std::uint64_t index, std::span<double> out) {
        const auto omega = sample_realization(model, region, seed, index);
        const auto h = assemble(region, omega, opt.convention);
        const auto row = green_row(h, x, z, opt.solver);
        for (std::size_t k = 0; k < idx.size(); ++k) out[k] = std::pow(std::abs(row.values[static_cast<Eigen::Index>(idx[k])]), s);
        return row.near_singular;
    });
}

/// E(|<x|(H_{Lambda or W} - z)^{-1}|y>|^s). Restriction to W reuses the same
/// site-addressed potential values as the full region.
inline MomentEstimate estimate_moment(const DisorderModel& model, const MomentQuery& query, std::size_t n_samples,
                                      std::uint64_t seed, const EstimatorOptions& opt = {})
{
    if (query.restrict_to && !query.restrict_to->is_subset_of(query.region)) {
        throw std::invalid_argument("estimate_moment: restrict_to must be a subset of the region");
    }
    const Region& eff = query.effective_region();
    if (!eff.contains(query.x) || !eff.contains(query.y)) throw std::invalid_argument("estimate_moment: x and y must lie in the region");
    const std::vector<Site> target{query.y};
    return estimate_row_moments(model, eff, query.x, target, query.z, query.s, n_samples, seed, opt).front();
}

struct ShellSupremum {
    Site site;
    MomentEstimate estimate;
    std::vector<Site> shell;
    std::vector<MomentEstimate> all;
};

/// sup over L/2 <= ||y||_1 <= L of E(|<O|(H_region - z)^{-1}|y>|^s); the
/// maximizer is chosen on point estimates (first in region order on ties).
inline ShellSupremum estimate_shell_supremum(const DisorderModel& model, const Region& region, int L,
                                             const SpectralPoint& z, double s, std::size_t n_samples,
                                             std::uint64_t seed, const EstimatorOptions& opt = {})
{
    if (L < 2) throw std::invalid_argument("shell supremum needs L >= 2");
    ShellSupremum out;
    out.shell = shell_sites(region, L / 2.0, static_cast<double>(L));
    if (out.shell.empty()) throw std::invalid_argument("shell is empty for this region");
    out.all = estimate_row_moments(model, region, origin(region.dimension()), out.shell, z, s, n_samples, seed, opt);
    std::size_t best = 0;
    for (std::size_t k = 1; k < out.all.size(); ++k) {
        if (out.all[k].value > out.all[best].value) best = k;
    }
    out.site = out.shell[best];
    out.estimate = out.all[best];
    return out;
}

}  // namespace anderson
