#pragma once

// JSON views of the result structs. Non-finite doubles become null.

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "anderson/analysis.hpp"
#include "anderson/criteria.hpp"
#include "anderson/moments.hpp"
#include "anderson/observables.hpp"

namespace anderson {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.3.0";

inline constexpr const char* kStatisticalCaveat =
    "verdict is statistical: it holds at the estimator's confidence level, not as a proof";

inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json site_json(const Site& s) { return Json(s); }

inline Json to_json(const MomentEstimate& e, bool with_blocks = true)
{
    Json j;
    j["value"] = num(e.value);
    j["ci_low"] = num(e.ci_low);
    j["ci_high"] = num(e.ci_high);
    j["n_samples"] = e.n_samples;
    j["n_blocks"] = e.n_blocks;
    j["resample_events"] = e.resample_events;
    j["near_singular"] = e.near_singular;
    if (with_blocks) {
        Json b = Json::array();
        for (double v : e.block_means) b.push_back(num(v));
        j["block_means"] = b;
    }
    return j;
}

inline Json to_json(const CriterionConstants& c)
{
    return Json{{"C_s", c.C_s}, {"C_tilde_s", c.C_tilde_s}, {"s", c.s}, {"source", c.source}};
}

inline Json to_json(const CriterionReport& r)
{
    Json j;
    j["criterion"] = to_string(r.criterion);
    j["lhs"] = num(r.lhs);
    j["ci_low"] = num(r.ci_low);
    j["ci_high"] = num(r.ci_high);
    j["threshold"] = r.threshold;
    j["verdict"] = to_string(r.verdict);
    j["rigor"] = to_string(r.rigor);
    j["prefactor"] = num(r.prefactor);
    j["moment_sum"] = num(r.moment_sum);
    j["constants"] = to_json(r.constants);
    j["lambda"] = r.lambda;
    j["E"] = r.z.E;
    j["eta"] = r.z.eta;
    j["dimension"] = r.dimension;
    j["region_sites"] = r.region_sites;
    j["boundary_bonds"] = r.boundary_bonds;
    j["subsets_evaluated"] = r.subsets_evaluated;
    if (!r.subset_strategy.empty()) j["subset_strategy"] = r.subset_strategy;
    if (!r.maximizing_subset.empty()) j["maximizing_subset"] = r.maximizing_subset;
    Json terms = Json::array();
    for (const auto& t : r.sub_terms) {
        Json tj = to_json(t.estimate, false);
        tj["inside"] = t.bond.inside;
        tj["outside"] = t.bond.outside;
        terms.push_back(std::move(tj));
    }
    j["sub_terms"] = std::move(terms);
    j["n_samples"] = r.n_samples;
    j["n_blocks"] = r.n_blocks;
    j["resample_events"] = r.resample_events;
    j["near_singular"] = r.near_singular;
    j["seed"] = r.seed;
    j["convention"] = to_string(r.convention);
    j["model"] = r.model_id;
    j["statistical"] = r.statistical;
    if (r.statistical) j["caveat"] = kStatisticalCaveat;
    return j;
}

inline Json to_json(const DecayFit& f)
{
    return Json{{"model", f.model == DecayModel::exponential ? "exponential" : "power_law"},
                {"A", num(f.A)},
                {"mu", num(f.mu)},
                {"mu_ci_low", num(f.mu_ci_low)},
                {"mu_ci_high", num(f.mu_ci_high)},
                {"ci_method", f.ci_method},
                {"rms_residual", num(f.goodness.rms_residual)},
                {"curvature", num(f.goodness.curvature)},
                {"curvature_se", num(f.goodness.curvature_se)},
                {"curvature_flag", f.goodness.curvature_flag}};
}

inline Json to_json(const DecaySeries& s)
{
    Json pts = Json::array();
    for (const auto& p : s.points) {
        Json pj = to_json(p.moment, false);
        pj["distance"] = p.distance;
        pts.push_back(std::move(pj));
    }
    return Json{{"s", s.s}, {"E", s.E}, {"eta", s.eta}, {"lambda", s.lambda}, {"points", pts}};
}

inline Json to_json(const PowerLawReport& r)
{
    return Json{{"variant", to_string(r.variant)},
                {"dimension", r.dimension},
                {"L", r.L},
                {"B", r.B},
                {"exponent", r.exponent},
                {"threshold", r.threshold},
                {"maximizer", r.maximizer},
                {"supremum", to_json(r.supremum, false)},
                {"outcome", to_string(r.outcome)},
                {"region_sites", r.region_sites}};
}

inline Json to_json(const MobilityEdgeCheck& c)
{
    Json st = Json::array();
    for (auto s : c.status) st.push_back(to_string(s));
    return Json{{"variant", to_string(c.variant)},
                {"dimension", c.dimension},
                {"B", c.B},
                {"exponent", c.exponent},
                {"bounds", c.bounds},
                {"status", st},
                {"inconsistent_with_mobility_edge", c.inconsistent_with_mobility_edge}};
}

inline Json to_json(const OffAxisScan& s)
{
    Json est = Json::array();
    for (const auto& e : s.estimates) est.push_back(to_json(e, false));
    return Json{{"etas", s.etas},
                {"estimates", est},
                {"max_value", num(s.max_value)},
                {"argmax_eta", s.argmax_eta},
                {"attained_near_zero", s.attained_near_zero}};
}

inline Json to_json(const ProbabilityEstimate& p)
{
    return Json{{"value", p.value}, {"ci_low", p.ci_low}, {"ci_high", p.ci_high}, {"hits", p.hits}, {"n", p.n}};
}

inline Json to_json(const DosConditionReport& r)
{
    return Json{{"E", r.probe.E},
                {"delta_L", r.probe.delta_L},
                {"P_L", r.probe.P_L},
                {"L", r.probe.L},
                {"beta", r.probe.beta},
                {"xi", r.probe.xi},
                {"dimension", r.dimension},
                {"probability", to_json(r.probability)},
                {"passes", r.passes},
                {"scaling_parameters_valid", r.scaling_parameters_valid}};
}

inline Json to_json(const LifschitzReport& r)
{
    return Json{{"dimension", r.dimension},
                {"L", r.L},
                {"delta_E", r.delta_E},
                {"e0_convention", r.e0_convention},
                {"e0_literal", r.e0_literal},
                {"probability", to_json(r.probability)},
                {"reference_bound", r.reference_bound},
                {"reference_bound_note", "unit constant, indicative only"}};
}

}  // namespace anderson
