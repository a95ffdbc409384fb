// anderson-certify: command-line front end for the localization toolkit.
//
// Every subcommand reads a key = value config (--config) and accepts
// --set key=value overrides. JSON results go to stdout or --out.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anderson/anderson.hpp"

namespace {

using namespace anderson;

enum ExitCode : int {
    ok = 0,
    error = 1,
    not_certified = 2,
    inconclusive = 3,
    withheld = 4,
    cells_failed = 5,
};

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_path;
};

void add_common(CLI::App* sub, Common& c)
{
    sub->add_option("--config", c.config_path, "key = value configuration file")->required();
    sub->add_option("--set", c.overrides, "override a config entry, key=value (repeatable)");
    sub->add_option("--out", c.out_path, "write JSON here instead of stdout");
}

Config load(const Common& c)
{
    Config cfg = Config::load(c.config_path);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    return cfg;
}

void emit(const Common& c, const Json& j)
{
    const std::string text = j.dump(2) + "\n";
    if (c.out_path.empty()) {
        std::cout << text;
    } else {
        write_text_file(c.out_path, text);
    }
}

Region region_of(const Config& cfg) { return cfg.get_region("region", Region::box(1, 0)); }

std::size_t samples_of(const Config& cfg) { return static_cast<std::size_t>(cfg.get_int("moments.samples", 2000)); }

int cmd_estimate_moment(const Common& common)
{
    const Config cfg = load(common);
    const auto model = disorder_from_config(cfg);
    const Region region = region_of(cfg);
    const Site o = origin(region.dimension());
    MomentQuery q{region, cfg.get_site("moments.x", o), cfg.get_site("moments.y", o),
                  {cfg.get_double("moments.energy", 0.0), cfg.get_double("moments.eta", 0.0)},
                  cfg.get_double("moments.s", 1.0 / 3.0), std::nullopt};
    const auto seed = cfg.get_seed("disorder.seed", 1);
    const auto est = estimate_moment(model, q, samples_of(cfg), seed, estimator_from_config(cfg));
    Json j = to_json(est);
    j["x"] = q.x;
    j["y"] = q.y;
    j["E"] = q.z.E;
    j["eta"] = q.z.eta;
    j["s"] = q.s;
    j["lambda"] = model.coupling();
    j["model"] = model.id();
    j["seed"] = seed;
    emit(common, j);
    return ok;
}

struct CheckFlags {
    std::optional<std::string> theorem;
    std::optional<double> lambda, energy, s, Cs, Ctilde;
    std::optional<std::string> region, constants_source;
    std::optional<std::uint64_t> seed;
    std::optional<long long> samples;
};

int cmd_check_criterion(const Common& common, const CheckFlags& f)
{
    Config cfg = load(common);
    if (f.theorem) cfg.set("criteria.theorem", *f.theorem);
    if (f.lambda) cfg.set("disorder.lambda", format_double(*f.lambda));
    if (f.energy) cfg.set("moments.energy", format_double(*f.energy));
    if (f.s) cfg.set("moments.s", format_double(*f.s));
    if (f.Cs) cfg.set("criteria.Cs", format_double(*f.Cs));
    if (f.Ctilde) cfg.set("criteria.Ctilde_s", format_double(*f.Ctilde));
    if (f.region) cfg.set("region", *f.region);
    if (f.constants_source) cfg.set("criteria.constants_source", *f.constants_source);
    if (f.seed) cfg.set("disorder.seed", std::to_string(*f.seed));
    if (f.samples) cfg.set("moments.samples", std::to_string(*f.samples));

    const auto model = disorder_from_config(cfg);
    const Region region = region_of(cfg);
    const auto constants = constants_from_config(cfg);
    const auto which = parse_criterion(cfg.get_string("criteria.theorem", "1"));
    const SpectralPoint z{cfg.get_double("moments.energy", 0.0), cfg.get_double("moments.eta", 0.0)};
    const auto report = evaluate_criterion(which, model, region, z, constants, strategy_from_config(cfg, region),
                                           samples_of(cfg), cfg.get_seed("disorder.seed", 1), estimator_from_config(cfg));
    Json j = to_json(report);
    if (report.verdict == Verdict::certified && constants.source.empty()) {
        j["verdict"] = "withheld";
        j["withheld_reason"] = "no constants source given; pass --constants-source to report a certified verdict";
        emit(common, j);
        return withheld;
    }
    emit(common, j);
    switch (report.verdict) {
    case Verdict::certified: return ok;
    case Verdict::not_certified: return not_certified;
    default: return inconclusive;
    }
}

int cmd_scan(const Common& common)
{
    const ScanConfig cfg = ScanConfig::from_config(load(common));
    const auto cells = run_scan(cfg);
    emit_phase_table(cfg, cells);
    const Json summary = phase_summary(cfg, cells);
    std::cerr << "scan: " << cells.size() << " cells, counts " << summary["counts"].dump() << " -> " << cfg.csv_path
              << "\n";
    return summary["counts"]["failed"].get<std::size_t>() > 0 ? cells_failed : ok;
}

int cmd_spectra(const Common& common)
{
    const Config cfg = load(common);
    const auto model = disorder_from_config(cfg);
    const Region region = region_of(cfg);
    const auto conv = parse_convention(cfg.get_string("operator.convention", "hopping_only"));
    const auto seed = cfg.get_seed("disorder.seed", 1);
    const auto n = static_cast<std::size_t>(cfg.get_int("spectra.realizations", 200));
    const double fraction = cfg.get_double("spectra.window_fraction", 0.5);
    const std::string format = cfg.get_string("spectra.format", "csv");
    const std::string out_dir = cfg.get_string("spectra.out_dir");
    if (format != "csv" && format != "binary") throw ConfigError("spectra.format must be csv or binary");
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    std::vector<double> ratios;
    for (std::size_t r = 0; r < n; ++r) {
        const auto h = assemble(region, sample_realization(model, region, seed, r), conv);
        const Eigen::VectorXd eig = spectrum(h);
        const auto [a, b] = central_window(eig, fraction);
        ratios.push_back(gap_ratio_mean(std::vector<double>(eig.data(), eig.data() + eig.size()), a, b));
        if (!out_dir.empty()) {
            const auto base = std::filesystem::path(out_dir) / ("eigenvalues_" + std::to_string(r));
            if (format == "csv") {
                std::ofstream out(base.string() + ".csv");
                out << "eigenvalue\n";
                for (Eigen::Index k = 0; k < eig.size(); ++k) out << format_double(eig[k]) << '\n';
            } else {
                std::ofstream out(base.string() + ".f64", std::ios::binary);
                out.write(reinterpret_cast<const char*>(eig.data()), static_cast<std::streamsize>(eig.size() * sizeof(double)));
            }
        }
    }
    double mean = 0.0;
    for (double v : ratios) mean += v;
    mean /= static_cast<double>(ratios.size());
    double var = 0.0;
    for (double v : ratios) var += (v - mean) * (v - mean);
    const double se = ratios.size() > 1 ? std::sqrt(var / static_cast<double>(ratios.size() - 1) / static_cast<double>(ratios.size())) : 0.0;

    Json j;
    j["region_sites"] = region.size();
    j["realizations"] = n;
    j["window_fraction"] = fraction;
    j["gap_ratio_mean"] = mean;
    j["gap_ratio_se"] = se;
    j["poisson_reference"] = 2.0 * std::log(2.0) - 1.0;
    j["lambda"] = model.coupling();
    j["model"] = model.id();
    const int d = region.dimension();
    const int L = region.bounds().second[0];  // probes use the box [-L, L]^d
    if (cfg.has("spectra.delta")) {
        DosProbe probe;
        probe.E = cfg.get_double("moments.energy", 0.0);
        probe.delta_L = cfg.get_double("spectra.delta", 0.1);
        probe.P_L = cfg.get_double("spectra.P", 0.1);
        probe.L = L;
        j["dos_condition"] = to_json(dos_condition_probability(model, d, probe, n, seed, conv));
    }
    if (cfg.has("spectra.lifschitz_delta")) {
        j["lifschitz"] = to_json(lifschitz_probe(model, d, L, cfg.get_double("spectra.lifschitz_delta", 0.1), n, seed, conv));
    }
    emit(common, j);
    return ok;
}

struct FitFlags {
    std::string input_csv;
    std::string series_csv;
};

int cmd_fit_decay(const Common& common, const FitFlags& f)
{
    if (!f.input_csv.empty()) {
        std::ifstream in(f.input_csv);
        if (!in) throw ConfigError("cannot open " + f.input_csv);
        const auto series = parse_decay_series_csv(in);
        Json j;
        j["series"] = to_json(series);
        j["fit"] = to_json(fit_exponential(series));
        emit(common, j);
        return ok;
    }
    const Config cfg = load(common);
    const auto model = disorder_from_config(cfg);
    const Region region = region_of(cfg);
    const Site x = cfg.get_site("moments.x", origin(region.dimension()));
    const int max_d = static_cast<int>(cfg.get_int("analysis.max_distance", 10));
    std::vector<Site> targets;
    for (const auto& y : region.sites()) {
        const int dist = distance1(x, y);
        if (dist >= 1 && dist <= max_d) targets.push_back(y);
    }
    if (targets.size() < 3) throw ConfigError("fit-decay needs at least 3 target sites within analysis.max_distance");
    const SpectralPoint z{cfg.get_double("moments.energy", 0.0), cfg.get_double("moments.eta", 0.0)};
    const auto series = decay_series(model, region, x, targets, z, cfg.get_double("moments.s", 1.0 / 3.0),
                                     samples_of(cfg), cfg.get_seed("disorder.seed", 1), estimator_from_config(cfg));
    if (!f.series_csv.empty()) write_text_file(f.series_csv, decay_series_csv(series));
    Json j;
    j["series"] = to_json(series);
    j["fit"] = to_json(fit_exponential(series));
    emit(common, j);
    return ok;
}

int cmd_test_powerlaw(const Common& common)
{
    const Config cfg = load(common);
    const auto model = disorder_from_config(cfg);
    const int d = static_cast<int>(cfg.get_int("scan.d", cfg.get_int("criteria.d", 1)));
    const auto variant = parse_power_law_variant(cfg.get_string("analysis.variant", "finite_volume"));
    const double B = cfg.get_double("analysis.B", 1.0);
    const int L_o = static_cast<int>(cfg.get_int("analysis.L_o", 4));
    const double E = cfg.get_double("moments.energy", 0.0);
    const double s = cfg.get_double("moments.s", 1.0 / 3.0);
    const auto seed = cfg.get_seed("disorder.seed", 1);
    const auto opt = estimator_from_config(cfg);

    Json tests = Json::array();
    std::vector<ShellPoint> shells;
    for (int L : cfg.get_ints("analysis.L", {4})) {
        const auto rep = power_law_test(model, d, E, L, s, variant, B, samples_of(cfg), seed, opt, L_o);
        tests.push_back(to_json(rep));
        shells.push_back({L, rep.supremum});
    }
    Json j;
    j["tests"] = tests;
    j["mobility_edge"] =
        to_json(mobility_edge_bound_check(shells, d, cfg.get_double("analysis.B1", 1.0), cfg.get_double("analysis.B2", 1.0), variant));
    j["note"] = "B, B1, B2 and L_o are user-supplied; outcomes are conditional on them";
    emit(common, j);
    return ok;
}

int cmd_scan_eta(const Common& common)
{
    const Config cfg = load(common);
    const auto model = disorder_from_config(cfg);
    const Region region = region_of(cfg);
    const Site o = origin(region.dimension());
    const auto scan = off_axis_scan(model, region, cfg.get_site("moments.x", o), cfg.get_site("moments.y", o),
                                    cfg.get_double("moments.energy", 0.0), cfg.get_doubles("analysis.eta", {0.0, 0.1, 1.0, 10.0}),
                                    cfg.get_double("moments.s", 1.0 / 3.0), samples_of(cfg), cfg.get_seed("disorder.seed", 1),
                                    estimator_from_config(cfg));
    emit(common, to_json(scan));
    return ok;
}

std::string schema_text()
{
    std::string out = "Config keys:\n";
    for (const auto& k : config_schema()) {
        out += "  " + std::string(k.key) + std::string(k.key.size() < 30 ? 30 - k.key.size() : 1, ' ') +
               std::string(k.description) + "\n";
    }
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Fractional-moment localization criteria for random lattice operators", "anderson-certify"};
    app.set_version_flag("--version", std::string(kVersion));
    app.footer(schema_text());
    app.require_subcommand(1);

    Common c_est, c_chk, c_scan, c_spec, c_fit, c_pl, c_eta;
    CheckFlags flags;

    auto* est = app.add_subcommand("estimate-moment", "E|<x|(H-z)^-1|y>|^s by median of means");
    add_common(est, c_est);
    auto* chk = app.add_subcommand("check-criterion", "evaluate a finite-volume criterion (exit 0/2/3/4)");
    add_common(chk, c_chk);
    chk->add_option("--theorem", flags.theorem, "1, 2 or single-site");
    chk->add_option("--lambda", flags.lambda, "disorder coupling");
    chk->add_option("--energy", flags.energy, "energy E");
    chk->add_option("--s", flags.s, "fractional exponent");
    chk->add_option("--Cs", flags.Cs, "constant C_s");
    chk->add_option("--Ctilde", flags.Ctilde, "constant C~_s");
    chk->add_option("--region", flags.region, "region literal");
    chk->add_option("--constants-source", flags.constants_source, "provenance of the constants");
    chk->add_option("--seed", flags.seed, "disorder seed");
    chk->add_option("--samples", flags.samples, "realizations");
    auto* scan = app.add_subcommand("scan", "sweep a (lambda, E, s, L) grid into a phase table");
    add_common(scan, c_scan);
    auto* spec = app.add_subcommand("spectra", "gap-ratio statistics and density-of-states probes");
    add_common(spec, c_spec);
    auto* fit = app.add_subcommand("fit-decay", "fit exponential decay of moments in the distance");
    add_common(fit, c_fit);
    FitFlags fit_flags;
    fit->add_option("--input", fit_flags.input_csv, "fit a distance,moment,ci_low,ci_high CSV instead of sampling");
    fit->add_option("--series-csv", fit_flags.series_csv, "also write the sampled series as CSV");
    auto* pl = app.add_subcommand("test-powerlaw", "shell suprema against B / L^k and mobility-edge bounds");
    add_common(pl, c_pl);
    auto* eta = app.add_subcommand("scan-eta", "moments along E + i eta");
    add_common(eta, c_eta);

    CLI11_PARSE(app, argc, argv);

    try {
        if (est->parsed()) return cmd_estimate_moment(c_est);
        if (chk->parsed()) return cmd_check_criterion(c_chk, flags);
        if (scan->parsed()) return cmd_scan(c_scan);
        if (spec->parsed()) return cmd_spectra(c_spec);
        if (fit->parsed()) return cmd_fit_decay(c_fit, fit_flags);
        if (pl->parsed()) return cmd_test_powerlaw(c_pl);
        if (eta->parsed()) return cmd_scan_eta(c_eta);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return error;
    }
    return error;
}
