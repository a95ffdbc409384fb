#pragma once

// Plain-text "key = value" configuration with a fixed schema. Lines starting
// with '#' are comments; later assignments override earlier ones.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "anderson/criteria.hpp"
#include "anderson/disorder.hpp"
#include "anderson/format.hpp"
#include "anderson/lattice.hpp"
#include "anderson/moments.hpp"
#include "anderson/operator.hpp"

namespace anderson {

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ValueType { string, real, integer, seed, real_list, int_list, region, site, density };

struct KeySpec {
    std::string_view key;
    ValueType type;
    std::string_view description;
};

inline const std::vector<KeySpec>& config_schema()
{
    static const std::vector<KeySpec> schema = {
        {"disorder.kind", ValueType::string, "uniform | tabulated (default uniform)"},
        {"disorder.lambda", ValueType::real, "coupling lambda > 0 (default 1)"},
        {"disorder.support", ValueType::real_list, "uniform support 'a, b' (default -0.5, 0.5)"},
        {"disorder.density", ValueType::density, "tabulated density nodes 'x:p, x:p, ...' (piecewise linear)"},
        {"disorder.density_file", ValueType::string, "file with two columns x p for a tabulated density"},
        {"disorder.seed", ValueType::seed, "master seed (default 1)"},
        {"operator.convention", ValueType::string, "hopping_only | with_diagonal (default hopping_only)"},
        {"resolvent.direct_max_sites", ValueType::integer, "largest region solved by sparse LU (default 20000)"},
        {"resolvent.dense_max_sites", ValueType::integer, "largest region solved densely (default 64)"},
        {"region", ValueType::region, "'box: {d: 1, L: 0}' or 'sites: (0,0) (1,0)'"},
        {"moments.samples", ValueType::integer, "realizations per estimate (default 2000)"},
        {"moments.blocks", ValueType::integer, "median-of-means blocks (default 20)"},
        {"moments.s", ValueType::real, "fractional exponent in (0,1) (default 1/3)"},
        {"moments.energy", ValueType::real, "energy E (default 0)"},
        {"moments.eta", ValueType::real, "imaginary part eta (default 0)"},
        {"moments.x", ValueType::site, "source site x (default origin)"},
        {"moments.y", ValueType::site, "target site y (default origin)"},
        {"moments.threads", ValueType::integer, "worker threads per estimate (default 1)"},
        {"criteria.theorem", ValueType::string, "1 | 2 | single-site (default 1)"},
        {"criteria.Cs", ValueType::real, "constant C_s (default 1)"},
        {"criteria.Ctilde_s", ValueType::real, "constant C~_s (default 1)"},
        {"criteria.constants_source", ValueType::string, "where the constants come from; required to report 'certified'"},
        {"criteria.strategy", ValueType::string, "auto | exhaustive | subboxes (default auto)"},
        {"criteria.max_exhaustive_sites", ValueType::integer, "exhaustive subset limit (default 16)"},
        {"criteria.d", ValueType::integer, "dimension for the single-site test (default: region dimension)"},
        {"scan.lambda", ValueType::real_list, "lambda grid"},
        {"scan.energy", ValueType::real_list, "energy grid"},
        {"scan.s", ValueType::real_list, "s grid (default moments.s)"},
        {"scan.L", ValueType::int_list, "box half-widths L, region [-L, L]^d (default 0)"},
        {"scan.d", ValueType::integer, "dimension d (default 1)"},
        {"scan.csv", ValueType::string, "phase table CSV path (default scan.csv)"},
        {"scan.json", ValueType::string, "summary JSON path (default: the CSV path with a .json extension)"},
        {"scan.checkpoint", ValueType::string, "checkpoint path (default <csv>.ckpt)"},
        {"scan.threads", ValueType::integer, "concurrent cells (default 1; env ANDERSON_CERTIFY_THREADS overrides)"},
        {"scan.max_new_cells", ValueType::integer, "stop after this many newly computed cells (0 = no limit)"},
        {"spectra.realizations", ValueType::integer, "realizations for spectra (default 200)"},
        {"spectra.window_fraction", ValueType::real, "central fraction of levels for gap ratios (default 0.5)"},
        {"spectra.delta", ValueType::real, "delta_L for the density-of-states probe (optional)"},
        {"spectra.P", ValueType::real, "P_L threshold for the density-of-states probe (default 0.1)"},
        {"spectra.lifschitz_delta", ValueType::real, "Delta E for the Lifschitz probe (optional)"},
        {"spectra.format", ValueType::string, "csv | binary (default csv)"},
        {"spectra.out_dir", ValueType::string, "directory for per-realization eigenvalue files (optional)"},
        {"analysis.B", ValueType::real, "power-law constant B (default 1)"},
        {"analysis.B1", ValueType::real, "finite-volume mobility-edge constant (default 1)"},
        {"analysis.B2", ValueType::real, "bulk mobility-edge constant (default 1)"},
        {"analysis.L_o", ValueType::integer, "smallest admissible L (default 4)"},
        {"analysis.L", ValueType::int_list, "L values for test-powerlaw (default 4)"},
        {"analysis.variant", ValueType::string, "finite_volume | infinite_volume_proxy (default finite_volume)"},
        {"analysis.eta", ValueType::real_list, "eta grid for scan-eta (default 0, 0.1, 1, 10)"},
        {"analysis.max_distance", ValueType::integer, "largest distance in fit-decay series (default 10)"},
    };
    return schema;
}

inline const KeySpec* find_key(std::string_view key)
{
    for (const auto& k : config_schema()) {
        if (k.key == key) return &k;
    }
    return nullptr;
}

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Parses "box: {d: 2, L: 3}" (also "box: {d=2, L=3}") or
/// "sites: (0,0) (1,0) (0,1)" (groups may also be separated by ';').
inline Region parse_region(const std::string& text)
{
    const std::string t = trim(text);
    static const std::regex box_re(R"(^box\s*:?\s*\{?\s*d\s*[:=]\s*(\d+)\s*,\s*L\s*[:=]\s*(\d+)\s*\}?\s*$)");
    std::smatch m;
    if (std::regex_match(t, m, box_re)) return Region::box(std::stoi(m[1]), std::stoi(m[2]));
    if (t.rfind("sites", 0) == 0) {
        std::string body = trim(t.substr(5));
        if (!body.empty() && body.front() == ':') body = trim(body.substr(1));
        std::vector<Site> sites;
        if (body.find('(') != std::string::npos) {
            static const std::regex group_re(R"(\(([^)]*)\))");
            for (auto it = std::sregex_iterator(body.begin(), body.end(), group_re); it != std::sregex_iterator(); ++it) {
                sites.push_back(parse_site((*it)[1]));
            }
        } else {
            std::stringstream ss(body);
            std::string part;
            while (std::getline(ss, part, ';')) {
                if (!trim(part).empty()) sites.push_back(parse_site(part));
            }
        }
        if (sites.empty()) throw ConfigError("region literal has no sites: '" + text + "'");
        return Region::from_sites(std::move(sites));
    }
    throw ConfigError("cannot parse region literal '" + text + "'");
}

/// "x:p, x:p, ..." nodes of a piecewise-linear density.
inline std::pair<std::vector<double>, std::vector<double>> parse_density(const std::string& text)
{
    std::vector<double> xs, ps;
    for (const auto& item : split_list(text)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("density node '" + item + "' is not of the form x:p");
        xs.push_back(parse_double(item.substr(0, colon)));
        ps.push_back(parse_double(item.substr(colon + 1)));
    }
    return {xs, ps};
}

class Config {
public:
    static Config parse(std::istream& is, const std::string& origin = "<config>")
    {
        Config c;
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const std::string t = trim(line);
            if (t.empty() || t.front() == '#') continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
            try {
                c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
            } catch (const std::exception& e) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
        return c;
    }

    static Config load(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path.string());
        return parse(in, path.string());
    }

    /// Validates against the schema before storing.
    void set(const std::string& key, const std::string& value)
    {
        const KeySpec* spec = find_key(key);
        if (!spec) throw ConfigError("unknown config key '" + key + "'");
        validate(*spec, value);
        values_[key] = value;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& entries() const { return values_; }

    std::string get_string(const std::string& key, const std::string& def = {}) const
    {
        auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }
    double get_double(const std::string& key, double def) const { return has(key) ? parse_double(values_.at(key)) : def; }
    long long get_int(const std::string& key, long long def) const { return has(key) ? std::stoll(values_.at(key)) : def; }
    std::uint64_t get_seed(const std::string& key, std::uint64_t def) const
    {
        return has(key) ? std::stoull(values_.at(key), nullptr, 0) : def;
    }
    std::vector<double> get_doubles(const std::string& key, std::vector<double> def = {}) const
    {
        return has(key) ? parse_double_list(values_.at(key)) : def;
    }
    std::vector<int> get_ints(const std::string& key, std::vector<int> def = {}) const
    {
        if (!has(key)) return def;
        std::vector<int> out;
        for (const auto& f : split_list(values_.at(key))) out.push_back(std::stoi(f));
        return out;
    }
    Region get_region(const std::string& key, const Region& def) const { return has(key) ? parse_region(values_.at(key)) : def; }
    Site get_site(const std::string& key, const Site& def) const { return has(key) ? parse_site(values_.at(key)) : def; }

private:
    static void validate(const KeySpec& spec, const std::string& v)
    {
        try {
            switch (spec.type) {
            case ValueType::string:
                if (v.empty()) throw ConfigError("empty value");
                break;
            case ValueType::real: parse_double(v); break;
            case ValueType::integer: {
                std::size_t pos = 0;
                std::stoll(v, &pos);
                if (pos != v.size()) throw ConfigError("not an integer");
                break;
            }
            case ValueType::seed: {
                std::size_t pos = 0;
                std::stoull(v, &pos, 0);
                if (pos != v.size() || v.front() == '-') throw ConfigError("not an unsigned integer");
                break;
            }
            case ValueType::real_list: parse_double_list(v); break;
            case ValueType::int_list:
                for (const auto& f : split_list(v)) {
                    std::size_t pos = 0;
                    std::stoi(f, &pos);
                    if (pos != f.size()) throw ConfigError("not an integer: " + f);
                }
                break;
            case ValueType::region: parse_region(v); break;
            case ValueType::site: parse_site(v); break;
            case ValueType::density: parse_density(v); break;
            }
        } catch (const std::exception& e) {
            throw ConfigError("invalid value '" + v + "' for " + std::string(spec.key) + ": " + e.what());
        }
    }

    std::map<std::string, std::string> values_;
};

inline std::pair<std::vector<double>, std::vector<double>> read_density_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open density file " + path);
    std::vector<double> xs, ps;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto f = split_list(t);
        if (f.size() != 2) throw ConfigError("density file lines need two columns: '" + t + "'");
        xs.push_back(parse_double(f[0]));
        ps.push_back(parse_double(f[1]));
    }
    return {xs, ps};
}

inline DisorderModel disorder_from_config(const Config& c)
{
    const double lambda = c.get_double("disorder.lambda", 1.0);
    const std::string kind = c.get_string("disorder.kind", "uniform");
    if (kind == "uniform") {
        const auto sup = c.get_doubles("disorder.support", {-0.5, 0.5});
        if (sup.size() != 2) throw ConfigError("disorder.support needs two values");
        return DisorderModel::uniform(sup[0], sup[1], lambda);
    }
    if (kind == "tabulated") {
        std::pair<std::vector<double>, std::vector<double>> nodes;
        if (c.has("disorder.density")) {
            nodes = parse_density(c.get_string("disorder.density"));
        } else if (c.has("disorder.density_file")) {
            nodes = read_density_file(c.get_string("disorder.density_file"));
        } else {
            throw ConfigError("tabulated disorder needs disorder.density or disorder.density_file");
        }
        return DisorderModel::tabulated(nodes.first, nodes.second, lambda);
    }
    throw ConfigError("unknown disorder.kind '" + kind + "'");
}

inline EstimatorOptions estimator_from_config(const Config& c)
{
    EstimatorOptions o;
    o.n_blocks = static_cast<std::size_t>(c.get_int("moments.blocks", 20));
    o.convention = parse_convention(c.get_string("operator.convention", "hopping_only"));
    o.solver.direct_max_sites = static_cast<std::size_t>(c.get_int("resolvent.direct_max_sites", 20000));
    o.solver.dense_max_sites = static_cast<std::size_t>(c.get_int("resolvent.dense_max_sites", 64));
    o.threads = static_cast<unsigned>(std::max<long long>(1, c.get_int("moments.threads", 1)));
    return o;
}

inline CriterionConstants constants_from_config(const Config& c)
{
    CriterionConstants k;
    k.C_s = c.get_double("criteria.Cs", 1.0);
    k.C_tilde_s = c.get_double("criteria.Ctilde_s", 1.0);
    k.s = c.get_double("moments.s", 1.0 / 3.0);
    k.source = c.get_string("criteria.constants_source");
    if (!(k.C_s > 0) || !(k.C_tilde_s > 0)) throw ConfigError("criterion constants must be positive");
    return k;
}

inline SubsetStrategy strategy_from_config(const Config& c, const Region& region)
{
    const auto limit = static_cast<std::size_t>(c.get_int("criteria.max_exhaustive_sites", 16));
    const std::string s = c.get_string("criteria.strategy", "auto");
    SubsetStrategy st = SubsetStrategy::automatic(region, limit);
    if (s == "exhaustive") {
        st.kind = SubsetStrategy::Kind::exhaustive;
    } else if (s == "subboxes") {
        st.kind = SubsetStrategy::Kind::subboxes;
    } else if (s != "auto") {
        throw ConfigError("unknown criteria.strategy '" + s + "'");
    }
    return st;
}

}  // namespace anderson
