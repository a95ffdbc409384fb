#pragma once

// Parameter sweeps over (lambda, E, s, L) with a JSONL checkpoint, so a scan
// can be interrupted at any cell boundary and resumed with identical output.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "anderson/config.hpp"
#include "anderson/criteria.hpp"
#include "anderson/report.hpp"
#include "anderson/rng.hpp"

namespace anderson {

/// One criterion evaluation; shared by `scan` and `check-criterion` so that a
/// cell and a standalone check at the same seed produce the same report.
inline CriterionReport evaluate_criterion(Criterion which, const DisorderModel& model, const Region& region,
                                          const SpectralPoint& z, const CriterionConstants& c,
                                          const SubsetStrategy& strategy, std::size_t n_samples, std::uint64_t seed,
                                          const EstimatorOptions& opt)
{
    switch (which) {
    case Criterion::single_site: return single_site_test(model, region.dimension(), z.E, c);
    case Criterion::theorem1: return theorem1_lhs(model, region, z, c, n_samples, seed, opt);
    default: return theorem2_lhs(model, region, z, c, strategy, n_samples, seed, opt);
    }
}

struct ScanConfig {
    std::vector<double> lambdas;
    std::vector<double> energies;
    std::vector<double> s_values;
    std::vector<int> Ls;
    int d = 1;
    DisorderModel model = DisorderModel::uniform(-0.5, 0.5, 1.0);
    CriterionConstants constants;
    Criterion theorem = Criterion::theorem1;
    std::string strategy = "auto";
    std::size_t max_exhaustive_sites = 16;
    std::size_t n_samples = 2000;
    EstimatorOptions estimator;
    double eta = 0.0;
    std::uint64_t master_seed = 1;
    std::string csv_path = "scan.csv";
    std::string json_path = "scan.json";
    std::string checkpoint_path;
    unsigned threads = 1;
    std::size_t max_new_cells = 0;  // 0: run to completion
    std::map<std::string, std::string> echo;  // the validated key/value pairs

    static ScanConfig from_config(const Config& c)
    {
        ScanConfig s;
        for (const char* key : {"scan.lambda", "scan.energy"}) {
            if (!c.has(key)) throw ConfigError(std::string("scan requires '") + key + "'");
        }
        s.lambdas = c.get_doubles("scan.lambda");
        s.energies = c.get_doubles("scan.energy");
        s.s_values = c.get_doubles("scan.s", {c.get_double("moments.s", 1.0 / 3.0)});
        s.Ls = c.get_ints("scan.L", {0});
        s.d = static_cast<int>(c.get_int("scan.d", 1));
        s.model = disorder_from_config(c);
        s.constants = constants_from_config(c);
        s.theorem = parse_criterion(c.get_string("criteria.theorem", "1"));
        s.strategy = c.get_string("criteria.strategy", "auto");
        s.max_exhaustive_sites = static_cast<std::size_t>(c.get_int("criteria.max_exhaustive_sites", 16));
        s.n_samples = static_cast<std::size_t>(c.get_int("moments.samples", 2000));
        s.estimator = estimator_from_config(c);
        s.eta = c.get_double("moments.eta", 0.0);
        s.master_seed = c.get_seed("disorder.seed", 1);
        s.csv_path = c.get_string("scan.csv", "scan.csv");
        s.json_path = c.get_string("scan.json", std::filesystem::path(s.csv_path).replace_extension(".json").string());
        s.checkpoint_path = c.get_string("scan.checkpoint", s.csv_path + ".ckpt");
        s.threads = static_cast<unsigned>(std::max<long long>(1, c.get_int("scan.threads", 1)));
        s.max_new_cells = static_cast<std::size_t>(std::max<long long>(0, c.get_int("scan.max_new_cells", 0)));
        if (const char* env = std::getenv("ANDERSON_CERTIFY_THREADS")) {
            const int t = std::atoi(env);
            if (t > 0) s.threads = static_cast<unsigned>(t);
        }
        s.echo = c.entries();
        s.validate();
        return s;
    }

    void validate() const
    {
        if (d < 1) throw ConfigError("scan.d must be >= 1");
        if (constants.source.empty()) {
            throw ConfigError("scan requires criteria.constants_source (where C_s / C~_s come from)");
        }
        for (double l : lambdas) {
            if (!(l > 0) || !std::isfinite(l)) throw ConfigError("scan.lambda values must be positive and finite");
        }
        for (double e : energies) {
            if (!std::isfinite(e)) throw ConfigError("scan.energy values must be finite");
        }
        for (double s : s_values) {
            if (!(s > 0 && s < 1)) throw ConfigError("scan.s values must lie in (0, 1)");
        }
        for (int L : Ls) {
            if (L < 0) throw ConfigError("scan.L values must be >= 0");
        }
        if (eta < 0) throw ConfigError("moments.eta must be >= 0");
        if (theorem != Criterion::single_site) {
            try {
                check_budget(n_samples, estimator.n_blocks);
            } catch (const std::exception& e) {
                throw ConfigError(std::string("sampling budget: ") + e.what());
            }
        }
        if (strategy != "auto" && strategy != "exhaustive" && strategy != "subboxes") {
            throw ConfigError("unknown criteria.strategy '" + strategy + "'");
        }
    }

    /// Identifies the computation; run-control keys do not participate.
    std::string fingerprint() const
    {
        std::uint64_t h = rng::mix64(0x5ca1ab1eULL);
        for (const auto& [k, v] : echo) {
            if (k == "scan.threads" || k == "scan.max_new_cells" || k == "moments.threads" || k == "scan.csv" ||
                k == "scan.json" || k == "scan.checkpoint") {
                continue;
            }
            for (char ch : k + "=" + v + ";") h = rng::combine(h, static_cast<unsigned char>(ch));
        }
        std::ostringstream os;
        os << std::hex << h;
        return os.str();
    }

    SubsetStrategy subset_strategy(const Region& region) const
    {
        SubsetStrategy st = SubsetStrategy::automatic(region, max_exhaustive_sites);
        if (strategy == "exhaustive") st.kind = SubsetStrategy::Kind::exhaustive;
        if (strategy == "subboxes") st.kind = SubsetStrategy::Kind::subboxes;
        return st;
    }
};

enum class CellStatus { done, failed, pending };

inline std::string to_string(CellStatus s)
{
    switch (s) {
    case CellStatus::done: return "done";
    case CellStatus::failed: return "failed";
    default: return "pending";
    }
}

struct ScanCell {
    std::size_t index = 0;
    double lambda = 0.0;
    double E = 0.0;
    double s = 0.0;
    int L = 0;
    Criterion theorem = Criterion::theorem1;
    std::uint64_t seed = 0;
    CellStatus status = CellStatus::pending;
    Json report;  // CriterionReport as JSON when done
    std::string error;
    double wall_seconds = 0.0;
};

/// hash(master_seed, cell coordinates): refining a grid leaves existing cells' streams untouched.
inline std::uint64_t cell_seed(std::uint64_t master_seed, double lambda, double E, double s, int L, Criterion theorem)
{
    std::uint64_t h = rng::derive(master_seed, 0x5ca7ULL);
    h = rng::hash_double(h, lambda);
    h = rng::hash_double(h, E);
    h = rng::hash_double(h, s);
    h = rng::combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(L)));
    h = rng::combine(h, static_cast<std::uint64_t>(theorem));
    return h;
}

/// Grid cells in lambda-major order (lambda, E, s, L).
inline std::vector<ScanCell> scan_cells(const ScanConfig& cfg)
{
    std::vector<ScanCell> cells;
    for (double lambda : cfg.lambdas) {
        for (double E : cfg.energies) {
            for (double s : cfg.s_values) {
                for (int L : cfg.Ls) {
                    ScanCell c;
                    c.index = cells.size();
                    c.lambda = lambda;
                    c.E = E;
                    c.s = s;
                    c.L = L;
                    c.theorem = cfg.theorem;
                    c.seed = cell_seed(cfg.master_seed, lambda, E, s, L, cfg.theorem);
                    cells.push_back(std::move(c));
                }
            }
        }
    }
    return cells;
}

inline CriterionReport evaluate_cell(const ScanConfig& cfg, const ScanCell& cell)
{
    const DisorderModel model = cfg.model.with_coupling(cell.lambda);
    CriterionConstants c = cfg.constants;
    c.s = cell.s;
    const Region region = Region::box(cfg.d, cell.L);
    return evaluate_criterion(cfg.theorem, model, region, {cell.E, cfg.eta}, c, cfg.subset_strategy(region),
                              cfg.n_samples, cell.seed, cfg.estimator);
}

namespace detail {

inline Json checkpoint_record(const ScanCell& c)
{
    Json j;
    j["cell"] = c.index;
    j["lambda"] = c.lambda;
    j["E"] = c.E;
    j["s"] = c.s;
    j["L"] = c.L;
    j["seed"] = c.seed;
    j["status"] = to_string(c.status);
    j["wall_seconds"] = c.wall_seconds;
    if (c.status == CellStatus::done) j["report"] = c.report;
    if (!c.error.empty()) j["error"] = c.error;
    return j;
}

/// Loads completed cells from the checkpoint; a malformed trailing line (an
/// interrupted write) is ignored. Returns false if there is no checkpoint.
inline bool load_checkpoint(const std::string& path, const std::string& fingerprint, std::vector<ScanCell>& cells)
{
    std::ifstream in(path);
    if (!in) return false;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error&) {
            continue;  // only a torn final write can produce this
        }
        if (!header) {
            if (!j.contains("fingerprint") || j["fingerprint"] != fingerprint) {
                throw ConfigError("checkpoint " + path + " belongs to a different configuration");
            }
            header = true;
            continue;
        }
        const auto idx = j.at("cell").get<std::size_t>();
        if (idx >= cells.size()) throw ConfigError("checkpoint " + path + " has a cell outside the grid");
        ScanCell& c = cells[idx];
        if (j.at("seed").get<std::uint64_t>() != c.seed || j.at("lambda").get<double>() != c.lambda ||
            j.at("E").get<double>() != c.E) {
            throw ConfigError("checkpoint " + path + " does not match the grid");
        }
        if (j.at("status") == "done") {
            c.status = CellStatus::done;
            c.report = j.at("report");
            c.error.clear();
        } else {
            c.status = CellStatus::failed;
            c.error = j.value("error", "");
        }
        c.wall_seconds = j.value("wall_seconds", 0.0);
    }
    return header;
}

}  // namespace detail

/// Evaluates every cell not already done in the checkpoint. Failed cells are
/// retried. Cells run concurrently; checkpoint appends go through one writer.
inline std::vector<ScanCell> run_scan(const ScanConfig& cfg)
{
    cfg.validate();
    std::vector<ScanCell> cells = scan_cells(cfg);
    const std::string fp = cfg.fingerprint();
    const bool resumed = !cfg.checkpoint_path.empty() && detail::load_checkpoint(cfg.checkpoint_path, fp, cells);

    std::ofstream ckpt;
    if (!cfg.checkpoint_path.empty()) {
        if (resumed) {
            // drop a torn trailing line before appending
            std::ifstream in(cfg.checkpoint_path);
            std::ostringstream good;
            std::string line;
            while (std::getline(in, line)) {
                if (Json::accept(line)) good << line << '\n';
            }
            in.close();
            ckpt.open(cfg.checkpoint_path, std::ios::trunc);
            ckpt << good.str();
        } else {
            ckpt.open(cfg.checkpoint_path, std::ios::trunc);
            ckpt << Json{{"fingerprint", fp}, {"version", kVersion}}.dump() << '\n';
        }
        ckpt.flush();
        if (!ckpt) throw std::runtime_error("cannot write checkpoint " + cfg.checkpoint_path);
    }

    std::vector<std::size_t> todo;
    for (const auto& c : cells) {
        if (c.status != CellStatus::done) todo.push_back(c.index);
    }
    if (cfg.max_new_cells > 0 && todo.size() > cfg.max_new_cells) todo.resize(cfg.max_new_cells);

    std::atomic<std::size_t> next{0};
    std::mutex writer;
    auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= todo.size()) return;
            ScanCell& cell = cells[todo[k]];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                cell.report = to_json(evaluate_cell(cfg, cell));
                cell.status = CellStatus::done;
                cell.error.clear();
            } catch (const std::exception& e) {
                cell.status = CellStatus::failed;
                cell.error = e.what();
                cell.report = Json();
            }
            cell.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::lock_guard<std::mutex> lock(writer);
            if (ckpt.is_open()) {
                ckpt << detail::checkpoint_record(cell).dump() << '\n';
                ckpt.flush();
                if (!ckpt) {
                    cell.status = CellStatus::failed;
                    cell.error = "checkpoint write failed";
                    ckpt.clear();
                }
            }
        }
    };
    const unsigned n_threads = std::max(1U, std::min<unsigned>(cfg.threads, static_cast<unsigned>(todo.size())));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return cells;
}

struct PhaseRow {
    double lambda = 0.0;
    double E = 0.0;
    double s = 0.0;
    int L = 0;
    std::string theorem;
    std::string lhs;  // empty for pending / failed cells
    std::string ci_low;
    std::string ci_high;
    std::string verdict;  // certified | not_certified | inconclusive | failed | pending
    std::string rigor;
    std::uint64_t seed = 0;
    bool operator==(const PhaseRow&) const = default;
};

inline constexpr const char* kPhaseHeader = "lambda,E,s,L,theorem,lhs,ci_low,ci_high,verdict,rigor,seed";

inline std::string json_number(const Json& j)
{
    return j.is_number() ? format_double(j.get<double>()) : std::string("nan");
}

inline PhaseRow phase_row(const ScanCell& c)
{
    PhaseRow r;
    r.lambda = c.lambda;
    r.E = c.E;
    r.s = c.s;
    r.L = c.L;
    r.theorem = to_string(c.theorem);
    r.seed = c.seed;
    r.verdict = to_string(c.status);
    if (c.status == CellStatus::done) {
        r.lhs = json_number(c.report.at("lhs"));
        r.ci_low = json_number(c.report.at("ci_low"));
        r.ci_high = json_number(c.report.at("ci_high"));
        r.verdict = c.report.at("verdict").get<std::string>();
        r.rigor = c.report.at("rigor").get<std::string>();
    }
    return r;
}

inline std::string phase_table_csv(const std::vector<ScanCell>& cells)
{
    std::ostringstream os;
    os << kPhaseHeader << '\n';
    for (const auto& c : cells) {
        const PhaseRow r = phase_row(c);
        os << format_double(r.lambda) << ',' << format_double(r.E) << ',' << format_double(r.s) << ',' << r.L << ','
           << r.theorem << ',' << r.lhs << ',' << r.ci_low << ',' << r.ci_high << ',' << r.verdict << ',' << r.rigor
           << ',' << r.seed << '\n';
    }
    return os.str();
}

inline std::vector<PhaseRow> parse_phase_table(const std::string& csv)
{
    std::istringstream is(csv);
    std::string line;
    if (!std::getline(is, line) || line != kPhaseHeader) throw std::invalid_argument("phase table: unexpected header");
    std::vector<PhaseRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() == 10) f.emplace_back();
        if (f.size() != 11) throw std::invalid_argument("phase table: expected 11 columns in '" + line + "'");
        PhaseRow r;
        r.lambda = parse_double(f[0]);
        r.E = parse_double(f[1]);
        r.s = parse_double(f[2]);
        r.L = std::stoi(f[3]);
        r.theorem = f[4];
        r.lhs = f[5];
        r.ci_low = f[6];
        r.ci_high = f[7];
        r.verdict = f[8];
        r.rigor = f[9];
        r.seed = std::stoull(f[10]);
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Counts by verdict (failed and pending included), config echo and version.
/// Timings are left out so that the file is reproducible.
inline Json phase_summary(const ScanConfig& cfg, const std::vector<ScanCell>& cells)
{
    std::map<std::string, std::size_t> counts{
        {"certified", 0}, {"not_certified", 0}, {"inconclusive", 0}, {"failed", 0}, {"pending", 0}};
    Json rows = Json::array();
    for (const auto& c : cells) {
        ++counts[phase_row(c).verdict];
        Json j{{"lambda", c.lambda}, {"E", c.E}, {"s", c.s}, {"L", c.L}, {"seed", c.seed}, {"status", to_string(c.status)}};
        if (c.status == CellStatus::done) j["report"] = c.report;
        if (c.status == CellStatus::failed) j["error"] = c.error;
        rows.push_back(std::move(j));
    }
    Json echo = Json::object();
    for (const auto& [k, v] : cfg.echo) {
        if (k != "scan.threads" && k != "scan.max_new_cells") echo[k] = v;
    }
    Json j;
    j["version"] = kVersion;
    j["config"] = echo;
    j["fingerprint"] = cfg.fingerprint();
    j["total"] = cells.size();
    j["counts"] = counts;
    j["complete"] = counts["pending"] == 0 && counts["failed"] == 0;
    j["caveat"] = kStatisticalCaveat;
    j["cells"] = std::move(rows);
    return j;
}

inline void write_text_file(const std::string& path, const std::string& text)
{
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << text;
        if (!out.flush()) throw std::runtime_error("cannot write " + path);
    }
    std::filesystem::rename(tmp, path);
}

/// Writes the CSV and JSON summary.
inline void emit_phase_table(const ScanConfig& cfg, const std::vector<ScanCell>& cells)
{
    write_text_file(cfg.csv_path, phase_table_csv(cells));
    write_text_file(cfg.json_path, phase_summary(cfg, cells).dump(2) + "\n");
}

}  // namespace anderson
