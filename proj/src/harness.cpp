#include "magpic/harness.hpp"

#include "magpic/fields.hpp"
#include "magpic/integrators.hpp"
#include "magpic/pic.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace magpic {

std::string_view to_string(Family f) {
    switch (f) {
    case Family::SingleParticleNoE: return "SingleParticleNoE";
    case Family::SingleParticleWithE: return "SingleParticleWithE";
    case Family::VlasovPoisson: return "VlasovPoisson";
    }
    return "unknown";
}

std::optional<Family> family_from_string(std::string_view name) {
    for (Family f : {Family::SingleParticleNoE, Family::SingleParticleWithE, Family::VlasovPoisson}) {
        if (name == to_string(f)) {
            return f;
        }
    }
    return std::nullopt;
}

ExperimentConfig default_config(Family family) {
    ExperimentConfig cfg;
    cfg.family = family;
    if (family == Family::VlasovPoisson) {
        cfg.epsilons = {1.0, 0.05};
        cfg.dts = {0.1};
        cfg.orders = {3};
        cfg.T = 80.0;
        cfg.snapshot_times = {10.0, 20.0, 55.0, 80.0};
        return cfg;
    }
    constexpr int points = 25;
    const double lo = std::log10(1e-3);
    const double hi = std::log10(3.0);
    for (int k = 0; k < points; ++k) {
        cfg.epsilons.push_back(std::pow(10.0, lo + (hi - lo) * k / (points - 1)));
    }
    cfg.dts = {0.01, 0.005, 0.0025};
    cfg.orders = {2, 3};
    cfg.T = 2.0;
    return cfg;
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (epsilons.empty()) {
        fail("epsilon: list must not be empty");
    }
    for (double e : epsilons) {
        if (!(e > 0.0) || !std::isfinite(e)) {
            fail(fmt::format("epsilon: values must be positive, got {}", e));
        }
    }
    if (dts.empty()) {
        fail("dt: list must not be empty");
    }
    for (double d : dts) {
        if (!(d > 0.0) || !std::isfinite(d)) {
            fail(fmt::format("dt: values must be positive, got {}", d));
        }
    }
    if (orders.empty()) {
        fail("order: list must not be empty");
    }
    for (int o : orders) {
        if (o < 1 || o > 3) {
            fail(fmt::format("order: values must be 1, 2 or 3, got {}", o));
        }
    }
    if (family == Family::VlasovPoisson) {
        if (!(T >= 0.0) || !std::isfinite(T)) {
            fail(fmt::format("T: must be non-negative, got {}", T));
        }
        if (particles == 0) {
            fail("particles: must be at least 1");
        }
        if (nx < 5) {
            fail(fmt::format("nx: need at least 5 nodes, got {}", nx));
        }
        for (double s : snapshot_times) {
            if (!(s >= 0.0)) {
                fail(fmt::format("snapshot_times: values must be non-negative, got {}", s));
            }
        }
    } else {
        if (!(T > 0.0) || !std::isfinite(T)) {
            fail(fmt::format("T: must be positive, got {}", T));
        }
        if (!(alpha > 0.0)) {
            fail(fmt::format("alpha: must be positive, got {}", alpha));
        }
        if (!(ref_dt_factor > 0.0)) {
            fail(fmt::format("ref_dt_factor: must be positive, got {}", ref_dt_factor));
        }
        if (limit_substeps == 0) {
            fail("limit_substeps: must be at least 1");
        }
    }
    if (workers == 0) {
        fail("workers: must be at least 1");
    }
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

struct Entry {
    std::string value;
    std::size_t line = 0;
};

class EntryReader {
public:
    EntryReader(std::string_view source, std::string key, Entry entry)
        : source_(source), key_(std::move(key)), entry_(std::move(entry)) {}

    [[noreturn]] void fail(std::string_view msg) const {
        throw ConfigError(fmt::format("{}:{}: {}: {}", source_, entry_.line, key_, msg));
    }

    std::vector<std::string_view> items() const {
        std::string_view v = trim(entry_.value);
        if (v.size() >= 2 && v.front() == '(' && v.back() == ')') {
            v = trim(v.substr(1, v.size() - 2));
        }
        std::vector<std::string_view> out;
        if (v.empty()) {
            return out;
        }
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = v.find(',', start);
            const std::string_view item = trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start));
            if (item.empty()) {
                fail("empty list element");
            }
            out.push_back(item);
            if (comma == std::string_view::npos) {
                break;
            }
            start = comma + 1;
        }
        return out;
    }

    double to_double(std::string_view item) const {
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
        if (ec != std::errc{} || ptr != item.data() + item.size() || !std::isfinite(value)) {
            fail(fmt::format("'{}' is not a finite number", item));
        }
        return value;
    }

    template <class Int>
    Int to_integer(std::string_view item) const {
        Int value{};
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
        if (ec != std::errc{} || ptr != item.data() + item.size()) {
            fail(fmt::format("'{}' is not a valid integer", item));
        }
        return value;
    }

    std::string_view single() const {
        const auto list = items();
        if (list.size() != 1) {
            fail(list.empty() ? "value is empty" : "expected a single value");
        }
        return list.front();
    }

    double number() const { return to_double(single()); }

    template <class Int>
    Int integer() const {
        return to_integer<Int>(single());
    }

    std::vector<double> numbers(bool allow_empty = false) const {
        std::vector<double> out;
        for (std::string_view item : items()) {
            out.push_back(to_double(item));
        }
        if (out.empty() && !allow_empty) {
            fail("value is empty");
        }
        return out;
    }

    std::vector<int> integers() const {
        std::vector<int> out;
        for (std::string_view item : items()) {
            out.push_back(to_integer<int>(item));
        }
        if (out.empty()) {
            fail("value is empty");
        }
        return out;
    }

    Vec2 vec2() const {
        const auto v = numbers();
        if (v.size() != 2) {
            fail(fmt::format("expected two components, got {}", v.size()));
        }
        return {v[0], v[1]};
    }

    std::string_view text() const {
        const std::string_view v = trim(entry_.value);
        if (v.empty()) {
            fail("value is empty");
        }
        return v;
    }

private:
    std::string_view source_;
    std::string key_;
    Entry entry_;
};

} // namespace

ExperimentConfig parse_config_text(std::string_view text, std::string_view source) {
    std::map<std::string, Entry> entries;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(fmt::format("{}:{}: expected 'key = value'", source, line_no));
        }
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) {
            throw ConfigError(fmt::format("{}:{}: missing key before '='", source, line_no));
        }
        if (entries.contains(key)) {
            throw ConfigError(fmt::format("{}:{}: {}: duplicate key (first set on line {})", source, line_no, key,
                                          entries[key].line));
        }
        entries[key] = Entry{std::string(trim(line.substr(eq + 1))), line_no};
    }

    const auto family_it = entries.find("family");
    if (family_it == entries.end()) {
        throw ConfigError(fmt::format("{}: family: required key is missing", source));
    }
    const EntryReader family_reader(source, "family", family_it->second);
    const std::string_view family_name = family_reader.text();
    const auto family = family_from_string(family_name);
    if (!family) {
        family_reader.fail(fmt::format("unknown family '{}' (expected SingleParticleNoE, SingleParticleWithE "
                                       "or VlasovPoisson)",
                                       family_name));
    }

    ExperimentConfig cfg = default_config(*family);
    for (const auto& [key, entry] : entries) {
        const EntryReader r(source, key, entry);
        if (key == "family") {
            continue;
        } else if (key == "epsilon") {
            cfg.epsilons = r.numbers();
        } else if (key == "dt") {
            cfg.dts = r.numbers();
        } else if (key == "order") {
            cfg.orders = r.integers();
        } else if (key == "T") {
            cfg.T = r.number();
        } else if (key == "x0") {
            cfg.x0 = r.vec2();
        } else if (key == "v0") {
            cfg.v0 = r.vec2();
        } else if (key == "alpha") {
            cfg.alpha = r.number();
        } else if (key == "ref_dt_factor") {
            cfg.ref_dt_factor = r.number();
        } else if (key == "limit_substeps") {
            cfg.limit_substeps = r.integer<std::size_t>();
        } else if (key == "particles") {
            cfg.particles = r.integer<std::size_t>();
        } else if (key == "seed") {
            cfg.seed = r.integer<std::uint64_t>();
        } else if (key == "nx") {
            cfg.nx = r.integer<int>();
        } else if (key == "snapshot_times") {
            cfg.snapshot_times = r.numbers(true);
        } else if (key == "out") {
            cfg.out_dir = std::string(r.text());
        } else if (key == "workers") {
            cfg.workers = r.integer<unsigned>();
        } else {
            r.fail("unknown key");
        }
        // Re-validate after each key so the error points at the offending line.
        try {
            cfg.validate();
        } catch (const ConfigError& e) {
            const std::string_view msg = e.what();
            if (msg.starts_with(key + ":")) {
                throw ConfigError(fmt::format("{}:{}: {}", source, entry.line, msg));
            }
        }
    }
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", source, e.what()));
    }
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("{}: cannot open configuration file", path.string()));
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path.string());
}

double reference_dt(const ExperimentConfig& cfg, double epsilon, double dt, double b) {
    return std::min(cfg.ref_dt_factor * epsilon * epsilon / b, dt / 10.0);
}

namespace {

std::unique_ptr<FieldModel> single_particle_model(const ExperimentConfig& cfg) {
    return make_analytic_model(cfg.family == Family::SingleParticleWithE ? AnalyticModelId::ParabolicB_LinearE
                                                                          : AnalyticModelId::ParabolicB_NoE,
                               cfg.alpha);
}

struct Series {
    std::vector<Vec2> x;
    std::vector<double> e;
    std::vector<Vec2> w;
};

Series split(const std::vector<ParticleState>& traj) {
    Series s;
    for (const ParticleState& p : traj) {
        s.x.push_back(p.x);
        s.e.push_back(p.e);
        s.w.push_back(p.w);
    }
    return s;
}

ErrorReport compute_errors(const ExperimentConfig& cfg, const FieldModel& model, double epsilon, double dt,
                           int order, const Series& ref, const std::vector<GuidingCenterState>& limit) {
    const ParticleState p0 = make_particle(cfg.x0, cfg.v0);
    const Series approx = split(integrate_semi_implicit(p0, 0.0, cfg.T, {epsilon, dt, order}, model));

    std::vector<Vec2> y;
    std::vector<double> g;
    std::vector<Vec2> drift;
    std::vector<Vec2> scaled_w;
    for (std::size_t n = 0; n < limit.size(); ++n) {
        y.push_back(limit[n].y);
        g.push_back(limit[n].g);
        drift.push_back(full_drift(model, static_cast<double>(n) * dt, limit[n].y, limit[n].g));
        scaled_w.push_back(approx.w[n] / epsilon);
    }

    ErrorReport r;
    r.epsilon = epsilon;
    r.dt = dt;
    r.order = order;
    r.x_err_vs_ref = l1_trajectory_error(approx.x, ref.x, dt, cfg.T);
    r.w_err_vs_ref = l1_trajectory_error(approx.w, ref.w, dt, cfg.T) / epsilon;
    r.e_err_vs_ref = l1_trajectory_error(approx.e, ref.e, dt, cfg.T);
    r.x_err_vs_limit = l1_trajectory_error(approx.x, y, dt, cfg.T);
    r.e_err_vs_limit = l1_trajectory_error(approx.e, g, dt, cfg.T);
    // The initial w is the data v0, not a scheme output, and eps^-1 v0 blows
    // up as eps -> 0; the drift comparison starts at the first step.
    r.w_err_vs_drift = l1_trajectory_error(std::span(scaled_w).subspan(1), std::span(drift).subspan(1), dt, cfg.T);
    return r;
}

std::vector<GuidingCenterState> limit_reference(const ExperimentConfig& cfg, const FieldModel& model, double dt) {
    const ParticleState p0 = make_particle(cfg.x0, cfg.v0);
    return integrate_limit_reference({p0.x, p0.e}, 0.0, cfg.T, dt, cfg.limit_substeps, model);
}

std::vector<ParticleState> particle_reference(const ExperimentConfig& cfg, const FieldModel& model,
                                              double epsilon, double dt) {
    return integrate_reference_resolved(make_particle(cfg.x0, cfg.v0), 0.0, cfg.T, dt, cfg.ref_dt_factor, epsilon,
                                        model);
}

void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
    }
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    }
    return out;
}

} // namespace

ErrorReport single_particle_errors(const ExperimentConfig& cfg, double epsilon, double dt, int order) {
    const auto model = single_particle_model(cfg);
    const Series ref = split(particle_reference(cfg, *model, epsilon, dt));
    return compute_errors(cfg, *model, epsilon, dt, order, ref, limit_reference(cfg, *model, dt));
}

std::vector<SweepRow> run_single_particle_sweep(const ExperimentConfig& cfg) {
    if (cfg.family == Family::VlasovPoisson) {
        throw std::invalid_argument("run_single_particle_sweep: configuration family is VlasovPoisson");
    }
    cfg.validate();
    const auto model = single_particle_model(cfg);

    struct Job {
        double epsilon;
        double dt;
    };
    std::vector<Job> jobs;
    for (double dt : cfg.dts) {
        for (double eps : cfg.epsilons) {
            jobs.push_back({eps, dt});
        }
    }
    std::vector<std::vector<SweepRow>> results(jobs.size());

    auto run_job = [&](std::size_t k) {
        const Job& job = jobs[k];
        std::vector<SweepRow>& rows = results[k];
        auto failed_row = [&](int order, const std::string& why) {
            SweepRow row;
            row.family = cfg.family;
            row.report.epsilon = job.epsilon;
            row.report.dt = job.dt;
            row.report.order = order;
            row.ok = false;
            row.failure = why;
            return row;
        };
        Series ref;
        std::vector<GuidingCenterState> limit;
        try {
            ref = split(particle_reference(cfg, *model, job.epsilon, job.dt));
            limit = limit_reference(cfg, *model, job.dt);
        } catch (const std::exception& e) {
            for (int order : cfg.orders) {
                rows.push_back(failed_row(order, fmt::format("reference: {}", e.what())));
            }
            return;
        }
        for (int order : cfg.orders) {
            try {
                SweepRow row;
                row.family = cfg.family;
                row.report = compute_errors(cfg, *model, job.epsilon, job.dt, order, ref, limit);
                const ErrorReport& r = row.report;
                for (double v : {r.x_err_vs_ref, r.w_err_vs_ref, r.e_err_vs_ref, r.x_err_vs_limit, r.w_err_vs_drift,
                                 r.e_err_vs_limit}) {
                    if (!std::isfinite(v)) {
                        throw std::runtime_error("non-finite error norm");
                    }
                }
                rows.push_back(row);
            } catch (const std::exception& e) {
                rows.push_back(failed_row(order, e.what()));
            }
        }
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) {
            run_job(k);
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 1; w < std::min<std::size_t>(cfg.workers, jobs.size()); ++w) {
            pool.emplace_back(worker);
        }
        worker();
    }

    std::vector<SweepRow> rows;
    for (auto& r : results) {
        rows.insert(rows.end(), r.begin(), r.end());
    }
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.report.order != b.report.order) return a.report.order < b.report.order;
        if (a.report.dt != b.report.dt) return a.report.dt < b.report.dt;
        return a.report.epsilon < b.report.epsilon;
    });

    ensure_directory(cfg.out_dir);
    {
        std::ofstream out = open_output(cfg.out_dir / "errors.csv");
        write_errors_csv(out, rows);
    }
    std::ofstream log = open_output(cfg.out_dir / "run.log");
    fmt::print(log, "family={} cells={} T={} x0=({}, {}) v0=({}, {}) alpha={} ref_dt_factor={} limit_substeps={}\n",
               to_string(cfg.family), rows.size(), cfg.T, cfg.x0.v1, cfg.x0.v2, cfg.v0.v1, cfg.v0.v2, cfg.alpha,
               cfg.ref_dt_factor, cfg.limit_substeps);
    for (const SweepRow& row : rows) {
        fmt::print(log, "order={} eps={} dt={} ref_dt(x0)={} {}{}\n", row.report.order, row.report.epsilon,
                   row.report.dt, reference_dt(cfg, row.report.epsilon, row.report.dt, model->b(0.0, cfg.x0)),
                   row.ok ? "ok" : "failed: ", row.failure);
    }
    return rows;
}

void write_errors_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "family,order,epsilon,dt,x_err_ref,w_err_ref_scaled,e_err_ref,x_err_limit,w_err_drift,e_err_limit,"
          "status\n";
    for (const SweepRow& row : rows) {
        const ErrorReport& r = row.report;
        if (row.ok) {
            fmt::print(os, "{},{},{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},ok\n", to_string(row.family),
                       r.order, r.epsilon, r.dt, r.x_err_vs_ref, r.w_err_vs_ref, r.e_err_vs_ref, r.x_err_vs_limit,
                       r.w_err_vs_drift, r.e_err_vs_limit);
        } else {
            fmt::print(os, "{},{},{},{},,,,,,,failed\n", to_string(row.family), r.order, r.epsilon, r.dt);
        }
    }
}

RunError::RunError(std::size_t step, const std::string& what)
    : std::runtime_error(fmt::format("step {}: {}", step, what)), step_(step) {}

namespace {

VlasovPoissonSummary run_one_vlasov_poisson(const ExperimentConfig& cfg, double epsilon, int order, double dt,
                                            const std::filesystem::path& dir) {
    ensure_directory(dir);
    std::ofstream log = open_output(dir / "run.log");
    std::ofstream series_out = open_output(dir / "timeseries.csv");
    fmt::print(log, "family=VlasovPoisson eps={} dt={} order={} T={} particles={} seed={} nx={}\n", epsilon, dt,
               order, cfg.T, cfg.particles, cfg.seed, cfg.nx);

    const SchemeParams params{epsilon, dt, order};
    const DiskConfinementField magnetic;
    ParticleEnsemble ensemble = sample_initial(InitialDataSpec{}, cfg.particles, cfg.seed);
    Grid grid(cfg.nx);
    const std::size_t steps = step_count(0.0, cfg.T, dt);

    std::map<std::size_t, double> snapshot_steps{{0, 0.0}};
    for (double ts : cfg.snapshot_times) {
        if (ts <= cfg.T + 1e-9 * std::max(1.0, cfg.T)) {
            snapshot_steps.emplace(static_cast<std::size_t>(std::llround(ts / dt)), ts);
        }
    }

    VlasovPoissonSummary summary;
    summary.epsilon = epsilon;
    summary.directory = dir;
    write_timeseries_header(series_out);

    for (std::size_t n = 0; n <= steps; ++n) {
        const double t = static_cast<double>(n) * dt;
        try {
            const FieldUpdateReport field = update_self_consistent_field(ensemble, grid, {}, cfg.workers);
            const TimeSeriesRow row = measure(ensemble, grid, magnetic, t, field.deposit.escaped);
            write_timeseries_row(series_out, row);
            summary.series.push_back(row);
            if (const auto it = snapshot_steps.find(n); it != snapshot_steps.end()) {
                const auto path = dir / fmt::format("density_t{}.txt", it->second);
                std::ofstream snap = open_output(path);
                write_density_snapshot(snap, grid, t);
                summary.snapshots.push_back(path);
            }
            if (n < steps) {
                const GridElectricField frozen(grid, magnetic);
                push_ensemble(ensemble, t, params, frozen, cfg.workers);
            }
        } catch (const std::exception& e) {
            fmt::print(log, "aborted at step {} (t={}): {}\n", n, t, e.what());
            throw RunError(n, e.what());
        }
    }

    const TimeSeriesRow& first = summary.series.front();
    for (const TimeSeriesRow& row : summary.series) {
        summary.energy_drift = std::max(summary.energy_drift,
                                        std::abs(row.total_energy - first.total_energy) / std::abs(first.total_energy));
        summary.adiabatic_drift =
            std::max(summary.adiabatic_drift, std::abs(row.adiabatic_invariant - first.adiabatic_invariant) /
                                                  std::abs(first.adiabatic_invariant));
        summary.max_escaped_fraction = std::max(
            summary.max_escaped_fraction, static_cast<double>(row.escaped_count) / static_cast<double>(ensemble.size()));
    }
    fmt::print(log, "completed {} steps; max relative energy drift {:.6e}; max relative adiabatic drift {:.6e}; "
                    "max escaped fraction {:.6e}\n",
               steps, summary.energy_drift, summary.adiabatic_drift, summary.max_escaped_fraction);
    return summary;
}

} // namespace

std::vector<VlasovPoissonSummary> run_vlasov_poisson(const ExperimentConfig& cfg) {
    if (cfg.family != Family::VlasovPoisson) {
        throw std::invalid_argument("run_vlasov_poisson: configuration family is not VlasovPoisson");
    }
    cfg.validate();
    std::vector<VlasovPoissonSummary> out;
    const bool nested = cfg.epsilons.size() * cfg.dts.size() * cfg.orders.size() > 1;
    for (int order : cfg.orders) {
        for (double dt : cfg.dts) {
            for (double eps : cfg.epsilons) {
                std::filesystem::path dir = cfg.out_dir;
                if (nested) {
                    std::string name = fmt::format("eps_{}", eps);
                    if (cfg.dts.size() > 1) name += fmt::format("_dt_{}", dt);
                    if (cfg.orders.size() > 1) name += fmt::format("_order_{}", order);
                    dir /= name;
                }
                out.push_back(run_one_vlasov_poisson(cfg, eps, order, dt, dir));
            }
        }
    }
    return out;
}

void run_experiment(const ExperimentConfig& cfg) {
    if (cfg.family == Family::VlasovPoisson) {
        run_vlasov_poisson(cfg);
    } else {
        run_single_particle_sweep(cfg);
    }
}

} // namespace magpic
