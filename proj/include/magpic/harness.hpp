#pragma once

#include "magpic/diagnostics.hpp"
#include "magpic/vec2.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace magpic {

enum class Family { SingleParticleNoE, SingleParticleWithE, VlasovPoisson };

std::string_view to_string(Family f);
std::optional<Family> family_from_string(std::string_view name);

/// Fully validated experiment description. Defaults reproduce the reference
/// experiments at desk scale; see default_config().
struct ExperimentConfig {
    Family family = Family::SingleParticleNoE;
    std::vector<double> epsilons;
    std::vector<double> dts;
    std::vector<int> orders;
    double T = 2.0;

    // single-particle families
    Vec2 x0{5.0, 4.0};
    Vec2 v0{5.0, 6.0};
    double alpha = 0.5;
    /// Reference RK4 step is min(ref_dt_factor * eps^2 / b, dt / 10), with b
    /// taken at the start of each coarse step.
    double ref_dt_factor = 0.1;
    /// RK4 substeps per dt for the limiting-system reference.
    std::size_t limit_substeps = 100;

    // Vlasov-Poisson family
    std::size_t particles = 10000;
    std::uint64_t seed = 1;
    int nx = 65;
    std::vector<double> snapshot_times;

    std::filesystem::path out_dir = "out";
    unsigned workers = 1;

    /// Throws ConfigError describing the first violated constraint.
    void validate() const;
};

/// Configuration problem; the message carries `source:line:` when known.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Defaults for a family: x0 = (5, 4), v0 = (5, 6), T = 2, alpha = 0.5
/// and a 25-point log grid eps in [1e-3, 3] for single particles; dt = 0.1,
/// order 3, eps in {1, 0.05}, T = 80 and snapshots at 10, 20, 55, 80 for
/// Vlasov-Poisson.
ExperimentConfig default_config(Family family);

/// Parses flat `key = value` text. Lists are comma separated, `#` starts a
/// comment, unknown keys are rejected. Keys: family, epsilon, dt, order, T,
/// x0, v0, alpha, ref_dt_factor, limit_substeps, particles, seed, nx,
/// snapshot_times, out, workers.
ExperimentConfig parse_config_text(std::string_view text, std::string_view source = "<config>");
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Reference substep for one (eps, dt) cell where the field strength is b.
double reference_dt(const ExperimentConfig& cfg, double epsilon, double dt, double b);

struct SweepRow {
    Family family = Family::SingleParticleNoE;
    ErrorReport report;
    bool ok = true;
    std::string failure;
};

/// Error norms of one (eps, dt, order) cell: semi-implicit trajectory vs the
/// RK4 reference and vs the fine limiting-system solution.
ErrorReport single_particle_errors(const ExperimentConfig& cfg, double epsilon, double dt, int order);

/// Runs every (eps, dt, order) cell and writes errors.csv and run.log into
/// cfg.out_dir. Rows are sorted by (order, dt, eps). Failed cells are kept
/// with status `failed` and empty numeric fields.
std::vector<SweepRow> run_single_particle_sweep(const ExperimentConfig& cfg);

void write_errors_csv(std::ostream& os, const std::vector<SweepRow>& rows);

struct VlasovPoissonSummary {
    double epsilon = 0.0;
    std::filesystem::path directory;
    std::vector<TimeSeriesRow> series;
    /// max_n |Q(t^n) - Q(0)| / |Q(0)|
    double energy_drift = 0.0;
    double adiabatic_drift = 0.0;
    double max_escaped_fraction = 0.0;
    std::vector<std::filesystem::path> snapshots;
};

class RunError : public std::runtime_error {
public:
    RunError(std::size_t step, const std::string& what);
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Runs the PIC simulation once per epsilon. With a single epsilon outputs go
/// to cfg.out_dir, otherwise to cfg.out_dir / "eps_<value>". Each directory
/// receives timeseries.csv, density_t<time>.txt snapshots and run.log.
std::vector<VlasovPoissonSummary> run_vlasov_poisson(const ExperimentConfig& cfg);

/// Dispatches on cfg.family.
void run_experiment(const ExperimentConfig& cfg);

} // namespace magpic
