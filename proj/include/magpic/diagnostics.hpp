#pragma once

#include "magpic/fields.hpp"
#include "magpic/integrators.hpp"
#include "magpic/pic.hpp"
#include "magpic/vec2.hpp"

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <utility>

namespace magpic {

/// Error norms of one single-particle sweep cell. The w errors are reported
/// on the scale of eps^-1 w, the quantity that converges to the drift.
struct ErrorReport {
    double epsilon = 0.0;
    double dt = 0.0;
    int order = 0;
    double x_err_vs_ref = 0.0;
    double w_err_vs_ref = 0.0;
    double e_err_vs_ref = 0.0;
    double x_err_vs_limit = 0.0;
    double w_err_vs_drift = 0.0;
    double e_err_vs_limit = 0.0;
};

/// Discrete L1-in-time distance (dt / T) * sum_n |a^n - b^n| over all samples.
double l1_trajectory_error(std::span<const Vec2> a, std::span<const Vec2> b, double dt, double T);
double l1_trajectory_error(std::span<const double> a, std::span<const double> b, double dt, double T);

double kinetic_energy(const ParticleEnsemble& ensemble);

/// (1/2) h^2 sum over inside nodes of |E|^2.
double field_energy(const Grid& grid);

/// Kinetic plus field energy; grid.E must match the current particle positions.
double total_energy(const ParticleEnsemble& ensemble, const Grid& grid);

/// sum_k w_k e_k / b(t, x_k) over particles with |x_k| < domain_radius.
double adiabatic_invariant(const ParticleEnsemble& ensemble, const FieldModel& model, double t,
                           double domain_radius = std::numeric_limits<double>::infinity());

/// (2 v1 v2, v1^2 - v2^2) of the reconstructed velocity; both rotate at twice
/// the gyration frequency and average to zero in the limit.
std::pair<double, double> oscillation_observables(const ParticleState& s);

struct TimeSeriesRow {
    double t = 0.0;
    double total_energy = 0.0;
    double kinetic = 0.0;
    double field = 0.0;
    double adiabatic_invariant = 0.0;
    std::size_t escaped_count = 0;
};

TimeSeriesRow measure(const ParticleEnsemble& ensemble, const Grid& grid, const FieldModel& magnetic, double t,
                      std::size_t escaped_count);

void write_timeseries_header(std::ostream& os);
void write_timeseries_row(std::ostream& os, const TimeSeriesRow& row);

} // namespace magpic
