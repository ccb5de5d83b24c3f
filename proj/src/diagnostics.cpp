#include "magpic/diagnostics.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <ostream>
#include <stdexcept>

namespace magpic {

namespace {

template <class T, class Distance>
double l1_impl(std::span<const T> a, std::span<const T> b, double dt, double T_final, Distance dist) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(
            fmt::format("l1_trajectory_error: series lengths differ ({} vs {})", a.size(), b.size()));
    }
    if (!(T_final > 0.0)) {
        throw std::invalid_argument("l1_trajectory_error: final time must be positive");
    }
    double sum = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        sum += dist(a[n], b[n]);
    }
    return dt / T_final * sum;
}

} // namespace

double l1_trajectory_error(std::span<const Vec2> a, std::span<const Vec2> b, double dt, double T) {
    return l1_impl(a, b, dt, T, [](const Vec2& u, const Vec2& v) { return norm(u - v); });
}

double l1_trajectory_error(std::span<const double> a, std::span<const double> b, double dt, double T) {
    return l1_impl(a, b, dt, T, [](double u, double v) { return std::abs(u - v); });
}

double kinetic_energy(const ParticleEnsemble& ensemble) {
    double s = 0.0;
    for (const ParticleState& p : ensemble.particles) {
        s += p.weight * p.e;
    }
    return s;
}

double field_energy(const Grid& grid) {
    double s = 0.0;
    for (std::size_t k : grid.inside_nodes()) {
        s += norm2(grid.E[k]);
    }
    return 0.5 * grid.spacing() * grid.spacing() * s;
}

double total_energy(const ParticleEnsemble& ensemble, const Grid& grid) {
    return kinetic_energy(ensemble) + field_energy(grid);
}

double adiabatic_invariant(const ParticleEnsemble& ensemble, const FieldModel& model, double t,
                           double domain_radius) {
    const double r2 = domain_radius * domain_radius;
    double s = 0.0;
    for (const ParticleState& p : ensemble.particles) {
        if (norm2(p.x) < r2) {
            s += p.weight * p.e / model.b(t, p.x);
        }
    }
    return s;
}

std::pair<double, double> oscillation_observables(const ParticleState& s) {
    const Vec2 v = reconstruct_velocity(s.e, s.w);
    return {2.0 * v.v1 * v.v2, v.v1 * v.v1 - v.v2 * v.v2};
}

TimeSeriesRow measure(const ParticleEnsemble& ensemble, const Grid& grid, const FieldModel& magnetic, double t,
                      std::size_t escaped_count) {
    TimeSeriesRow row;
    row.t = t;
    row.kinetic = kinetic_energy(ensemble);
    row.field = field_energy(grid);
    row.total_energy = row.kinetic + row.field;
    row.adiabatic_invariant = adiabatic_invariant(ensemble, magnetic, t, grid.extent());
    row.escaped_count = escaped_count;
    return row;
}

void write_timeseries_header(std::ostream& os) {
    os << "t,total_energy,kinetic,field,adiabatic_invariant,escaped_count\n";
}

void write_timeseries_row(std::ostream& os, const TimeSeriesRow& row) {
    fmt::print(os, "{},{:.15e},{:.15e},{:.15e},{:.15e},{}\n", row.t, row.total_energy, row.kinetic, row.field,
               row.adiabatic_invariant, row.escaped_count);
}

} // namespace magpic
