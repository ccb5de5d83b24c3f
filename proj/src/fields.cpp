#include "magpic/fields.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace magpic {

UniformField::UniformField(double b0, Vec2 E0) : b_(b0), E_(E0) {
    if (!(b0 > 0.0)) {
        throw std::invalid_argument(fmt::format("uniform field needs b > 0, got {}", b0));
    }
}

ParabolicField::ParabolicField(double alpha, bool linear_E) : alpha_(alpha), linear_E_(linear_E) {
    if (!(alpha > 0.0)) {
        throw std::invalid_argument(fmt::format("parabolic field needs alpha > 0, got {}", alpha));
    }
}

namespace {

double disk_gap(const Vec2& x) {
    constexpr double r2 = DiskConfinementField::radius * DiskConfinementField::radius;
    const double gap = r2 - norm2(x);
    if (!(gap > 0.0)) {
        throw DomainError(fmt::format("disk confinement field undefined at ({}, {}): |x| >= {}",
                                      x.v1, x.v2, DiskConfinementField::radius));
    }
    return gap;
}

} // namespace

double DiskConfinementField::b(double, const Vec2& x) const {
    return radius / std::sqrt(disk_gap(x));
}

// ln b = ln R - ln(R^2 - |x|^2) / 2
Vec2 DiskConfinementField::grad_log_b(double, const Vec2& x) const {
    return x / disk_gap(x);
}

FieldSample DiskConfinementField::sample(double, const Vec2& x) const {
    const double gap = disk_gap(x);
    return {radius / std::sqrt(gap), x / gap, {}};
}

std::unique_ptr<FieldModel> make_analytic_model(AnalyticModelId id, double alpha) {
    switch (id) {
    case AnalyticModelId::ParabolicB_NoE:
        return std::make_unique<ParabolicField>(alpha, false);
    case AnalyticModelId::ParabolicB_LinearE:
        return std::make_unique<ParabolicField>(alpha, true);
    case AnalyticModelId::DiskConfinementB:
        return std::make_unique<DiskConfinementField>();
    }
    throw std::invalid_argument("unknown analytic model");
}

std::string_view to_string(AnalyticModelId id) {
    switch (id) {
    case AnalyticModelId::ParabolicB_NoE: return "ParabolicB_NoE";
    case AnalyticModelId::ParabolicB_LinearE: return "ParabolicB_LinearE";
    case AnalyticModelId::DiskConfinementB: return "DiskConfinementB";
    }
    return "unknown";
}

Vec2 electric_drift(const FieldModel& model, double t, const Vec2& x) {
    const FieldSample f = model.sample(t, x);
    return -perp(f.E) / f.b;
}

DriftRates drift_rates(const FieldSample& f, double g) {
    // perp(grad b) / b^2 == perp(grad ln b) / b
    const Vec2 grad_b_drift = perp(f.grad_log_b) / f.b;
    return {-perp(f.E) / f.b + g * grad_b_drift, g * dot(grad_b_drift, f.E)};
}

Vec2 full_drift(const FieldModel& model, double t, const Vec2& x, double g) {
    return drift_rates(model.sample(t, x), g).velocity;
}

double energy_drift_rate(const FieldModel& model, double t, const Vec2& x, double g) {
    return drift_rates(model.sample(t, x), g).energy_rate;
}

double chi(double e, const Vec2& w) {
    constexpr double denominator_guard = 1e-300;
    const double half_w2 = 0.5 * norm2(w);
    const double excess = e - half_w2;
    if (!(excess > 0.0)) {
        return 0.0;
    }
    const double denom = e + half_w2;
    if (!(denom > denominator_guard)) {
        return 0.0;
    }
    const double prefactor = std::clamp(e / denom, 0.0, 1.0);
    return prefactor * excess;
}

} // namespace magpic
