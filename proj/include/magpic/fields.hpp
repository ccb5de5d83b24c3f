#pragma once

#include "magpic/vec2.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

namespace magpic {

/// Raised when a field is queried outside the region where it is defined.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Magnetic magnitude, its logarithmic gradient and the electric field at one point.
struct FieldSample {
    double b = 1.0;
    Vec2 grad_log_b;
    Vec2 E;
};

/// Electromagnetic environment seen by a particle. The magnetic field points
/// out of the plane with magnitude b(t, x) / epsilon; E lies in the plane.
///
/// Implementations must be pure functions of (t, x) so a single instance can
/// be shared across worker threads.
class FieldModel {
public:
    virtual ~FieldModel() = default;

    virtual double b(double t, const Vec2& x) const = 0;
    virtual Vec2 grad_log_b(double t, const Vec2& x) const = 0;
    virtual Vec2 E(double t, const Vec2& x) const = 0;

    /// Lower bound b0 > 0 of b over the region of interest.
    virtual double b_floor() const = 0;

    virtual FieldSample sample(double t, const Vec2& x) const {
        return {b(t, x), grad_log_b(t, x), E(t, x)};
    }
};

/// Spatially uniform b and E. Used for the homogeneous case and in tests.
class UniformField final : public FieldModel {
public:
    explicit UniformField(double b0 = 1.0, Vec2 E0 = {});

    double b(double, const Vec2&) const override { return b_; }
    Vec2 grad_log_b(double, const Vec2&) const override { return {}; }
    Vec2 E(double, const Vec2&) const override { return E_; }
    double b_floor() const override { return b_; }

private:
    double b_;
    Vec2 E_;
};

/// b(x) = 1 + alpha x1^2, optionally with the confining field E(x) = (0, -x2).
class ParabolicField final : public FieldModel {
public:
    ParabolicField(double alpha, bool linear_E);

    double b(double, const Vec2& x) const override { return 1.0 + alpha_ * x.v1 * x.v1; }
    Vec2 grad_log_b(double, const Vec2& x) const override {
        return {2.0 * alpha_ * x.v1 / (1.0 + alpha_ * x.v1 * x.v1), 0.0};
    }
    Vec2 E(double, const Vec2& x) const override {
        return linear_E_ ? Vec2{0.0, -x.v2} : Vec2{};
    }
    double b_floor() const override { return 1.0; }

    double alpha() const noexcept { return alpha_; }
    bool has_electric_field() const noexcept { return linear_E_; }

private:
    double alpha_;
    bool linear_E_;
};

/// Radially increasing b(x) = R / sqrt(R^2 - |x|^2), R = 10, with no external E.
/// Only defined on the open disk |x| < R.
class DiskConfinementField final : public FieldModel {
public:
    static constexpr double radius = 10.0;

    double b(double t, const Vec2& x) const override;
    Vec2 grad_log_b(double t, const Vec2& x) const override;
    Vec2 E(double, const Vec2&) const override { return {}; }
    double b_floor() const override { return 1.0; }
    FieldSample sample(double t, const Vec2& x) const override;
};

enum class AnalyticModelId { ParabolicB_NoE, ParabolicB_LinearE, DiskConfinementB };

std::unique_ptr<FieldModel> make_analytic_model(AnalyticModelId id, double alpha = 0.5);

std::string_view to_string(AnalyticModelId id);

/// Electric drift F = -perp(E) / b.
Vec2 electric_drift(const FieldModel& model, double t, const Vec2& x);

/// Guiding-center velocity F + g perp(grad b) / b^2.
Vec2 full_drift(const FieldModel& model, double t, const Vec2& x, double g);

/// Rate of change of the limiting kinetic energy, g perp(grad b) / b^2 . E.
double energy_drift_rate(const FieldModel& model, double t, const Vec2& x, double g);

/// Both limiting right-hand sides from one field sample.
struct DriftRates {
    Vec2 velocity;
    double energy_rate = 0.0;
};
DriftRates drift_rates(const FieldSample& f, double g);

/// Constraint relaxation weight chi(e, w) = e / (e + |w|^2/2) * (e - |w|^2/2)^+.
/// Zero on the constraint manifold e = |w|^2/2, equal to e at w = 0, and
/// clamped to 0 whenever the formula is undefined or e < 0.
double chi(double e, const Vec2& w);

} // namespace magpic
