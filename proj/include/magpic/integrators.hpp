#pragma once

#include "magpic/fields.hpp"
#include "magpic/vec2.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace magpic {

/// Augmented phase-space state of one macro-particle.
///
/// The physical velocity is carried by the pair (e, w): e is the microscopic
/// kinetic energy and w an auxiliary velocity whose direction gives the
/// gyration phase. Along the exact flow e = |w|^2 / 2; the discrete schemes
/// relax this constraint so that e survives the limit epsilon -> 0 while w is
/// damped towards epsilon times the drift velocity.
struct ParticleState {
    Vec2 x;
    double e = 0.0;
    Vec2 w;
    double weight = 1.0;
};

/// State on the constraint manifold: w = v and e = |v|^2 / 2.
inline ParticleState make_particle(const Vec2& x, const Vec2& v, double weight = 1.0) {
    return {x, 0.5 * norm2(v), v, weight};
}

bool is_finite(const ParticleState& s) noexcept;

/// Limiting (guiding-center) state: position y and kinetic energy g.
struct GuidingCenterState {
    Vec2 y;
    double g = 0.0;
};

bool is_finite(const GuidingCenterState& s) noexcept;

namespace coefficients {
/// Smallest root of X^2 - 2X + 1/2; diagonal of the L-stable two-stage SDIRK.
inline constexpr double sdirk2_gamma = 1.0 - 0.70710678118654752440084436210485;

inline constexpr double rk3_alpha = 0.24169426078821;
inline constexpr double rk3_eta = 0.12915286960590;
inline constexpr double rk3_beta = rk3_alpha / 4.0;
inline constexpr double rk3_gamma = 0.5 - rk3_alpha - rk3_beta - rk3_eta;
} // namespace coefficients

struct SchemeParams {
    double epsilon = 1.0;
    double dt = 0.01;
    int order = 3;

    /// Throws std::invalid_argument unless epsilon > 0, dt > 0 and order in {1, 2, 3}.
    void validate() const;
};

/// Unique solution of w + beta perp(w) = a (closed-form 2x2 inverse).
constexpr Vec2 solve_rotation_system(const Vec2& a, double beta) noexcept {
    // (I + beta J)^{-1} = (I - beta J) / (1 + beta^2), J v = perp(v)
    const double inv_det = 1.0 / (1.0 + beta * beta);
    return {(a.v1 + beta * a.v2) * inv_det, (a.v2 - beta * a.v1) * inv_det};
}

/// First-order scheme: backward Euler on the stiff rotation, forward Euler on
/// the rest. Fields are evaluated once at (t, s.x).
ParticleState step_order1(const ParticleState& s, double t, const SchemeParams& p, const FieldModel& model);

/// Second-order scheme: L-stable two-stage SDIRK on the rotation coupled with
/// an explicit two-stage method whose second stage sits at t + dt / (2 gamma).
ParticleState step_order2(const ParticleState& s, double t, const SchemeParams& p, const FieldModel& model);

/// Third-order four-stage IMEX scheme. Stages 1 and 2 freeze the fields at
/// (t, s.x); stage 3 evaluates at t + dt and stage 4 at t + dt / 2.
ParticleState step_order3(const ParticleState& s, double t, const SchemeParams& p, const FieldModel& model);

/// Dispatches on p.order.
ParticleState step_semi_implicit(const ParticleState& s, double t, const SchemeParams& p,
                                 const FieldModel& model);

/// Classical RK4 step of the unrelaxed augmented system
///   eps x' = w,  eps e' = E.w,  eps w' = -b perp(w) / eps + E.
/// Needs dt_fine well below eps^2 to resolve the gyration.
ParticleState step_reference(const ParticleState& s, double t, double dt_fine, double epsilon,
                             const FieldModel& model);

/// Explicit guiding-center scheme of the given order; these are the fixed-dt
/// limits of step_order1/2/3 as epsilon -> 0.
GuidingCenterState step_limit(const GuidingCenterState& gc, double t, double dt, int order,
                              const FieldModel& model);

/// Classical RK4 step of the limiting system y' = full_drift, g' = energy_drift_rate.
GuidingCenterState step_limit_rk4(const GuidingCenterState& gc, double t, double dt, const FieldModel& model);

/// Raised when a trajectory produces NaN or infinity.
class NonFiniteStateError : public std::runtime_error {
public:
    explicit NonFiniteStateError(std::size_t step);
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Number of whole steps of size dt that fit in [t0, T]; ratios within
/// 1e-9 relative of an integer are rounded to it.
std::size_t step_count(double t0, double T, double dt);

/// Runs `step(state, t)` from t0 to the last grid time t0 + n dt <= T.
/// Returns the states at t0, t0 + dt, ..., t0 + N dt.
template <class State, class Stepper>
std::vector<State> integrate_trajectory(const State& initial, double t0, double T, double dt, Stepper&& step) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("integrate_trajectory: dt must be positive");
    }
    if (T < t0) {
        throw std::invalid_argument("integrate_trajectory: final time precedes start time");
    }
    const std::size_t n_steps = step_count(t0, T, dt);
    std::vector<State> out;
    out.reserve(n_steps + 1);
    out.push_back(initial);
    for (std::size_t n = 0; n < n_steps; ++n) {
        State next = step(out.back(), t0 + static_cast<double>(n) * dt);
        if (!is_finite(next)) {
            throw NonFiniteStateError(n + 1);
        }
        out.push_back(next);
    }
    return out;
}

/// Semi-implicit trajectory of the selected order.
std::vector<ParticleState> integrate_semi_implicit(const ParticleState& initial, double t0, double T,
                                                   const SchemeParams& p, const FieldModel& model);

/// RK4 reference sampled every dt; each coarse step is split into
/// ceil(dt / dt_fine) equal substeps.
std::vector<ParticleState> integrate_reference(const ParticleState& initial, double t0, double T, double dt,
                                               double dt_fine, double epsilon, const FieldModel& model);

/// RK4 reference resolving the local gyration period: within the coarse step
/// from t^n the substep is min(factor * eps^2 / b(t^n, x^n), dt / 10).
std::vector<ParticleState> integrate_reference_resolved(const ParticleState& initial, double t0, double T,
                                                        double dt, double factor, double epsilon,
                                                        const FieldModel& model);

/// Explicit limit-scheme trajectory of the given order.
std::vector<GuidingCenterState> integrate_limit(const GuidingCenterState& initial, double t0, double T,
                                                double dt, int order, const FieldModel& model);

/// Fine RK4 solution of the limiting system sampled every dt using `substeps` per step.
std::vector<GuidingCenterState> integrate_limit_reference(const GuidingCenterState& initial, double t0,
                                                          double T, double dt, std::size_t substeps,
                                                          const FieldModel& model);

} // namespace magpic
