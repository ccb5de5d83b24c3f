#include "magpic/integrators.hpp"

#include <fmt/format.h>

namespace magpic {

bool is_finite(const ParticleState& s) noexcept {
    return is_finite(s.x) && std::isfinite(s.e) && is_finite(s.w) && std::isfinite(s.weight);
}

bool is_finite(const GuidingCenterState& s) noexcept {
    return is_finite(s.y) && std::isfinite(s.g);
}

void SchemeParams::validate() const {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument(fmt::format("scheme epsilon must be positive, got {}", epsilon));
    }
    if (!(dt > 0.0)) {
        throw std::invalid_argument(fmt::format("scheme dt must be positive, got {}", dt));
    }
    if (order < 1 || order > 3) {
        throw std::invalid_argument(fmt::format("scheme order must be 1, 2 or 3, got {}", order));
    }
}

NonFiniteStateError::NonFiniteStateError(std::size_t step)
    : std::runtime_error(fmt::format("non-finite state produced at step {}", step)), step_(step) {}

std::size_t step_count(double t0, double T, double dt) {
    const double ratio = (T - t0) / dt;
    double n = std::floor(ratio);
    if ((n + 1.0) - ratio <= 1e-9 * (n + 1.0)) {
        n += 1.0;
    }
    return static_cast<std::size_t>(n);
}

namespace {

/// One implicit stage
///   w = w_base + c (E - chi grad ln b - b perp(w) / eps),   c = a_ii dt / eps,
/// solved in closed form. Returns the stage velocity together with the full
/// stage force F (implicit term included) and the work rate S = E.w.
struct Stage {
    Vec2 w;
    Vec2 F;
    double S = 0.0;
};

Stage implicit_stage(const Vec2& w_base, double c, const FieldSample& f, double chi_value, double epsilon) {
    const Vec2 source = f.E - chi_value * f.grad_log_b;
    const Vec2 w = solve_rotation_system(w_base + c * source, c * f.b / epsilon);
    return {w, source - (f.b / epsilon) * perp(w), dot(f.E, w)};
}

} // namespace

ParticleState step_order1(const ParticleState& s, double t, const SchemeParams& p, const FieldModel& model) {
    p.validate();
    const double h = p.dt / p.epsilon;
    const FieldSample f = model.sample(t, s.x);
    const Stage st = implicit_stage(s.w, h, f, chi(s.e, s.w), p.epsilon);
    return {s.x + h * st.w, s.e + h * st.S, st.w, s.weight};
}

ParticleState step_order2(const ParticleState& s, double t, const SchemeParams& p, const FieldModel& model) {
    p.validate();
    constexpr double g = coefficients::sdirk2_gamma;
    const double h = p.dt / p.epsilon;

    const FieldSample fn = model.sample(t, s.x);
    const Stage st1 = implicit_stage(s.w, g * h, fn, chi(s.e, s.w), p.epsilon);

    const double hat = h / (2.0 * g);
    const Vec2 x_hat = s.x + hat * st1.w;
    const double e_hat = s.e + hat * st1.S;
    const Vec2 w_hat = s.w + hat * st1.F;
    const FieldSample f_hat = model.sample(t + p.dt / (2.0 * g), x_hat);

    const Stage st2 = implicit_stage(s.w + (1.0 - g) * h * st1.F, g * h, f_hat, chi(e_hat, w_hat), p.epsilon);

    return {s.x + (1.0 - g) * h * st1.w + g * h * st2.w,
            s.e + (1.0 - g) * h * st1.S + g * h * st2.S,
            st2.w,
            s.weight};
}

ParticleState step_order3(const ParticleState& s, double t, const SchemeParams& p, const FieldModel& model) {
    p.validate();
    using namespace coefficients;
    const double h = p.dt / p.epsilon;
    const double ah = rk3_alpha * h;

    const FieldSample fn = model.sample(t, s.x);
    const double chi_n = chi(s.e, s.w);
    const Stage st1 = implicit_stage(s.w, ah, fn, chi_n, p.epsilon);
    const Stage st2 = implicit_stage(s.w - ah * st1.F, ah, fn, chi_n, p.epsilon);

    const Vec2 x_hat2 = s.x + h * st2.w;
    const double e_hat2 = s.e + h * st2.S;
    const Vec2 w_hat2 = s.w + h * st2.F;
    const FieldSample f3 = model.sample(t + p.dt, x_hat2);
    const Stage st3 = implicit_stage(s.w + (1.0 - rk3_alpha) * h * st2.F, ah, f3, chi(e_hat2, w_hat2), p.epsilon);

    const double q = 0.25 * h;
    const Vec2 x_hat3 = s.x + q * (st2.w + st3.w);
    const double e_hat3 = s.e + q * (st2.S + st3.S);
    const Vec2 w_hat3 = s.w + q * (st2.F + st3.F);
    const FieldSample f4 = model.sample(t + 0.5 * p.dt, x_hat3);
    const Vec2 w_base4 = s.w + h * (rk3_beta * st1.F + rk3_eta * st2.F + rk3_gamma * st3.F);
    const Stage st4 = implicit_stage(w_base4, ah, f4, chi(e_hat3, w_hat3), p.epsilon);

    const double sixth = h / 6.0;
    return {s.x + sixth * (st2.w + st3.w + 4.0 * st4.w),
            s.e + sixth * (st2.S + st3.S + 4.0 * st4.S),
            s.w + sixth * (st2.F + st3.F + 4.0 * st4.F),
            s.weight};
}

ParticleState step_semi_implicit(const ParticleState& s, double t, const SchemeParams& p,
                                 const FieldModel& model) {
    switch (p.order) {
    case 1: return step_order1(s, t, p, model);
    case 2: return step_order2(s, t, p, model);
    case 3: return step_order3(s, t, p, model);
    default: p.validate();
    }
    throw std::logic_error("unreachable");
}

namespace {

struct AugmentedRate {
    Vec2 dx;
    double de = 0.0;
    Vec2 dw;
};

AugmentedRate augmented_rhs(const FieldModel& model, double t, const Vec2& x, const Vec2& w, double inv_eps) {
    const FieldSample f = model.sample(t, x);
    return {inv_eps * w, inv_eps * dot(f.E, w), inv_eps * (f.E - (f.b * inv_eps) * perp(w))};
}

} // namespace

ParticleState step_reference(const ParticleState& s, double t, double dt_fine, double epsilon,
                             const FieldModel& model) {
    const double k = 1.0 / epsilon;
    const double h = dt_fine;
    const AugmentedRate k1 = augmented_rhs(model, t, s.x, s.w, k);
    const AugmentedRate k2 = augmented_rhs(model, t + 0.5 * h, s.x + 0.5 * h * k1.dx, s.w + 0.5 * h * k1.dw, k);
    const AugmentedRate k3 = augmented_rhs(model, t + 0.5 * h, s.x + 0.5 * h * k2.dx, s.w + 0.5 * h * k2.dw, k);
    const AugmentedRate k4 = augmented_rhs(model, t + h, s.x + h * k3.dx, s.w + h * k3.dw, k);
    const double w6 = h / 6.0;
    return {s.x + w6 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx),
            s.e + w6 * (k1.de + 2.0 * k2.de + 2.0 * k3.de + k4.de),
            s.w + w6 * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw),
            s.weight};
}

GuidingCenterState step_limit(const GuidingCenterState& gc, double t, double dt, int order,
                              const FieldModel& model) {
    const DriftRates rn = drift_rates(model.sample(t, gc.y), gc.g);
    switch (order) {
    case 1:
        return {gc.y + dt * rn.velocity, gc.g + dt * rn.energy_rate};
    case 2: {
        constexpr double g = coefficients::sdirk2_gamma;
        const double hat = dt / (2.0 * g);
        const GuidingCenterState mid{gc.y + hat * rn.velocity, gc.g + hat * rn.energy_rate};
        const DriftRates r1 = drift_rates(model.sample(t + hat, mid.y), mid.g);
        return {gc.y + (1.0 - g) * dt * rn.velocity + g * dt * r1.velocity,
                gc.g + (1.0 - g) * dt * rn.energy_rate + g * dt * r1.energy_rate};
    }
    case 3: {
        const GuidingCenterState s1{gc.y + dt * rn.velocity, gc.g + dt * rn.energy_rate};
        const DriftRates r1 = drift_rates(model.sample(t + dt, s1.y), s1.g);
        const GuidingCenterState s2{gc.y + 0.25 * dt * (rn.velocity + r1.velocity),
                                    gc.g + 0.25 * dt * (rn.energy_rate + r1.energy_rate)};
        const DriftRates r2 = drift_rates(model.sample(t + 0.5 * dt, s2.y), s2.g);
        return {gc.y + (dt / 6.0) * (rn.velocity + r1.velocity + 4.0 * r2.velocity),
                gc.g + (dt / 6.0) * (rn.energy_rate + r1.energy_rate + 4.0 * r2.energy_rate)};
    }
    default:
        throw std::invalid_argument(fmt::format("limit scheme order must be 1, 2 or 3, got {}", order));
    }
}

GuidingCenterState step_limit_rk4(const GuidingCenterState& gc, double t, double dt, const FieldModel& model) {
    auto rate = [&](double tt, const Vec2& y, double g) { return drift_rates(model.sample(tt, y), g); };
    const DriftRates k1 = rate(t, gc.y, gc.g);
    const DriftRates k2 = rate(t + 0.5 * dt, gc.y + 0.5 * dt * k1.velocity, gc.g + 0.5 * dt * k1.energy_rate);
    const DriftRates k3 = rate(t + 0.5 * dt, gc.y + 0.5 * dt * k2.velocity, gc.g + 0.5 * dt * k2.energy_rate);
    const DriftRates k4 = rate(t + dt, gc.y + dt * k3.velocity, gc.g + dt * k3.energy_rate);
    const double w6 = dt / 6.0;
    return {gc.y + w6 * (k1.velocity + 2.0 * k2.velocity + 2.0 * k3.velocity + k4.velocity),
            gc.g + w6 * (k1.energy_rate + 2.0 * k2.energy_rate + 2.0 * k3.energy_rate + k4.energy_rate)};
}

std::vector<ParticleState> integrate_semi_implicit(const ParticleState& initial, double t0, double T,
                                                   const SchemeParams& p, const FieldModel& model) {
    p.validate();
    return integrate_trajectory(initial, t0, T, p.dt, [&](const ParticleState& s, double t) {
        return step_semi_implicit(s, t, p, model);
    });
}

std::vector<ParticleState> integrate_reference(const ParticleState& initial, double t0, double T, double dt,
                                               double dt_fine, double epsilon, const FieldModel& model) {
    if (!(dt_fine > 0.0)) {
        throw std::invalid_argument("integrate_reference: dt_fine must be positive");
    }
    const auto substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(dt / dt_fine * (1.0 - 1e-12))));
    const double h = dt / static_cast<double>(substeps);
    return integrate_trajectory(initial, t0, T, dt, [&](const ParticleState& s, double t) {
        ParticleState out = s;
        for (std::size_t k = 0; k < substeps; ++k) {
            out = step_reference(out, t + static_cast<double>(k) * h, h, epsilon, model);
        }
        return out;
    });
}

std::vector<ParticleState> integrate_reference_resolved(const ParticleState& initial, double t0, double T,
                                                        double dt, double factor, double epsilon,
                                                        const FieldModel& model) {
    if (!(factor > 0.0) || !(epsilon > 0.0)) {
        throw std::invalid_argument("integrate_reference_resolved: factor and epsilon must be positive");
    }
    return integrate_trajectory(initial, t0, T, dt, [&](const ParticleState& s, double t) {
        const double h_max = std::min(factor * epsilon * epsilon / model.b(t, s.x), dt / 10.0);
        const auto substeps = static_cast<std::size_t>(std::ceil(dt / h_max * (1.0 - 1e-12)));
        const double h = dt / static_cast<double>(substeps);
        ParticleState out = s;
        for (std::size_t k = 0; k < substeps; ++k) {
            out = step_reference(out, t + static_cast<double>(k) * h, h, epsilon, model);
        }
        return out;
    });
}

std::vector<GuidingCenterState> integrate_limit(const GuidingCenterState& initial, double t0, double T,
                                                double dt, int order, const FieldModel& model) {
    return integrate_trajectory(initial, t0, T, dt, [&](const GuidingCenterState& s, double t) {
        return step_limit(s, t, dt, order, model);
    });
}

std::vector<GuidingCenterState> integrate_limit_reference(const GuidingCenterState& initial, double t0,
                                                          double T, double dt, std::size_t substeps,
                                                          const FieldModel& model) {
    if (substeps == 0) {
        throw std::invalid_argument("integrate_limit_reference: substeps must be positive");
    }
    const double h = dt / static_cast<double>(substeps);
    return integrate_trajectory(initial, t0, T, dt, [&](const GuidingCenterState& s, double t) {
        GuidingCenterState out = s;
        for (std::size_t k = 0; k < substeps; ++k) {
            out = step_limit_rk4(out, t + static_cast<double>(k) * h, h, model);
        }
        return out;
    });
}

} // namespace magpic
