#include "magpic/diagnostics.hpp"
#include "magpic/fields.hpp"
#include "magpic/harness.hpp"
#include "magpic/integrators.hpp"
#include "magpic/pic.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace magpic;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0 && secs > budget_s) {
        o.pass = false;
        o.detail += fmt::format("; over time budget {:.0f} s", budget_s);
    }
    if (!o.pass) ++failures;
    fmt::print("[{}] {:>2} {}: {} ({:.2f} s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail, secs);
    std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// l1 distance of the whole (x, e, w) trajectory
double trajectory_distance(const std::vector<ParticleState>& a, const std::vector<ParticleState>& b, double dt,
                           double T) {
    std::vector<Vec2> ax, bx, aw, bw;
    std::vector<double> ae, be;
    for (std::size_t n = 0; n < a.size(); ++n) {
        ax.push_back(a[n].x);
        bx.push_back(b[n].x);
        aw.push_back(a[n].w);
        bw.push_back(b[n].w);
        ae.push_back(a[n].e);
        be.push_back(b[n].e);
    }
    return l1_trajectory_error(std::span<const Vec2>(ax), std::span<const Vec2>(bx), dt, T) +
           l1_trajectory_error(std::span<const Vec2>(aw), std::span<const Vec2>(bw), dt, T) +
           l1_trajectory_error(std::span<const double>(ae), std::span<const double>(be), dt, T);
}

Outcome rotation_solve() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> comp(-1e3, 1e3);
    std::uniform_real_distribution<double> logb(-6, 6);
    double worst = 0.0;
    for (int k = 0; k < 100000; ++k) {
        const Vec2 a{comp(rng), comp(rng)};
        const double beta = (k % 2 ? 1.0 : -1.0) * std::pow(10.0, logb(rng));
        const Vec2 w = solve_rotation_system(a, beta);
        worst = std::max(worst, norm(w + beta * perp(w) - a) / (1.0 + norm(a)));
    }
    return {worst <= 1e-12, fmt::format("max scaled residual {:.2e}", worst)};
}

Outcome convergence_orders() {
    const ParabolicField field(0.5, true);
    const ParticleState p0 = make_particle({1, 1}, {1, 0.5});
    const double T = 2.0;
    const std::vector<double> dts{0.04, 0.02, 0.01};
    const double bands[3][2] = {{0.7, 1.3}, {1.7, 2.3}, {2.6, 3.4}};
    bool pass = true;
    std::string detail;
    std::vector<std::vector<ParticleState>> refs;
    for (double dt : dts) {
        refs.push_back(integrate_reference(p0, 0, T, dt, 1e-4, 1.0, field));
    }
    for (int order = 1; order <= 3; ++order) {
        std::vector<double> err;
        for (std::size_t k = 0; k < dts.size(); ++k) {
            const auto traj = integrate_semi_implicit(p0, 0, T, {1.0, dts[k], order}, field);
            err.push_back(trajectory_distance(traj, refs[k], dts[k], T));
        }
        detail += fmt::format("{}order {}:", order == 1 ? "" : "; ", order);
        for (std::size_t k = 0; k + 1 < err.size(); ++k) {
            const double p = std::log2(err[k] / err[k + 1]);
            const bool ok = p >= bands[order - 1][0] && p <= bands[order - 1][1];
            pass = pass && ok;
            detail += fmt::format(" {:.3f}{}", p, ok ? "" : "(out of band)");
        }
    }
    return {pass, detail};
}

Outcome asymptotic_limit() {
    const ParabolicField field(0.5, true);
    const double eps = 1e-6, dt = 0.01, T = 2.0;
    const ParticleState p0 = make_particle({5, 4}, {5, 6});
    bool pass = true;
    std::string detail;
    for (int order = 1; order <= 3; ++order) {
        const auto traj = integrate_semi_implicit(p0, 0, T, {eps, dt, order}, field);
        const GuidingCenterState start{traj[1].x, traj[1].e};
        const auto limit = integrate_limit(start, dt, T, dt, order, field);
        std::vector<Vec2> x, y;
        std::vector<double> e, g;
        for (std::size_t n = 0; n < limit.size(); ++n) {
            x.push_back(traj[n + 1].x);
            e.push_back(traj[n + 1].e);
            y.push_back(limit[n].y);
            g.push_back(limit[n].g);
        }
        const double err = l1_trajectory_error(std::span<const Vec2>(x), std::span<const Vec2>(y), dt, T) +
                           l1_trajectory_error(std::span<const double>(e), std::span<const double>(g), dt, T);
        pass = pass && err <= 1e-4 && x.size() + 1 == traj.size();
        detail += fmt::format("{}order {}: {:.2e}", order == 1 ? "" : "; ", order, err);
    }
    return {pass, detail};
}

Outcome drift_capture() {
    const ParabolicField field(0.5, false);
    const double dt = 0.01, T = 2.0;
    const ParticleState p0 = make_particle({5, 4}, {5, 6});
    const auto limit = integrate_limit_reference({p0.x, p0.e}, 0, T, dt, 100, field);
    std::vector<double> errs;
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        const auto traj = integrate_semi_implicit(p0, 0, T, {eps, dt, 3}, field);
        double sum = 0.0;
        for (std::size_t n = 1; n < traj.size(); ++n) {
            const Vec2 U = full_drift(field, n * dt, limit[n].y, limit[n].g);
            sum += norm(traj[n].w / eps - U);
        }
        errs.push_back(dt / T * sum);
    }
    const bool pass = errs[0] > errs[1] && errs[1] > errs[2] && errs[2] <= 1e-2;
    return {pass, fmt::format("eps 1e-1/1e-2/1e-3: {:.3e} {:.3e} {:.3e}", errs[0], errs[1], errs[2])};
}

Outcome stiff_velocity() {
    ExperimentConfig cfg = default_config(Family::SingleParticleNoE);
    const double at_one = single_particle_errors(cfg, 1.0, 0.01, 3).w_err_vs_ref;
    const double at_small = single_particle_errors(cfg, 1e-2, 0.01, 3).w_err_vs_ref;
    const double ratio = at_small / at_one;
    return {ratio >= 10.0, fmt::format("eps=1: {:.3e}, eps=1e-2: {:.3e}, ratio {:.1f}", at_one, at_small, ratio)};
}

Outcome energy_conservation() {
    const UniformField field(1.0);
    bool pass = true;
    std::string detail;
    for (int order = 1; order <= 3; ++order) {
        ParticleState s = make_particle({0.5, -1.0}, {1.3, 0.4});
        const double e0 = s.e;
        for (int n = 0; n < 10000; ++n) {
            s = step_semi_implicit(s, n * 0.01, {0.1, 0.01, order}, field);
        }
        pass = pass && s.e == e0;
        detail += fmt::format("{}order {}: {}", order == 1 ? "" : "; ", order, s.e == e0 ? "identical" : "changed");
    }
    return {pass, detail};
}

Outcome poisson_manufactured() {
    bool pass = true;
    double previous = std::numeric_limits<double>::infinity();
    std::string detail;
    for (int n : {33, 65, 129}) {
        Grid g(n);
        for (std::size_t k : g.inside_nodes()) g.rho[k] = 1.0;
        const PoissonReport rep = solve_poisson(g);
        double err = 0.0;
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                if (g.inside(i, j)) {
                    err = std::max(err, std::abs(g.phi[g.index(i, j)] - (36.0 - norm2(g.node(i, j))) / 4.0));
                }
            }
        }
        pass = pass && err < previous && rep.relative_residual <= 1e-10;
        previous = err;
        detail += fmt::format("{}nx={}: err {:.3e} residual {:.1e}", n == 33 ? "" : "; ", n, err,
                              rep.relative_residual);
    }
    return {pass, detail};
}

Outcome deposition_mass() {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-7, 7);
        std::uniform_real_distribution<double> w(0, 1);
        std::vector<ParticleState> particles;
        double inside = 0.0;
        for (int k = 0; k < 20000; ++k) {
            particles.push_back({{u(rng), u(rng)}, 1, {1, 0}, w(rng)});
            if (norm(particles.back().x) < 6.0) inside += particles.back().weight;
        }
        Grid g(seed % 2 ? 65 : 33);
        deposit_charge(particles, g, static_cast<unsigned>(seed % 4 + 1));
        double s = 0.0;
        for (double r : g.rho) s += r;
        worst = std::max(worst, std::abs(s * g.spacing() * g.spacing() - inside) / inside);
    }
    return {worst <= 1e-12, fmt::format("max relative mismatch {:.2e}", worst)};
}

ExperimentConfig desk_scale(double eps, const fs::path& out) {
    ExperimentConfig cfg = default_config(Family::VlasovPoisson);
    cfg.epsilons = {eps};
    cfg.dts = {0.1};
    cfg.orders = {3};
    cfg.T = 10.0;
    cfg.particles = 10000;
    cfg.nx = 65;
    cfg.seed = 1;
    cfg.workers = 1;
    cfg.snapshot_times = {10.0};
    cfg.out_dir = out;
    return cfg;
}

Outcome vlasov_poisson(const fs::path& root) {
    const auto strong = run_vlasov_poisson(desk_scale(1.0, root / "eps_1")).front();
    const auto weak = run_vlasov_poisson(desk_scale(0.05, root / "eps_0.05_a")).front();
    const bool pass = strong.energy_drift <= 0.05 && weak.adiabatic_drift <= 0.05 && weak.max_escaped_fraction <= 0.01;
    return {pass, fmt::format("eps=1 energy drift {:.3e}; eps=0.05 adiabatic drift {:.3e}, max escaped fraction "
                              "{:.3e}",
                              strong.energy_drift, weak.adiabatic_drift, weak.max_escaped_fraction)};
}

Outcome determinism(const fs::path& root) {
    const fs::path first = root / "eps_0.05_a" / "timeseries.csv";
    if (!fs::exists(first)) {
        run_vlasov_poisson(desk_scale(0.05, root / "eps_0.05_a"));
    }
    run_vlasov_poisson(desk_scale(0.05, root / "eps_0.05_b"));
    const std::string a = slurp(first);
    const std::string b = slurp(root / "eps_0.05_b" / "timeseries.csv");
    return {!a.empty() && a == b, fmt::format("{} bytes, {}", a.size(), a == b ? "identical" : "different")};
}

} // namespace

int main() {
    const fs::path root = fs::current_path() / "acceptance_out";
    fs::remove_all(root);
    fs::create_directories(root);

    report(1, "rotation solve exactness", 1, rotation_solve);
    report(2, "convergence orders at eps = 1", 10, convergence_orders);
    report(3, "asymptotic limit at eps = 1e-6", 5, asymptotic_limit);
    report(4, "drift capture", 10, drift_capture);
    report(5, "stiff velocity error growth", 30, stiff_velocity);
    report(6, "energy conservation without forcing", 0, energy_conservation);
    report(7, "Poisson manufactured solution", 10, poisson_manufactured);
    report(8, "deposition mass conservation", 0, deposition_mass);
    report(9, "desk-scale Vlasov-Poisson", 300, [&] { return vlasov_poisson(root); });
    report(10, "determinism", 0, [&] { return determinism(root); });

    fmt::print("{} of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
