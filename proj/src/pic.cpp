#include "magpic/pic.hpp"

#include "parallel.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <ostream>
#include <random>

namespace magpic {

Grid::Grid(int n, double L) : n_(n), L_(L) {
    if (n < 3) {
        throw std::invalid_argument(fmt::format("grid needs at least 3 nodes per side, got {}", n));
    }
    if (!(L > 0.0)) {
        throw std::invalid_argument(fmt::format("grid half-width must be positive, got {}", L));
    }
    h_ = 2.0 * L / (n - 1);
    const auto total = static_cast<std::size_t>(n) * n;
    rho.assign(total, 0.0);
    phi.assign(total, 0.0);
    E.assign(total, Vec2{});
    mask_.assign(total, 0);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            if (in_domain(node(i, j))) {
                mask_[index(i, j)] = 1;
                inside_nodes_.push_back(index(i, j));
            }
        }
    }
}

ParticleEnsemble sample_initial(const InitialDataSpec& spec, std::size_t N, std::uint64_t seed) {
    if (N == 0) {
        throw std::invalid_argument("sample_initial: need at least one particle");
    }
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::normal_distribution<double> position(0.0, std::sqrt(spec.position_variance));
    std::normal_distribution<double> velocity(0.0, std::sqrt(spec.velocity_variance));

    ParticleEnsemble out;
    out.seed = seed;
    out.particles.reserve(N);
    const double weight = spec.total_mass / static_cast<double>(N);
    for (std::size_t k = 0; k < N; ++k) {
        const Vec2 center = coin(rng) ? spec.center : -spec.center;
        const double x1 = position(rng);
        const double x2 = position(rng);
        const double v1 = velocity(rng);
        const double v2 = velocity(rng);
        out.particles.push_back(make_particle(center + Vec2{x1, x2}, {v1, v2}, weight));
    }
    return out;
}

namespace {

/// Lower-left node index and fractional offsets of x in the cell containing it.
struct CellLocation {
    int i = 0;
    int j = 0;
    double tx = 0.0;
    double ty = 0.0;
};

CellLocation locate(const Grid& grid, const Vec2& x) {
    const double h = grid.spacing();
    const double L = grid.extent();
    const int last = grid.nx() - 2;
    const double fx = (x.v1 + L) / h;
    const double fy = (x.v2 + L) / h;
    const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, last);
    const int j = std::clamp(static_cast<int>(std::floor(fy)), 0, last);
    return {i, j, fx - i, fy - j};
}

void deposit_range(std::span<const ParticleState> particles, const Grid& grid, std::vector<double>& rho,
                   DepositReport& report) {
    const double inv_area = 1.0 / (grid.spacing() * grid.spacing());
    for (const ParticleState& p : particles) {
        if (!grid.in_domain(p.x)) {
            ++report.escaped;
            continue;
        }
        const CellLocation c = locate(grid, p.x);
        const double q = p.weight * inv_area;
        rho[grid.index(c.i, c.j)] += q * (1.0 - c.tx) * (1.0 - c.ty);
        rho[grid.index(c.i + 1, c.j)] += q * c.tx * (1.0 - c.ty);
        rho[grid.index(c.i, c.j + 1)] += q * (1.0 - c.tx) * c.ty;
        rho[grid.index(c.i + 1, c.j + 1)] += q * c.tx * c.ty;
        report.deposited_mass += p.weight;
    }
}

} // namespace

DepositReport deposit_charge(std::span<const ParticleState> particles, Grid& grid, unsigned workers) {
    std::fill(grid.rho.begin(), grid.rho.end(), 0.0);
    const std::size_t chunks = detail::chunk_count(particles.size(), workers);
    if (chunks == 1) {
        DepositReport report;
        deposit_range(particles, grid, grid.rho, report);
        return report;
    }
    std::vector<std::vector<double>> buffers(chunks, std::vector<double>(grid.size(), 0.0));
    std::vector<DepositReport> reports(chunks);
    detail::for_each_chunk(particles.size(), workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
        deposit_range(particles.subspan(begin, end - begin), grid, buffers[c], reports[c]);
    });
    DepositReport total;
    for (std::size_t c = 0; c < chunks; ++c) {
        for (std::size_t k = 0; k < grid.size(); ++k) {
            grid.rho[k] += buffers[c][k];
        }
        total.escaped += reports[c].escaped;
        total.deposited_mass += reports[c].deposited_mass;
    }
    return total;
}

PoissonSolverError::PoissonSolverError(std::size_t iterations, double residual)
    : std::runtime_error(fmt::format("conjugate gradient did not converge after {} iterations "
                                     "(relative residual {:.3e})",
                                     iterations, residual)),
      residual_(residual) {}

std::vector<double> apply_negative_laplacian(const Grid& grid, std::span<const double> phi) {
    const int n = grid.nx();
    const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    std::vector<double> out(grid.size(), 0.0);
    auto value = [&](int i, int j) { return grid.inside(i, j) ? phi[grid.index(i, j)] : 0.0; };
    for (std::size_t k : grid.inside_nodes()) {
        const int i = static_cast<int>(k % n);
        const int j = static_cast<int>(k / n);
        out[k] = (4.0 * phi[k] - value(i - 1, j) - value(i + 1, j) - value(i, j - 1) - value(i, j + 1)) * inv_h2;
    }
    return out;
}

namespace {

double masked_dot(const Grid& grid, const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k : grid.inside_nodes()) {
        s += a[k] * b[k];
    }
    return s;
}

void fill_electric_field(Grid& grid) {
    const int n = grid.nx();
    const double h = grid.spacing();
    // -d(phi)/ds along one axis at node (i, j); (di, dj) is the unit step.
    auto component = [&](int i, int j, int di, int dj) -> double {
        const bool lo_ok = i - di >= 0 && j - dj >= 0;
        const bool hi_ok = i + di < n && j + dj < n;
        const double phi0 = grid.phi[grid.index(i, j)];
        if (grid.inside(i, j)) {
            return -(grid.phi[grid.index(i + di, j + dj)] - grid.phi[grid.index(i - di, j - dj)]) / (2.0 * h);
        }
        if (hi_ok && grid.inside(i + di, j + dj)) {
            return -(grid.phi[grid.index(i + di, j + dj)] - phi0) / h;
        }
        if (lo_ok && grid.inside(i - di, j - dj)) {
            return -(phi0 - grid.phi[grid.index(i - di, j - dj)]) / h;
        }
        return 0.0;
    };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            grid.E[grid.index(i, j)] = {component(i, j, 1, 0), component(i, j, 0, 1)};
        }
    }
}

} // namespace

PoissonReport solve_poisson(Grid& grid, const PoissonOptions& options) {
    const auto& nodes = grid.inside_nodes();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!grid.inside(static_cast<int>(k % grid.nx()), static_cast<int>(k / grid.nx()))) {
            grid.phi[k] = 0.0;
        }
    }
    double b_norm2 = 0.0;
    for (std::size_t k : nodes) {
        b_norm2 += grid.rho[k] * grid.rho[k];
    }
    if (b_norm2 == 0.0) {
        std::fill(grid.phi.begin(), grid.phi.end(), 0.0);
        std::fill(grid.E.begin(), grid.E.end(), Vec2{});
        return {};
    }
    const double b_norm = std::sqrt(b_norm2);
    const double target = options.relative_tolerance * b_norm;

    std::vector<double>& x = grid.phi;
    std::vector<double> r(grid.size(), 0.0);
    std::vector<double> p(grid.size(), 0.0);
    std::size_t iterations = 0;
    double true_residual = 0.0;

    // Outer loop re-derives the residual from scratch so the reported value is
    // the true one, not the recursively updated estimate.
    for (;;) {
        const std::vector<double> Ax = apply_negative_laplacian(grid, x);
        for (std::size_t k : nodes) {
            r[k] = grid.rho[k] - Ax[k];
        }
        double rs = masked_dot(grid, r, r);
        true_residual = std::sqrt(rs);
        if (true_residual <= target) {
            break;
        }
        if (iterations >= options.max_iterations) {
            throw PoissonSolverError(iterations, true_residual / b_norm);
        }
        p = r;
        while (iterations < options.max_iterations && std::sqrt(rs) > 0.5 * target) {
            const std::vector<double> Ap = apply_negative_laplacian(grid, p);
            const double alpha = rs / masked_dot(grid, p, Ap);
            for (std::size_t k : nodes) {
                x[k] += alpha * p[k];
                r[k] -= alpha * Ap[k];
            }
            const double rs_new = masked_dot(grid, r, r);
            const double beta = rs_new / rs;
            for (std::size_t k : nodes) {
                p[k] = r[k] + beta * p[k];
            }
            rs = rs_new;
            ++iterations;
        }
    }
    fill_electric_field(grid);
    return {iterations, true_residual / b_norm};
}

Vec2 gather_field(const Grid& grid, const Vec2& x) {
    const double L = grid.extent();
    if (!(std::abs(x.v1) <= L && std::abs(x.v2) <= L)) {
        return {};
    }
    const CellLocation c = locate(grid, x);
    const Vec2& e00 = grid.E[grid.index(c.i, c.j)];
    const Vec2& e10 = grid.E[grid.index(c.i + 1, c.j)];
    const Vec2& e01 = grid.E[grid.index(c.i, c.j + 1)];
    const Vec2& e11 = grid.E[grid.index(c.i + 1, c.j + 1)];
    return (1.0 - c.ty) * ((1.0 - c.tx) * e00 + c.tx * e10) + c.ty * ((1.0 - c.tx) * e01 + c.tx * e11);
}

Vec2 reconstruct_velocity(double e, const Vec2& w) {
    const double w_norm = norm(w);
    if (w_norm <= 1e-14) {
        return {};
    }
    return (std::sqrt(2.0 * std::max(e, 0.0)) / w_norm) * w;
}

FieldSample GridElectricField::sample(double t, const Vec2& x) const {
    FieldSample f = magnetic_.sample(t, x);
    f.E = gather_field(grid_, x);
    return f;
}

FieldUpdateReport update_self_consistent_field(const ParticleEnsemble& ensemble, Grid& grid,
                                               const PoissonOptions& options, unsigned workers) {
    FieldUpdateReport report;
    report.deposit = deposit_charge(ensemble.particles, grid, workers);
    report.poisson = solve_poisson(grid, options);
    return report;
}

void push_ensemble(ParticleEnsemble& ensemble, double t, const SchemeParams& p, const FieldModel& model,
                   unsigned workers) {
    p.validate();
    auto& particles = ensemble.particles;
    detail::for_each_chunk(particles.size(), workers, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            particles[k] = step_semi_implicit(particles[k], t, p, model);
        }
    });
}

FieldUpdateReport vp_step(ParticleEnsemble& ensemble, Grid& grid, double t, const SchemeParams& p,
                          const FieldModel& magnetic, unsigned workers, const PoissonOptions& options) {
    const FieldUpdateReport report = update_self_consistent_field(ensemble, grid, options, workers);
    const GridElectricField frozen(grid, magnetic);
    push_ensemble(ensemble, t, p, frozen, workers);
    return report;
}

void write_density_snapshot(std::ostream& os, const Grid& grid, double t) {
    fmt::print(os, "{} {} {} {}\n", grid.nx(), grid.ny(), grid.extent(), t);
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            fmt::print(os, i == 0 ? "{:.10e}" : " {:.10e}", grid.rho[grid.index(i, j)]);
        }
        os << '\n';
    }
}

void write_particles_csv(std::ostream& os, const ParticleEnsemble& ensemble) {
    os << "id,x1,x2,e,w1,w2,weight\n";
    for (std::size_t k = 0; k < ensemble.size(); ++k) {
        const ParticleState& p = ensemble.particles[k];
        fmt::print(os, "{},{},{},{},{},{},{}\n", k, p.x.v1, p.x.v2, p.e, p.w.v1, p.w.v2, p.weight);
    }
}

} // namespace magpic
