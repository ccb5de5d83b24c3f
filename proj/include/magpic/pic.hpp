#pragma once

#include "magpic/fields.hpp"
#include "magpic/integrators.hpp"
#include "magpic/vec2.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace magpic {

/// Uniform node-centred mesh over [-L, L]^2 with a mask for the open disk |x| < L.
///
/// Nodes are stored row-major with y outer: index(i, j) = j * nx + i, node
/// (i, j) sits at (-L + i h, -L + j h). Nodes outside the disk (including the
/// ones on the circle) carry homogeneous Dirichlet data phi = 0.
class Grid {
public:
    Grid(int n, double L = 6.0);

    int nx() const noexcept { return n_; }
    int ny() const noexcept { return n_; }
    double extent() const noexcept { return L_; }
    double spacing() const noexcept { return h_; }
    std::size_t size() const noexcept { return rho.size(); }

    std::size_t index(int i, int j) const noexcept { return static_cast<std::size_t>(j) * n_ + i; }
    Vec2 node(int i, int j) const noexcept { return {-L_ + i * h_, -L_ + j * h_}; }
    bool inside(int i, int j) const noexcept { return mask_[index(i, j)] != 0; }
    std::size_t inside_count() const noexcept { return inside_nodes_.size(); }
    /// Flat indices of the inside nodes in increasing order.
    const std::vector<std::size_t>& inside_nodes() const noexcept { return inside_nodes_; }

    /// True when x lies in the open disk of radius L.
    bool in_domain(const Vec2& x) const noexcept { return norm2(x) < L_ * L_; }

    std::vector<double> rho;
    std::vector<double> phi;
    std::vector<Vec2> E;

private:
    int n_;
    double L_;
    double h_;
    std::vector<std::uint8_t> mask_;
    std::vector<std::size_t> inside_nodes_;
};

/// Two-Gaussian spatial mixture times a centred Maxwellian in velocity.
struct InitialDataSpec {
    Vec2 center{1.5, -1.5};
    double position_variance = 1.0;
    double velocity_variance = 2.0;
    double total_mass = 1.0;
};

struct ParticleEnsemble {
    std::vector<ParticleState> particles;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return particles.size(); }
};

/// Draws N macro-particles on the constraint manifold (w = v, e = |v|^2/2)
/// with equal weights total_mass / N. Deterministic for a given seed.
ParticleEnsemble sample_initial(const InitialDataSpec& spec, std::size_t N, std::uint64_t seed);

struct DepositReport {
    std::size_t escaped = 0;
    double deposited_mass = 0.0;
};

/// Cloud-in-cell deposition of particles in the open disk; particles with
/// |x| >= L are skipped and counted as escaped. Accumulation runs over
/// `workers` contiguous partitions merged in partition order.
DepositReport deposit_charge(std::span<const ParticleState> particles, Grid& grid, unsigned workers = 1);

class PoissonSolverError : public std::runtime_error {
public:
    PoissonSolverError(std::size_t iterations, double residual);
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

struct PoissonOptions {
    double relative_tolerance = 1e-10;
    std::size_t max_iterations = 20000;
};

struct PoissonReport {
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

/// Solves -Lap_h phi = rho (5-point stencil) on inside nodes by conjugate
/// gradient, warm-started from grid.phi, then fills grid.E = -grad_h phi.
/// Central differences at inside nodes; one-sided differences towards the
/// disk at masked nodes adjacent to it; zero elsewhere.
PoissonReport solve_poisson(Grid& grid, const PoissonOptions& options = {});

/// Applies the masked 5-point operator -Lap_h to `phi` (zero outside the mask).
std::vector<double> apply_negative_laplacian(const Grid& grid, std::span<const double> phi);

/// Bilinear interpolation of grid.E; zero outside [-L, L]^2.
Vec2 gather_field(const Grid& grid, const Vec2& x);

/// Physical velocity sqrt(2 max(e, 0)) w / |w|, or zero for |w| <= 1e-14.
Vec2 reconstruct_velocity(double e, const Vec2& w);

/// External magnetic field combined with the electric field gathered from a
/// grid. The grid is not copied; it must outlive this object and stay
/// unchanged while the object is in use.
class GridElectricField final : public FieldModel {
public:
    GridElectricField(const Grid& grid, const FieldModel& magnetic) : grid_(grid), magnetic_(magnetic) {}

    double b(double t, const Vec2& x) const override { return magnetic_.b(t, x); }
    Vec2 grad_log_b(double t, const Vec2& x) const override { return magnetic_.grad_log_b(t, x); }
    Vec2 E(double, const Vec2& x) const override { return gather_field(grid_, x); }
    double b_floor() const override { return magnetic_.b_floor(); }
    FieldSample sample(double t, const Vec2& x) const override;

private:
    const Grid& grid_;
    const FieldModel& magnetic_;
};

/// Deposit + Poisson solve for the current particle positions.
struct FieldUpdateReport {
    DepositReport deposit;
    PoissonReport poisson;
};
FieldUpdateReport update_self_consistent_field(const ParticleEnsemble& ensemble, Grid& grid,
                                               const PoissonOptions& options = {}, unsigned workers = 1);

/// Advances every particle by one step of the selected scheme in `model`.
void push_ensemble(ParticleEnsemble& ensemble, double t, const SchemeParams& p, const FieldModel& model,
                   unsigned workers = 1);

/// One PIC step: deposit, solve, then push all particles with E frozen at
/// the field of the current density for every stage of the step.
FieldUpdateReport vp_step(ParticleEnsemble& ensemble, Grid& grid, double t, const SchemeParams& p,
                          const FieldModel& magnetic, unsigned workers = 1,
                          const PoissonOptions& options = {});

/// Header `nx ny L t`, then ny rows of nx densities, lowest y first.
void write_density_snapshot(std::ostream& os, const Grid& grid, double t);

/// CSV `id,x1,x2,e,w1,w2,weight`.
void write_particles_csv(std::ostream& os, const ParticleEnsemble& ensemble);

} // namespace magpic
