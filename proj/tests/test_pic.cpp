#include "magpic/pic.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace magpic;

namespace {

double total_charge(const Grid& g) {
    double s = 0.0;
    for (double r : g.rho) s += r;
    return s * g.spacing() * g.spacing();
}

std::vector<ParticleState> random_particles(std::size_t n, std::uint64_t seed, double spread) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-spread, spread);
    std::uniform_real_distribution<double> w(0.0, 2.0);
    std::vector<ParticleState> out;
    for (std::size_t k = 0; k < n; ++k) {
        out.push_back({{u(rng), u(rng)}, 1.0, {0, 0}, w(rng)});
    }
    return out;
}

} // namespace

TEST_CASE("grid geometry") {
    const Grid g(5);
    CHECK(g.spacing() == 3.0);
    CHECK(g.node(0, 0) == Vec2{-6, -6});
    CHECK(g.node(4, 2) == Vec2{6, 0});
    CHECK(g.inside(2, 2));
    CHECK_FALSE(g.inside(4, 2));  // on the circle
    CHECK_FALSE(g.inside(0, 0));
    CHECK(g.inside_count() == 9);
}

TEST_CASE("initial sampling") {
    const ParticleEnsemble ens = sample_initial({}, 100000, 42);
    double mass = 0.0, mean_e = 0.0;
    Vec2 mean_x;
    for (const auto& p : ens.particles) {
        mass += p.weight;
        mean_e += p.e;
        mean_x += p.x;
        CHECK(p.e == 0.5 * norm2(p.w));
    }
    mean_e /= ens.size();
    mean_x = mean_x / static_cast<double>(ens.size());
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(mean_e - 2.0) <= 0.05);
    const double bound = 3.0 * std::sqrt(1.0 + 4.5) / std::sqrt(100000.0);
    CHECK(std::abs(mean_x.v1) <= bound);
    CHECK(std::abs(mean_x.v2) <= bound);

    const ParticleEnsemble again = sample_initial({}, 1000, 42);
    const ParticleEnsemble same = sample_initial({}, 1000, 42);
    for (std::size_t k = 0; k < 1000; ++k) {
        CHECK(again.particles[k].x == same.particles[k].x);
        CHECK(again.particles[k].w == same.particles[k].w);
    }
}

TEST_CASE("charge deposition") {
    Grid g(5);
    const double h2 = 9.0;

    std::vector<ParticleState> node_particle{{{0, 0}, 1, {1, 0}, 1.0}};
    deposit_charge(node_particle, g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        CHECK(g.rho[k] == (k == g.index(2, 2) ? 1.0 / h2 : 0.0));
    }

    std::vector<ParticleState> center_particle{{{1.5, 1.5}, 1, {1, 0}, 1.0}};
    deposit_charge(center_particle, g);
    for (auto [i, j] : {std::pair{2, 2}, {3, 2}, {2, 3}, {3, 3}}) {
        CHECK(g.rho[g.index(i, j)] == doctest::Approx(0.25 / h2));
    }
    CHECK(total_charge(g) == doctest::Approx(1.0));

    deposit_charge({}, g);
    for (double r : g.rho) CHECK(r == 0.0);

    std::vector<ParticleState> escaped{{{5, 5}, 1, {1, 0}, 1.0}, {{0.2, 0.1}, 1, {1, 0}, 0.5}};
    const DepositReport rep = deposit_charge(escaped, g);
    CHECK(rep.escaped == 1);
    CHECK(rep.deposited_mass == 0.5);
}

TEST_CASE("deposition conserves mass for any worker count") {
    const auto particles = random_particles(5000, 9, 7.0);
    double inside = 0.0;
    for (const auto& p : particles) {
        if (norm(p.x) < 6.0) inside += p.weight;
    }
    for (unsigned workers : {1u, 3u, 8u}) {
        Grid g(65);
        const DepositReport rep = deposit_charge(particles, g, workers);
        CHECK(std::abs(total_charge(g) - inside) <= 1e-12 * inside);
        CHECK(rep.deposited_mass == doctest::Approx(inside).epsilon(1e-14));
    }
}

TEST_CASE("Poisson with zero charge") {
    Grid g(17);
    g.phi.assign(g.size(), 3.0);
    const PoissonReport rep = solve_poisson(g);
    CHECK(rep.iterations == 0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        CHECK(g.phi[k] == 0.0);
        CHECK(g.E[k] == Vec2{});
    }
}

TEST_CASE("Poisson manufactured radial solution") {
    double previous = 1e300;
    for (int n : {33, 65}) {
        Grid g(n);
        for (std::size_t k : g.inside_nodes()) g.rho[k] = 1.0;
        const PoissonReport rep = solve_poisson(g);
        CHECK(rep.relative_residual <= 1e-10);
        double err = 0.0;
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                if (!g.inside(i, j)) {
                    CHECK(g.phi[g.index(i, j)] == 0.0);
                    continue;
                }
                const double exact = (36.0 - norm2(g.node(i, j))) / 4.0;
                err = std::max(err, std::abs(g.phi[g.index(i, j)] - exact));
            }
        }
        CHECK(err < previous);
        CHECK(err <= 2.0 * g.spacing());
        previous = err;
        CHECK(g.phi[g.index(n / 2, n / 2)] == doctest::Approx(9.0).epsilon(0.05));
    }
}

TEST_CASE("Poisson preserves point symmetry") {
    Grid g(33);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    const int n = g.nx();
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const std::size_t a = g.index(i, j), b = g.index(n - 1 - i, n - 1 - j);
            if (a <= b) g.rho[a] = g.rho[b] = u(rng);
        }
    }
    solve_poisson(g);
    double scale = 0.0;
    for (double p : g.phi) scale = std::max(scale, std::abs(p));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            CHECK(std::abs(g.phi[g.index(i, j)] - g.phi[g.index(n - 1 - i, n - 1 - j)]) <= 1e-8 * scale);
        }
    }
}

TEST_CASE("field gather") {
    Grid g(9);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-6, 6);
    for (auto& e : g.E) e = {u(rng), u(rng)};
    CHECK(gather_field(g, g.node(3, 5)) == g.E[g.index(3, 5)]);
    CHECK(gather_field(g, {7, 0}) == Vec2{});
    CHECK(gather_field(g, {0, -6.5}) == Vec2{});

    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            const Vec2 x = g.node(i, j);
            g.E[g.index(i, j)] = {0.5 + 2.0 * x.v1 - x.v2, -1.0 + 0.25 * x.v1 + 3.0 * x.v2};
        }
    }
    for (int k = 0; k < 1000; ++k) {
        const Vec2 x{u(rng), u(rng)};
        const Vec2 e = gather_field(g, x);
        CHECK(std::abs(e.v1 - (0.5 + 2.0 * x.v1 - x.v2)) <= 1e-12);
        CHECK(std::abs(e.v2 - (-1.0 + 0.25 * x.v1 + 3.0 * x.v2)) <= 1e-12);
    }
}

TEST_CASE("velocity reconstruction") {
    const Vec2 v = reconstruct_velocity(2.0, {3, 0});
    CHECK(v.v1 == doctest::Approx(2.0));
    CHECK(v.v2 == 0.0);
    const Vec2 w{0.3, -1.7};
    CHECK(norm(reconstruct_velocity(0.5 * norm2(w), w) - w) <= 1e-14);
    CHECK(reconstruct_velocity(1.0, {0, 0}) == Vec2{});
}

TEST_CASE("self-consistent step without charge is the external push") {
    const DiskConfinementField magnetic;
    ParticleEnsemble ens;
    ens.particles = {{{1, 0.5}, 2.0, {1.2, 1.6}, 0.0}};
    Grid g(17);
    const ParticleState expected = step_semi_implicit(ens.particles[0], 0, {0.5, 0.1, 3}, magnetic);
    vp_step(ens, g, 0, {0.5, 0.1, 3}, magnetic);
    for (const Vec2& e : g.E) CHECK(e == Vec2{});
    CHECK(ens.particles[0].x == expected.x);
    CHECK(ens.particles[0].w == expected.w);
    CHECK(ens.particles[0].e == expected.e);
}

TEST_CASE("self-consistent step keeps point symmetry") {
    const DiskConfinementField magnetic;
    ParticleEnsemble ens;
    ens.particles = {{{1.3, -0.4}, 1.25, {1.0, 1.5}, 0.5}, {{-1.3, 0.4}, 1.25, {-1.0, -1.5}, 0.5}};
    Grid g(33);
    for (int n = 0; n < 3; ++n) {
        vp_step(ens, g, n * 0.1, {1.0, 0.1, 3}, magnetic);
        const auto& a = ens.particles[0];
        const auto& b = ens.particles[1];
        CHECK(norm(a.x + b.x) <= 1e-9);
        CHECK(norm(a.w + b.w) <= 1e-9);
        CHECK(std::abs(a.e - b.e) <= 1e-9);
    }
}

TEST_CASE("one ensemble step keeps deposition and solver invariants") {
    const DiskConfinementField magnetic;
    ParticleEnsemble ens = sample_initial({}, 1000, 3);
    Grid g(65);
    const FieldUpdateReport rep = vp_step(ens, g, 0, {1.0, 0.1, 3}, magnetic, 2);
    double inside = 0.0;
    for (const auto& p : sample_initial({}, 1000, 3).particles) {
        if (norm(p.x) < 6.0) inside += p.weight;
    }
    CHECK(std::abs(total_charge(g) - inside) <= 1e-12 * inside);
    CHECK(rep.poisson.relative_residual <= 1e-10);
    const FieldUpdateReport after = update_self_consistent_field(ens, g);
    CHECK(after.poisson.relative_residual <= 1e-10);
}

TEST_CASE("density snapshot layout") {
    Grid g(5);
    g.rho[g.index(1, 0)] = 0.5;
    std::ostringstream os;
    write_density_snapshot(os, g, 10.0);
    std::istringstream in(os.str());
    int nx = 0, ny = 0;
    double L = 0, t = 0;
    in >> nx >> ny >> L >> t;
    CHECK(nx == 5);
    CHECK(ny == 5);
    CHECK(L == 6.0);
    CHECK(t == 10.0);
    std::vector<double> values;
    for (double v; in >> v;) values.push_back(v);
    REQUIRE(values.size() == 25);
    CHECK(values[1] == 0.5);
}
