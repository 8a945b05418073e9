#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "integrate.hpp"

namespace mrf {

enum class Sampler { halton, uniform_rng };

struct Measure0 {
    Region region;
    double total_mass = 1.0;
    double sup_density = 0;  // total_mass / volume for the uniform descriptor
};

struct Particle {
    Vec x0;
    double w = 0;
};

struct ParticleEnsemble {
    int dim = 0;
    Measure0 mu0;
    std::vector<Particle> parts;
    std::vector<Trajectory> trajs;  // filled by integrate_ensemble

    double total_weight() const;
};

// Uniform measure on a region, sampled with the deterministic Halton lattice
// (default) or a seeded RNG; weights are total_mass / n.
ParticleEnsemble make_ensemble(const Region& region, size_t n, Sampler sampler = Sampler::halton,
                               uint64_t seed = 0, double total_mass = 1.0);

void integrate_ensemble(ParticleEnsemble& ens, const VectorField& field,
                        const ExhaustionDomain& domain, const IntegratorParams& params,
                        int threads = 1);

struct GridSpec {
    Box box;
    int cells_per_axis = 20;
};

struct DensityEstimate {
    GridSpec grid;
    std::vector<double> mass;  // row-major cell masses
    double cell_volume = 0;
    double sup_density = 0;
    double total_mass = 0;  // mass landing inside the grid
};

// Alive set used when pushing mass forward: either the particle has not yet
// left a compactly contained subdomain (h_{Omega'} > t), or its maximal-time
// estimate exceeds t.
struct AliveRule {
    std::optional<int> hitting_level;  // set: alive iff h_{Omega_level} > t
};

bool alive_at(const Trajectory& traj, double t, const AliveRule& rule);

DensityEstimate push_forward(const ParticleEnsemble& ens, double t, const GridSpec& grid,
                             const AliveRule& rule, int threads = 1);

struct CompressionReport {
    std::vector<double> times;
    std::vector<double> C_measured;
    double C_bound = 0;  // e^{L(Omega',b)}
    bool bound_violated = false;
    bool degenerate = false;
};

// Integrates the ensemble under the field restricted to the subdomain alive
// set and compares histogram sup-densities against e^{L}.
CompressionReport measure_compression(ParticleEnsemble& ens, const VectorField& field,
                                      const Region& subdomain, const std::vector<double>& times,
                                      int cells_per_axis, double stat_tol = 0.1, int threads = 1);

// Smooth compactly supported bump (1 - |x-c|^2/R^2)^4 with analytic gradient.
struct TestFunction {
    Vec center;
    double radius = 1;

    double operator()(const Vec& x) const;
    Vec gradient(const Vec& x) const;
};

struct ResidualReport {
    double residual = 0;
    double flux = 0;  // |sum w grad(phi) . b| reference magnitude
    bool contaminated = false;  // a particle died inside the FD window in supp phi
};

// | d/dt sum w_i phi(X_i) - sum w_i grad phi(X_i) . b(t, X_i) | with a
// centered difference in time.
ResidualReport continuity_residual(const ParticleEnsemble& ens, const VectorField& field,
                                   const TestFunction& phi, double t, double dt_fd,
                                   int threads = 1);

struct LogMomentReport {
    std::vector<double> t_grid;
    std::vector<double> log_moment;      // sum w log(1+|X|) over alive particles
    std::vector<double> growth_density;  // sum w |b|/(1+|X|) over alive particles
    double growth_integral = 0;          // time quadrature of growth_density
};

LogMomentReport log_moment_functionals(const ParticleEnsemble& ens, const VectorField& field,
                                       const std::vector<double>& t_grid, int threads = 1);

// Phi_delta(t) = sum_i w_i log(1 + |X_i(t) - Y_i(t)| / delta) for two flows of
// the same particle set.
double phi_delta(const ParticleEnsemble& ens, const std::vector<Trajectory>& other, double delta,
                 double t, int threads = 1);

}  // namespace mrf
