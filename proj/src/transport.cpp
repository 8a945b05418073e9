#include "transport.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "parallel.hpp"

namespace mrf {

double ParticleEnsemble::total_weight() const {
    double s = 0;
    for (const auto& p : parts) s += p.w;
    return s;
}

ParticleEnsemble make_ensemble(const Region& region, size_t n, Sampler sampler, uint64_t seed,
                               double total_mass) {
    if (region.is_whole_space()) throw Error("make_ensemble: region must be bounded");
    int d = region.dim();
    Box bb = bounding_box(region);

    ParticleEnsemble ens;
    ens.dim = d;
    ens.mu0.region = region;
    ens.mu0.total_mass = total_mass;
    ens.mu0.sup_density = total_mass / region_volume(region);
    ens.parts.reserve(n);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    uint64_t index = 1;
    size_t guard = 0;
    while (ens.parts.size() < n) {
        if (++guard > 1000 * n + 1000000) throw Error("make_ensemble: rejection sampling stalled");
        Vec u(d);
        if (sampler == Sampler::halton) {
            u = halton_point(index++, d);
        } else {
            for (int i = 0; i < d; ++i) u[i] = uni(rng);
        }
        Vec x(d);
        for (int i = 0; i < d; ++i) x[i] = bb.lo[i] + u[i] * (bb.hi[i] - bb.lo[i]);
        if (signed_margin(region, x) >= 0) ens.parts.push_back({x, 0.0});
    }
    double w = total_mass / n;
    for (auto& p : ens.parts) p.w = w;
    return ens;
}

void integrate_ensemble(ParticleEnsemble& ens, const VectorField& field,
                        const ExhaustionDomain& domain, const IntegratorParams& params,
                        int threads) {
    ens.trajs.assign(ens.parts.size(), Trajectory{});
    parallel_chunks(ens.parts.size(), threads, [&](size_t b, size_t e, int) {
        for (size_t i = b; i < e; ++i)
            ens.trajs[i] = integrate(field, domain, ens.parts[i].x0, params);
    });
}

bool alive_at(const Trajectory& traj, double t, const AliveRule& rule) {
    if (rule.hitting_level) {
        for (const auto& h : traj.hitting)
            if (h.level == *rule.hitting_level) return !(h.hit && h.time <= t);
        return true;  // never exited the level
    }
    // A completed trajectory carries its mass through the final time; a
    // blow-up sheds it at t_max.
    if (traj.termination == Termination::horizon_reached) return t <= traj.t_max_estimate;
    return t < traj.t_max_estimate;
}

DensityEstimate push_forward(const ParticleEnsemble& ens, double t, const GridSpec& grid,
                             const AliveRule& rule, int threads) {
    if (ens.trajs.size() != ens.parts.size())
        throw Error("push_forward: ensemble not integrated");
    int d = ens.dim;
    if (d > 3) throw Error("push_forward: histogram grids restricted to d <= 3");
    int m = grid.cells_per_axis;
    size_t ncells = 1;
    for (int i = 0; i < d; ++i) ncells *= m;

    DensityEstimate est;
    est.grid = grid;
    est.mass.assign(ncells, 0.0);
    est.cell_volume = 1.0;
    for (int i = 0; i < d; ++i) est.cell_volume *= (grid.box.hi[i] - grid.box.lo[i]) / m;

    std::vector<std::vector<double>> partial(kReductionChunks);
    parallel_chunks(ens.parts.size(), threads, [&](size_t b, size_t e, int c) {
        std::vector<double> local(ncells, 0.0);
        for (size_t i = b; i < e; ++i) {
            const Trajectory& tr = ens.trajs[i];
            if (t > tr.final_state.t && tr.termination == Termination::horizon_reached)
                throw Error("push_forward: time beyond the integration horizon");
            if (!alive_at(tr, t, rule)) continue;
            Vec x = sample_at(tr, t).x;
            size_t idx = 0;
            bool inside = true;
            for (int k = 0; k < d; ++k) {
                double u = (x[k] - grid.box.lo[k]) / (grid.box.hi[k] - grid.box.lo[k]);
                int cell = (int)std::floor(u * m);
                if (cell < 0 || cell >= m) { inside = false; break; }
                idx = idx * m + cell;
            }
            if (inside) local[idx] += ens.parts[i].w;
        }
        partial[c] = std::move(local);
    });
    for (auto& local : partial)
        if (!local.empty())
            for (size_t j = 0; j < ncells; ++j) est.mass[j] += local[j];

    for (double mass : est.mass) {
        est.total_mass += mass;
        est.sup_density = std::max(est.sup_density, mass / est.cell_volume);
    }
    return est;
}

CompressionReport measure_compression(ParticleEnsemble& ens, const VectorField& field,
                                      const Region& subdomain, const std::vector<double>& times,
                                      int cells_per_axis, double stat_tol, int threads) {
    const DivergenceBound* bound = field.bound_for(subdomain);
    double L;
    if (bound) {
        L = bound->L;
    } else if (const DivergenceBound* g = field.bound_for(Region(RSpace{field.dim}))) {
        L = g->L;  // a global bound also covers the subdomain
    } else {
        throw Error("measure_compression: no divergence bound declared for " +
                    region_to_string(subdomain));
    }

    ExhaustionDomain dom = ExhaustionDomain::whole_space(field.dim);
    dom.levels.insert(dom.levels.begin(), subdomain);

    IntegratorParams params;
    params.horizon = field.horizon;
    params.store_all = false;
    params.record_times = times;
    std::sort(params.record_times.begin(), params.record_times.end());
    integrate_ensemble(ens, field, dom, params, threads);

    GridSpec grid{bounding_box(subdomain), cells_per_axis};
    AliveRule rule{0};

    CompressionReport rep;
    rep.C_bound = std::exp(L);
    for (double t : times) {
        DensityEstimate est = push_forward(ens, t, grid, rule, threads);
        double C = (est.total_mass > 0) ? est.sup_density / ens.mu0.sup_density : 0.0;
        rep.times.push_back(t);
        rep.C_measured.push_back(C);
        if (est.total_mass == 0) rep.degenerate = true;
        if (C > rep.C_bound * (1 + stat_tol)) rep.bound_violated = true;
    }
    return rep;
}

double TestFunction::operator()(const Vec& x) const {
    double u = (x - center).norm2() / (radius * radius);
    if (u >= 1) return 0;
    double v = 1 - u;
    double v2 = v * v;
    return v2 * v2;
}

Vec TestFunction::gradient(const Vec& x) const {
    Vec g(x.d);
    double u = (x - center).norm2() / (radius * radius);
    if (u >= 1) return g;
    double v = 1 - u;
    axpy(-8.0 * v * v * v / (radius * radius), x - center, g);
    return g;
}

ResidualReport continuity_residual(const ParticleEnsemble& ens, const VectorField& field,
                                   const TestFunction& phi, double t, double dt_fd, int threads) {
    if (t - dt_fd < 0 || t + dt_fd > field.horizon)
        throw Error("continuity_residual: t +- dt_fd outside the horizon");
    if (ens.trajs.size() != ens.parts.size())
        throw Error("continuity_residual: ensemble not integrated");
    AliveRule rule{};

    bool contaminated = false;
    for (const auto& tr : ens.trajs) {
        if (tr.t_max_estimate > t - dt_fd && tr.t_max_estimate <= t + dt_fd &&
            phi(tr.final_state.x) > 0)
            contaminated = true;
    }

    auto mass_at = [&](double s) {
        return parallel_sum(ens.parts.size(), threads, [&](size_t i) {
            if (!alive_at(ens.trajs[i], s, rule)) return 0.0;
            return ens.parts[i].w * phi(sample_at(ens.trajs[i], s).x);
        });
    };
    double dM = (mass_at(t + dt_fd) - mass_at(t - dt_fd)) / (2 * dt_fd);
    double flux = parallel_sum(ens.parts.size(), threads, [&](size_t i) {
        if (!alive_at(ens.trajs[i], t, rule)) return 0.0;
        Vec x = sample_at(ens.trajs[i], t).x;
        return ens.parts[i].w * dot(phi.gradient(x), field(t, x));
    });
    return {std::abs(dM - flux), std::abs(flux), contaminated};
}

LogMomentReport log_moment_functionals(const ParticleEnsemble& ens, const VectorField& field,
                                       const std::vector<double>& t_grid, int threads) {
    if (ens.trajs.size() != ens.parts.size())
        throw Error("log_moment_functionals: ensemble not integrated");
    AliveRule rule{};
    LogMomentReport rep;
    rep.t_grid = t_grid;
    for (double t : t_grid) {
        rep.log_moment.push_back(parallel_sum(ens.parts.size(), threads, [&](size_t i) {
            if (!alive_at(ens.trajs[i], t, rule)) return 0.0;
            return ens.parts[i].w * std::log1p(sample_at(ens.trajs[i], t).x.norm());
        }));
        rep.growth_density.push_back(parallel_sum(ens.parts.size(), threads, [&](size_t i) {
            if (!alive_at(ens.trajs[i], t, rule)) return 0.0;
            Vec x = sample_at(ens.trajs[i], t).x;
            return ens.parts[i].w * field(t, x).norm() / (1.0 + x.norm());
        }));
    }
    for (size_t j = 1; j < t_grid.size(); ++j)
        rep.growth_integral += 0.5 * (t_grid[j] - t_grid[j - 1]) *
                               (rep.growth_density[j] + rep.growth_density[j - 1]);
    return rep;
}

double phi_delta(const ParticleEnsemble& ens, const std::vector<Trajectory>& other, double delta,
                 double t, int threads) {
    if (ens.trajs.size() != ens.parts.size() || other.size() != ens.parts.size())
        throw Error("phi_delta: mismatched particle sets");
    if (delta <= 0) throw Error("phi_delta: delta must be positive");
    return parallel_sum(ens.parts.size(), threads, [&](size_t i) {
        double sep = (sample_at(ens.trajs[i], t).x - sample_at(other[i], t).x).norm();
        return ens.parts[i].w * std::log1p(sep / delta);
    });
}

}  // namespace mrf
