#include "diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "json.hpp"
#include "parallel.hpp"

namespace mrf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double level0_hitting(const Trajectory& traj) {
    for (const auto& h : traj.hitting)
        if (h.level == 0) return h.time;
    return kInf;
}

// Stopped flow: the trajectory frozen at its own exit time from the level-0
// region.
Vec stopped_position(const Trajectory& traj, double s) {
    for (const auto& h : traj.hitting)
        if (h.level == 0 && h.hit && s >= h.time) return h.exit_point;
    return sample_at(traj, s).x;
}

}  // namespace

std::string report_to_json(const DiagnosticsReport& rep) {
    nlohmann::json j;
    j["schema"] = "diagnostics-report/1";
    auto& arr = j["checks"];
    arr = nlohmann::json::array();
    for (const auto& c : rep.checks) {
        nlohmann::json e;
        e["check"] = c.check;
        for (const auto& [k, v] : c.metrics) e["metrics"][k] = v;
        e["bound"] = c.bound;
        e["tolerance"] = c.tolerance;
        e["pass"] = c.pass;
        if (c.refused) e["refused"] = true;
        if (!c.note.empty()) e["note"] = c.note;
        e["samples"] = c.samples;
        e["wall_seconds"] = c.wall_seconds;
        arr.push_back(std::move(e));
    }
    return j.dump(2);
}

CheckResult check_semigroup(const VectorField& field, const ExhaustionDomain& domain,
                            const std::vector<Vec>& xs, double s, double t,
                            const IntegratorParams& params, double tol) {
    auto t0 = Clock::now();
    if (!(0 <= s && s < t && t <= params.horizon))
        throw Error("check_semigroup: need 0 <= s < t <= horizon");

    double max_defect = 0, max_tmax_defect = 0;
    long compared = 0, blowups = 0;
    for (const Vec& x : xs) {
        Trajectory a = integrate(field, domain, x, params);
        if (a.t_max_estimate <= s) continue;
        Vec xs_mid = sample_at(a, s).x;
        Trajectory b = integrate(field, domain, xs_mid, params, s);
        if (a.t_max_estimate > t && b.t_max_estimate > t) {
            double defect = (sample_at(b, t).x - sample_at(a, t).x).norm();
            max_defect = std::max(max_defect, defect);
            ++compared;
        }
        if (a.termination == Termination::blowup_declared) {
            max_tmax_defect =
                std::max(max_tmax_defect, std::abs(b.t_max_estimate - a.t_max_estimate));
            ++blowups;
        }
    }

    CheckResult res;
    res.check = "semigroup";
    res.metrics = {{"max_defect", max_defect},
                   {"max_tmax_defect", max_tmax_defect},
                   {"compared", (double)compared},
                   {"blowups_compared", (double)blowups}};
    res.tolerance = tol;
    res.samples = (long)xs.size();
    res.pass = (max_defect <= tol) && (max_tmax_defect <= 2 * params.dt_max);
    res.wall_seconds = seconds_since(t0);
    return res;
}

namespace {

struct StabilityFlows {
    ParticleEnsemble ens;
    std::vector<double> href;                    // h_A along the reference flow
    std::vector<std::vector<double>> happrox;    // per epsilon
    std::vector<double> distances;               // truncated-sup L1 per epsilon
    std::vector<double> fractions;               // semicontinuity defect per epsilon
    double weight = 0;
    long alive = 0;
};

StabilityFlows run_stability_flows(const VectorField& field, const StabilityParams& sp,
                                   const IntegratorParams& params, int threads) {
    if (sp.epsilons.empty()) throw Error("stability: empty epsilon sequence");
    for (size_t i = 1; i < sp.epsilons.size(); ++i)
        if (sp.epsilons[i] > sp.epsilons[i - 1])
            throw Error("stability: epsilon sequence must be decreasing");
    if (sp.t <= 0 || sp.t > params.horizon)
        throw Error("stability: t must lie in (0, horizon]");

    ExhaustionDomain dom = ExhaustionDomain::whole_space(field.dim);
    dom.levels.insert(dom.levels.begin(), sp.A);

    StabilityFlows fl;
    fl.ens = make_ensemble(sp.seed, sp.particles, Sampler::halton);
    fl.weight = region_volume(sp.seed) / sp.particles;
    integrate_ensemble(fl.ens, field, dom, params, threads);
    size_t n = fl.ens.parts.size();
    fl.href.resize(n);
    for (size_t i = 0; i < n; ++i) {
        fl.href[i] = level0_hitting(fl.ens.trajs[i]);
        if (fl.href[i] > sp.t) ++fl.alive;
    }

    int m = sp.sup_grid;
    for (double eps : sp.epsilons) {
        VectorField feps =
            (eps > 0) ? mollify(field, {eps, sp.quadrature_points}, sp.clip) : field;
        std::vector<double> h(n, kInf), dist(n, 0.0);
        parallel_chunks(n, threads, [&](size_t b, size_t e, int) {
            for (size_t i = b; i < e; ++i) {
                Trajectory tr = integrate(feps, dom, fl.ens.parts[i].x0, params);
                h[i] = level0_hitting(tr);
                if (fl.href[i] <= sp.t) continue;
                double sup = 0;
                for (int q = 0; q <= m; ++q) {
                    double s = sp.t * q / m;
                    sup = std::max(sup,
                                   (stopped_position(tr, s) - sample_at(fl.ens.trajs[i], s).x)
                                       .norm());
                }
                dist[i] = std::min(sup, 1.0);
            }
        });
        double l1 = 0;
        long early = 0;
        for (size_t i = 0; i < n; ++i) {
            l1 += fl.weight * dist[i];
            if (h[i] <= sp.t && fl.href[i] > sp.t) ++early;
        }
        fl.happrox.push_back(std::move(h));
        fl.distances.push_back(l1);
        fl.fractions.push_back(fl.alive ? (double)early / fl.alive : 0.0);
    }
    return fl;
}

}  // namespace

CheckResult check_stability(const VectorField& field, const StabilityParams& sp,
                            const IntegratorParams& params, int threads) {
    auto t0 = Clock::now();
    StabilityFlows fl = run_stability_flows(field, sp, params, threads);

    CheckResult res;
    res.check = "stability";
    bool monotone = true;
    for (size_t i = 0; i < sp.epsilons.size(); ++i) {
        char key[48];
        std::snprintf(key, sizeof key, "dist[eps=%g]", sp.epsilons[i]);
        res.metrics.emplace_back(key, fl.distances[i]);
        if (i > 0 && fl.distances[i] > fl.distances[i - 1] * 1.2 + 1e-12) monotone = false;
    }
    res.metrics.emplace_back("alive_fraction", fl.alive / (double)sp.particles);
    res.tolerance = sp.final_tol;
    res.samples = (long)sp.particles;
    res.pass = monotone && fl.distances.back() <= sp.final_tol;
    if (!monotone) res.note = "distances not nonincreasing along the epsilon sequence";
    res.wall_seconds = seconds_since(t0);
    return res;
}

CheckResult check_hitting_semicontinuity(const VectorField& field, const StabilityParams& sp,
                                         const IntegratorParams& params, int threads) {
    auto t0 = Clock::now();
    StabilityFlows fl = run_stability_flows(field, sp, params, threads);
    size_t n = fl.ens.parts.size();

    CheckResult res;
    res.check = "hitting-semicontinuity";
    bool monotone = true;
    for (size_t i = 0; i < sp.epsilons.size(); ++i) {
        char key[48];
        std::snprintf(key, sizeof key, "fraction[eps=%g]", sp.epsilons[i]);
        res.metrics.emplace_back(key, fl.fractions[i]);
        if (i > 0 && fl.fractions[i] > fl.fractions[i - 1] + 0.01) monotone = false;
    }

    // h_A(X) <= min over the two finest approximations, up to time tolerance
    double lsc_tol = 2 * params.dt_max;
    long lsc_ok = 0;
    size_t ne = fl.happrox.size();
    for (size_t i = 0; i < n; ++i) {
        double ha = std::min(fl.happrox[ne - 1][i], ne >= 2 ? fl.happrox[ne - 2][i] : kInf);
        double hx = std::min(fl.href[i], params.horizon);
        ha = std::min(ha, params.horizon);
        if (hx <= ha + lsc_tol) ++lsc_ok;
    }
    double lsc_frac = (double)lsc_ok / n;
    res.metrics.emplace_back("liminf_ok_fraction", lsc_frac);
    res.samples = (long)n;
    res.tolerance = 0.01;
    res.pass = monotone && lsc_frac >= 0.99;
    res.wall_seconds = seconds_since(t0);
    return res;
}

CheckResult check_proper_blowup(const VectorField& field, const ExhaustionDomain& domain,
                                const ProperBlowupParams& pp, const IntegratorParams& params,
                                int threads) {
    auto t0 = Clock::now();
    CheckResult res;
    res.check = "proper-blowup";
    res.samples = (long)pp.particles;

    if (!field.global_bound(domain.omega)) {
        res.refused = true;
        res.pass = false;
        res.note =
            "precondition violated: field declares no global divergence bound on the domain";
        res.wall_seconds = seconds_since(t0);
        return res;
    }

    ParticleEnsemble ens = make_ensemble(pp.seed, pp.particles, Sampler::halton);
    double geom_tol =
        domain.bounded ? pp.boundary_tol_rel * region_diameter(domain.omega) : 0.0;

    struct Acc {
        long blowup = 0, proper = 0, osc = 0, none = 0, on_boundary = 0;
    };
    std::vector<Acc> acc(kReductionChunks);
    parallel_chunks(ens.parts.size(), threads, [&](size_t b, size_t e, int c) {
        for (size_t i = b; i < e; ++i) {
            Trajectory tr = integrate(field, domain, ens.parts[i].x0, params);
            ClassifyParams cp = pp.classify;
            cp.window = std::min<int>(cp.window, (int)tr.samples.size());
            BlowupClass bc = classify_blowup(tr, domain, cp);
            if (tr.termination == Termination::blowup_declared) {
                ++acc[c].blowup;
                if (bc == BlowupClass::proper) ++acc[c].proper;
                if (bc == BlowupClass::oscillating) ++acc[c].osc;
                if (domain.bounded &&
                    std::abs(signed_margin(domain.omega, tr.final_state.x)) <= geom_tol)
                    ++acc[c].on_boundary;
            } else if (bc == BlowupClass::none) {
                ++acc[c].none;
            }
        }
    });
    Acc total;
    for (const auto& a : acc) {
        total.blowup += a.blowup;
        total.proper += a.proper;
        total.osc += a.osc;
        total.none += a.none;
        total.on_boundary += a.on_boundary;
    }

    double boundary_frac =
        total.blowup ? (double)total.on_boundary / total.blowup : 1.0;
    res.metrics = {{"blowups", (double)total.blowup},
                   {"proper", (double)total.proper},
                   {"oscillating", (double)total.osc},
                   {"none", (double)total.none},
                   {"boundary_fraction", domain.bounded ? boundary_frac : 1.0}};
    res.tolerance = pp.tol_frac;
    res.pass = (total.osc == 0) &&
               (!domain.bounded || total.blowup == 0 || boundary_frac >= 1.0 - pp.tol_frac);
    res.wall_seconds = seconds_since(t0);
    return res;
}

namespace {

// Refine the time where |x(t)| = c inside the bracketing sample interval.
double radius_cross_time(const Trajectory& traj, double ta, double tb, double c) {
    double fa = sample_at(traj, ta).x.norm() - c;
    for (int it = 0; it < 80 && tb - ta > 1e-14; ++it) {
        double tm = 0.5 * (ta + tb);
        double fm = sample_at(traj, tm).x.norm() - c;
        if ((fa <= 0) == (fm <= 0)) {
            ta = tm;
            fa = fm;
        } else {
            tb = tm;
        }
    }
    return 0.5 * (ta + tb);
}

}  // namespace

CrossingAnalysis check_crossing_time(const VectorField& field,
                                     const std::vector<Trajectory>& trajs, double R,
                                     const std::function<double(double)>& f_analytic,
                                     int n_angles, int n_radii) {
    if (field.dim != 2) throw Error("check_crossing_time: field must be 2D");
    if (R <= 0) throw Error("check_crossing_time: R must be positive");

    CrossingAnalysis ca;
    ca.R = R;
    ca.analytic_profile = static_cast<bool>(f_analytic);
    for (int i = 0; i < n_radii; ++i) {
        double r = R + (double)i / (n_radii - 1);
        double f;
        if (f_analytic) {
            f = f_analytic(r);
        } else {
            f = 0;
            for (int a = 0; a < n_angles; ++a) {
                double th = 2 * M_PI * a / n_angles;
                Vec x(2);
                x[0] = r * std::cos(th);
                x[1] = r * std::sin(th);
                f = std::max(f, field(0.0, x).norm());
            }
        }
        ca.r_grid.push_back(r);
        ca.f_values.push_back(f);
    }
    for (int i = 0; i + 1 < n_radii; ++i)
        ca.f_integral += 0.5 * (ca.f_values[i] + ca.f_values[i + 1]) *
                         (ca.r_grid[i + 1] - ca.r_grid[i]);

    for (const auto& traj : trajs) {
        double entry = -1;
        double sigma = 0, sigma_prev = 0;
        double prev_r = traj.samples.empty() ? 0 : traj.samples.front().x.norm();
        for (size_t i = 0; i + 1 < traj.samples.size(); ++i) {
            double ta = traj.samples[i].t, tb = traj.samples[i + 1].t;
            double rb = traj.samples[i + 1].x.norm();
            sigma_prev = sigma;
            sigma = std::max(sigma, rb);
            if (sigma < sigma_prev) ca.sigma_monotone = false;
            if (prev_r < R && rb >= R) entry = radius_cross_time(traj, ta, tb, R);
            if (prev_r < R + 1 && rb >= R + 1 && entry >= 0) {
                double exit = radius_cross_time(traj, ta, tb, R + 1);
                double tau = exit - entry;
                ca.crossings.push_back({entry, exit, tau, tau * ca.f_integral});
                ca.min_ratio = std::min(ca.min_ratio, tau * ca.f_integral);
                entry = -1;
            }
            if (rb < R) entry = -1;
            prev_r = rb;
        }
    }
    ca.degenerate = ca.crossings.empty();
    return ca;
}

CheckResult crossing_check(const CrossingAnalysis& ca, double tol) {
    CheckResult res;
    res.check = "crossing-time";
    res.metrics = {{"f_integral", ca.f_integral},
                   {"crossings", (double)ca.crossings.size()},
                   {"min_ratio", ca.degenerate ? 0.0 : ca.min_ratio}};
    res.bound = 1.0;
    res.tolerance = tol;
    res.samples = (long)ca.crossings.size();
    if (ca.degenerate) {
        res.pass = false;
        res.note = "degenerate: no annulus crossings observed";
    } else {
        res.pass = ca.min_ratio >= 1.0 - tol && ca.sigma_monotone;
    }
    return res;
}

double tv_control_estimate(const VectorField& field, double R, int n_radii, int n_angles) {
    if (field.dim != 2) throw Error("tv_control_estimate: field must be 2D");
    double int_b = 0, int_db = 0;
    double h = 1e-5;
    for (int i = 0; i < n_radii; ++i) {
        double r = R + (i + 0.5) / n_radii;
        for (int a = 0; a < n_angles; ++a) {
            double th = 2 * M_PI * a / n_angles;
            Vec x(2);
            x[0] = r * std::cos(th);
            x[1] = r * std::sin(th);
            double dA = r * (1.0 / n_radii) * (2 * M_PI / n_angles);
            int_b += field(0.0, x).norm() * dA;
            double fro2 = 0;
            for (int j = 0; j < 2; ++j) {
                Vec xp = x, xm = x;
                xp[j] += h;
                xm[j] -= h;
                Vec col = (field(0.0, xp) - field(0.0, xm)) * (1.0 / (2 * h));
                fro2 += col.norm2();
            }
            int_db += std::sqrt(fro2) * dA;
        }
    }
    return int_b / (2 * M_PI * R) + int_db;
}

CheckResult check_no_blowup(const VectorField& field, ParticleEnsemble& ens, double T,
                            int time_samples, double tol_frac, const IntegratorParams& params,
                            int threads) {
    auto t0 = Clock::now();
    if (T <= 0 || T > params.horizon)
        throw Error("check_no_blowup: T must lie in (0, horizon]");
    std::vector<double> tgrid;
    for (int i = 0; i <= time_samples; ++i) tgrid.push_back(T * i / time_samples);

    ExhaustionDomain dom = ExhaustionDomain::whole_space(field.dim);
    IntegratorParams ip = params;
    ip.store_all = false;
    ip.record_times = tgrid;
    integrate_ensemble(ens, field, dom, ip, threads);

    double w_total = 0, w_full = 0;
    for (size_t i = 0; i < ens.parts.size(); ++i) {
        w_total += ens.parts[i].w;
        if (ens.trajs[i].termination == Termination::horizon_reached &&
            ens.trajs[i].t_max_estimate >= T)
            w_full += ens.parts[i].w;
    }
    LogMomentReport growth = log_moment_functionals(ens, field, tgrid, threads);

    CheckResult res;
    res.check = "no-blowup";
    double frac = w_total > 0 ? w_full / w_total : 0;
    res.metrics = {{"full_time_mass_fraction", frac},
                   {"growth_integral", growth.growth_integral},
                   {"log_moment_final", growth.log_moment.back()}};
    res.tolerance = tol_frac;
    res.samples = (long)ens.parts.size();
    res.pass = frac >= 1.0 - tol_frac;
    if (!res.pass) res.note = "criterion not satisfied: mass lost to blow-up before T";
    res.wall_seconds = seconds_since(t0);
    return res;
}

}  // namespace mrf
