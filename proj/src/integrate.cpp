#include "integrate.hpp"

#include <algorithm>
#include <cmath>

namespace mrf {

void IntegratorParams::validate() const {
    if (!(0 < dt_min && dt_min <= dt_init && dt_init <= dt_max))
        throw Error("integrator params: need 0 < dt_min <= dt_init <= dt_max");
    if (rel_tol <= 0 || abs_tol <= 0) throw Error("integrator params: tolerances must be positive");
    if (horizon <= 0) throw Error("integrator params: horizon must be positive");
}

namespace {

Vec hermite_pos(const TrajSample& a, const TrajSample& b, double t) {
    double h = b.t - a.t;
    if (h <= 0) return a.x;
    double s = (t - a.t) / h;
    double s2 = s * s, s3 = s2 * s;
    double h00 = 2 * s3 - 3 * s2 + 1;
    double h10 = s3 - 2 * s2 + s;
    double h01 = -2 * s3 + 3 * s2;
    double h11 = s3 - s2;
    Vec x(a.x.d);
    axpy(h00, a.x, x);
    axpy(h10 * h, a.v, x);
    axpy(h01, b.x, x);
    axpy(h11 * h, b.v, x);
    return x;
}

Vec hermite_vel(const TrajSample& a, const TrajSample& b, double t) {
    double h = b.t - a.t;
    if (h <= 0) return a.v;
    double s = (t - a.t) / h;
    double s2 = s * s;
    double d00 = (6 * s2 - 6 * s) / h;
    double d10 = 3 * s2 - 4 * s + 1;
    double d01 = (-6 * s2 + 6 * s) / h;
    double d11 = 3 * s2 - 2 * s;
    Vec v(a.x.d);
    axpy(d00, a.x, v);
    axpy(d10, a.v, v);
    axpy(d01, b.x, v);
    axpy(d11, b.v, v);
    return v;
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct StepResult {
    Vec x_new;
    Vec v_new;   // field at (t+dt, x_new)
    double err;  // scaled error estimate (rk45 only; 0 for rk4)
};

StepResult rk45_step(const VectorField& f, double t, const Vec& x, const Vec& k1, double dt,
                     double abs_tol, double rel_tol) {
    int d = x.d;
    Vec y(d);

    y = x; axpy(dt * a21, k1, y);
    Vec k2 = f(t + c2 * dt, y);
    y = x; axpy(dt * a31, k1, y); axpy(dt * a32, k2, y);
    Vec k3 = f(t + c3 * dt, y);
    y = x; axpy(dt * a41, k1, y); axpy(dt * a42, k2, y); axpy(dt * a43, k3, y);
    Vec k4 = f(t + c4 * dt, y);
    y = x; axpy(dt * a51, k1, y); axpy(dt * a52, k2, y); axpy(dt * a53, k3, y); axpy(dt * a54, k4, y);
    Vec k5 = f(t + c5 * dt, y);
    y = x; axpy(dt * a61, k1, y); axpy(dt * a62, k2, y); axpy(dt * a63, k3, y); axpy(dt * a64, k4, y);
    axpy(dt * a65, k5, y);
    Vec k6 = f(t + dt, y);

    Vec x5 = x;
    axpy(dt * b1, k1, x5); axpy(dt * b3, k3, x5); axpy(dt * b4, k4, x5);
    axpy(dt * b5, k5, x5); axpy(dt * b6, k6, x5);
    Vec k7 = f(t + dt, x5);

    double err = 0;
    for (int i = 0; i < d; ++i) {
        double e = dt * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        double sc = abs_tol + rel_tol * std::max(std::abs(x[i]), std::abs(x5[i]));
        double q = e / sc;
        err += q * q;
    }
    err = std::sqrt(err / d);
    return {x5, k7, err};
}

StepResult rk4_step(const VectorField& f, double t, const Vec& x, const Vec& k1, double dt) {
    int d = x.d;
    Vec y = x;
    axpy(dt / 2, k1, y);
    Vec k2 = f(t + dt / 2, y);
    y = x; axpy(dt / 2, k2, y);
    Vec k3 = f(t + dt / 2, y);
    y = x; axpy(dt, k3, y);
    Vec k4 = f(t + dt, y);
    Vec xn = x;
    axpy(dt / 6, k1, xn); axpy(dt / 3, k2, xn); axpy(dt / 3, k3, xn); axpy(dt / 6, k4, xn);
    return {xn, f(t + dt, xn), 0.0};
}

// First t in [a.t, b.t] where the Hermite path leaves the closed region.
double refine_exit_time(const TrajSample& a, const TrajSample& b, const Region& region, Vec& exit_pt,
                        double time_tol) {
    double lo = a.t, hi = b.t;
    for (int it = 0; it < 80 && hi - lo > time_tol; ++it) {
        double mid = 0.5 * (lo + hi);
        if (signed_margin(region, hermite_pos(a, b, mid)) >= 0) lo = mid;
        else hi = mid;
    }
    exit_pt = hermite_pos(a, b, 0.5 * (lo + hi));
    return 0.5 * (lo + hi);
}

}  // namespace

TrajSample sample_at(const Trajectory& traj, double t) {
    const auto& ss = traj.samples;
    if (ss.empty()) throw Error("sample_at: empty trajectory");
    if (t <= ss.front().t) return ss.front();
    if (t >= ss.back().t) return ss.back();
    auto it = std::lower_bound(ss.begin(), ss.end(), t,
                               [](const TrajSample& s, double tv) { return s.t < tv; });
    if (it->t == t) return *it;
    const TrajSample& b = *it;
    const TrajSample& a = *(it - 1);
    return {t, hermite_pos(a, b, t), hermite_vel(a, b, t)};
}

HittingRecord first_hitting(const std::vector<TrajSample>& samples, const Region& region, int level,
                            double time_tol) {
    if (samples.empty()) throw Error("first_hitting: empty trajectory");
    HittingRecord rec;
    rec.level = level;
    if (signed_margin(region, samples.front().x) < 0) {
        rec.hit = true;
        rec.time = samples.front().t;
        rec.exit_point = samples.front().x;
        return rec;
    }
    for (size_t i = 1; i < samples.size(); ++i) {
        if (signed_margin(region, samples[i].x) < 0) {
            rec.hit = true;
            rec.time = refine_exit_time(samples[i - 1], samples[i], region, rec.exit_point, time_tol);
            return rec;
        }
    }
    return rec;  // never within horizon
}

Trajectory integrate(const VectorField& field, const ExhaustionDomain& domain, const Vec& x0,
                     const IntegratorParams& params, double s0) {
    params.validate();
    if (x0.d != field.dim) throw Error("integrate: dimension mismatch");
    if (!domain.in_omega(x0)) throw Error("integrate: x0 outside Omega: " + x0.str());
    if (s0 < 0 || s0 > params.horizon) throw Error("integrate: start time outside [0, horizon]");

    Trajectory traj;
    traj.x0 = x0;
    traj.start_time = s0;
    traj.hitting.reserve(domain.levels.size());

    double t = s0;
    Vec x = x0;
    Vec v = field(t, x);
    TrajSample cur{t, x, v};
    traj.samples.push_back(cur);

    // Levels already exited at t=0 get the hitting-time-zero convention.
    size_t next_level = 0;
    while (next_level < domain.levels.size() &&
           signed_margin(domain.levels[next_level], x) < 0) {
        traj.hitting.push_back({(int)next_level, true, s0, x});
        ++next_level;
    }

    size_t next_record = 0;
    while (next_record < params.record_times.size() && params.record_times[next_record] <= s0)
        ++next_record;

    double dt = params.dt_init;
    traj.termination = Termination::horizon_reached;
    traj.t_max_estimate = params.horizon;

    const double T = params.horizon;
    while (t < T) {
        double vnorm = cur.v.norm();
        double dt_cap = params.dt_max;
        if (vnorm > params.speed_cap) dt_cap = params.dt_max * params.speed_cap / vnorm;
        dt = std::min({dt, dt_cap, T - t});
        if (dt < params.dt_min && T - t > params.dt_min) {
            traj.termination = Termination::step_underflow;
            traj.t_max_estimate = t;
            break;
        }

        StepResult st;
        if (params.scheme == Scheme::rk4_fixed) {
            st = rk4_step(field, t, cur.x, cur.v, dt);
        } else {
            st = rk45_step(field, t, cur.x, cur.v, dt, params.abs_tol, params.rel_tol);
            if (st.err > 1.0) {
                ++traj.steps_rejected;
                double fac = std::max(0.2, 0.9 * std::pow(st.err, -0.2));
                double dt_new = dt * fac;
                if (dt_new < params.dt_min) {
                    traj.termination = Termination::step_underflow;
                    traj.t_max_estimate = t;
                    break;
                }
                dt = dt_new;
                continue;
            }
        }

        TrajSample nxt{t + dt, st.x_new, st.v_new};
        ++traj.steps_accepted;

        // hitting records for exited exhaustion levels (nested, so a prefix)
        while (next_level < domain.levels.size() &&
               signed_margin(domain.levels[next_level], nxt.x) < 0) {
            HittingRecord rec;
            rec.level = (int)next_level;
            rec.hit = true;
            rec.time = refine_exit_time(cur, nxt, domain.levels[next_level], rec.exit_point,
                                        std::max(params.dt_min, 1e-13));
            traj.hitting.push_back(rec);
            ++next_level;
        }

        while (next_record < params.record_times.size() &&
               params.record_times[next_record] <= nxt.t) {
            double rt = params.record_times[next_record];
            traj.samples.push_back({rt, hermite_pos(cur, nxt, rt), hermite_vel(cur, nxt, rt)});
            ++next_record;
        }
        if (params.store_all) traj.samples.push_back(nxt);

        t = nxt.t;
        cur = nxt;

        // blow-up checks against Omega itself
        if (!domain.in_omega(cur.x) || domain.potential(cur.x) >= params.blowup_potential_threshold) {
            traj.termination = Termination::blowup_declared;
            traj.t_max_estimate = t;
            break;
        }

        if (params.scheme == Scheme::rk45_adaptive) {
            double fac = (st.err > 0) ? std::min(5.0, std::max(0.2, 0.9 * std::pow(st.err, -0.2)))
                                      : 5.0;
            dt = std::min(dt * fac, params.dt_max);
        }
    }

    if (!params.store_all && (traj.samples.empty() || traj.samples.back().t != cur.t))
        traj.samples.push_back(cur);
    traj.final_state = cur;
    if (traj.termination == Termination::horizon_reached) traj.t_max_estimate = T;
    return traj;
}

void integrate_jacobian(const VectorField& field, Trajectory& traj, double fd_h, int substeps) {
    if (traj.samples.size() < 2) {
        traj.jacobian = {{traj.start_time, 1.0}};
        return;
    }
    traj.jacobian.clear();
    traj.jacobian.reserve(traj.samples.size());
    double logJ = 0;
    traj.jacobian.emplace_back(traj.samples.front().t, 1.0);
    for (size_t i = 1; i < traj.samples.size(); ++i) {
        const TrajSample& a = traj.samples[i - 1];
        const TrajSample& b = traj.samples[i];
        double h = (b.t - a.t) / substeps;
        // composite Simpson on div b(t, X(t))
        for (int k = 0; k < substeps; ++k) {
            double t0 = a.t + k * h, t1 = t0 + h, tm = t0 + h / 2;
            double d0 = field.divergence(t0, hermite_pos(a, b, t0), fd_h);
            double dm = field.divergence(tm, hermite_pos(a, b, tm), fd_h);
            double d1 = field.divergence(t1, hermite_pos(a, b, t1), fd_h);
            logJ += h / 6 * (d0 + 4 * dm + d1);
        }
        traj.jacobian.emplace_back(b.t, std::exp(logJ));
    }
}

BlowupClass classify_blowup(const Trajectory& traj, const ExhaustionDomain& domain,
                            const ClassifyParams& params) {
    const auto& ss = traj.samples;
    if (params.window <= 0 || ss.empty())
        throw Error("classify_blowup: bad window or empty trajectory");
    ClassifyParams params2 = params;
    if ((size_t)params2.window > ss.size()) params2.window = (int)ss.size();
    const ClassifyParams& p = params2;

    auto pot = [&](const Vec& x) {
        return domain.in_omega(x) ? domain.potential(x) : kInf;
    };

    // Excursion state machine: count high-crossings separated by dips below low.
    int excursions = 0;
    bool armed = true;  // ready to count a new excursion
    double vmax = 0;
    for (const auto& s : ss) {
        double V = pot(s.x);
        vmax = std::max(vmax, V);
        if (armed && V >= p.high_threshold) {
            ++excursions;
            armed = false;
        } else if (!armed && V <= p.low_threshold) {
            armed = true;
        }
    }
    if (excursions >= 2) return BlowupClass::oscillating;

    if (traj.termination == Termination::horizon_reached && vmax < p.high_threshold)
        return BlowupClass::none;
    if (traj.termination == Termination::horizon_reached) return BlowupClass::none;

    // Proper: trailing-window running minimum must climb through a growing
    // sequence of thresholds (never dipping back below low).
    size_t n = ss.size();
    std::vector<double> rmin(p.window);
    double m = kInf;
    for (int j = p.window - 1; j >= 0; --j) {
        m = std::min(m, pot(ss[n - p.window + j].x));
        rmin[j] = m;  // running min of the tail starting at j
    }
    // rmin is nondecreasing in j by construction; require real growth and no
    // terminal dip.
    if (rmin.front() < p.low_threshold) return BlowupClass::none;
    int growth_witnesses = 0;
    double last = rmin.front();
    for (double r : rmin) {
        if (r >= 2 * last) {
            ++growth_witnesses;
            last = r;
        }
    }
    if (growth_witnesses >= 2 || rmin.back() >= 4 * rmin.front()) return BlowupClass::proper;
    // Degenerate trailing window (e.g. blow-up resolved in very few samples):
    // fall back on the terminal potential.
    if (rmin.back() >= p.high_threshold) return BlowupClass::proper;
    return BlowupClass::none;
}

}  // namespace mrf
