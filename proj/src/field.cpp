#include "field.hpp"

#include <algorithm>
#include <cmath>

namespace mrf {

Vec VectorField::operator()(double t, const Vec& x) const {
    if (support && signed_margin(*support, x) < 0) return Vec(dim);
    Vec v = eval_fn(t, x);
    if (!v.finite())
        throw Error("non-finite field value for '" + name + "' at t=" + std::to_string(t) + " x=" + x.str());
    return v;
}

double VectorField::divergence(double t, const Vec& x, double h) const {
    if (div_fn) return div_fn(t, x);
    double s = 0;
    for (int i = 0; i < dim; ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        s += ((*this)(t, xp)[i] - (*this)(t, xm)[i]) / (2 * h);
    }
    return s;
}

const DivergenceBound* VectorField::bound_for(const Region& sub) const {
    std::string key = region_to_string(sub);
    for (auto& b : bounds)
        if (region_to_string(b.subdomain) == key) return &b;
    return nullptr;
}

const DivergenceBound* VectorField::global_bound(const Region& omega) const {
    return bound_for(omega);
}

DivergenceBound make_divergence_bound(Region sub, PiecewiseConstFn m, double T) {
    DivergenceBound b{std::move(sub), std::move(m), 0};
    b.L = b.m.integral_abs(T);
    return b;
}

// ---- analytic fields -------------------------------------------------------

VectorField make_zero_field(int d, double T) {
    VectorField f;
    f.dim = d;
    f.horizon = T;
    f.name = "zero";
    f.eval_fn = [d](double, const Vec&) { return Vec(d); };
    f.div_fn = [](double, const Vec&) { return 0.0; };
    f.bounds.push_back(make_divergence_bound(Region(RSpace{d}), PiecewiseConstFn::constant(0), T));
    return f;
}

VectorField make_constant_field(const Vec& v, double T) {
    VectorField f;
    f.dim = v.d;
    f.horizon = T;
    f.name = "constant";
    f.eval_fn = [v](double, const Vec&) { return v; };
    f.div_fn = [](double, const Vec&) { return 0.0; };
    f.bounds.push_back(make_divergence_bound(Region(RSpace{v.d}), PiecewiseConstFn::constant(0), T));
    return f;
}

VectorField make_rotation_field(double T) {
    VectorField f;
    f.dim = 2;
    f.horizon = T;
    f.name = "rotation";
    f.eval_fn = [](double, const Vec& x) { return Vec{-x[1], x[0]}; };
    f.div_fn = [](double, const Vec&) { return 0.0; };
    f.bounds.push_back(make_divergence_bound(Region(RSpace{2}), PiecewiseConstFn::constant(0), T));
    return f;
}

VectorField make_linear_field(double lambda, int d, double T) {
    VectorField f;
    f.dim = d;
    f.horizon = T;
    f.name = "linear";
    f.eval_fn = [lambda](double, const Vec& x) { return x * lambda; };
    f.div_fn = [lambda, d](double, const Vec&) { return lambda * d; };
    f.bounds.push_back(make_divergence_bound(Region(RSpace{d}), PiecewiseConstFn::constant(lambda * d), T));
    return f;
}

VectorField make_cubic_radial_field(int d, double T) {
    VectorField f;
    f.dim = d;
    f.horizon = T;
    f.name = "cubic_radial";
    f.eval_fn = [](double, const Vec& x) { return x * x.norm2(); };
    f.div_fn = [d](double, const Vec& x) { return (d + 2.0) * x.norm2(); };
    // div = (d+2)|x|^2 >= 0 everywhere: a global one-sided bound with m = 0.
    f.bounds.push_back(make_divergence_bound(Region(RSpace{d}), PiecewiseConstFn::constant(0), T));
    return f;
}

VectorField make_bounded_drift_field(int d, double T) {
    VectorField f;
    f.dim = d;
    f.horizon = T;
    f.name = "bounded_drift";
    f.eval_fn = [](double, const Vec& x) { return x * (1.0 / (1.0 + x.norm())); };
    f.div_fn = [d](double, const Vec& x) {
        double r = x.norm();
        return d / (1.0 + r) - r / ((1.0 + r) * (1.0 + r));
    };
    f.bounds.push_back(make_divergence_bound(Region(RSpace{d}), PiecewiseConstFn::constant(-0.25), T));
    return f;
}

VectorField make_swirl_field(double alpha, double beta, double T) {
    VectorField f;
    f.dim = 2;
    f.horizon = T;
    f.name = "swirl";
    f.eval_fn = [alpha, beta](double, const Vec& x) {
        return Vec{alpha * x[0] - beta * x[1], alpha * x[1] + beta * x[0]};
    };
    f.div_fn = [alpha](double, const Vec&) { return 2 * alpha; };
    f.bounds.push_back(make_divergence_bound(Region(RSpace{2}), PiecewiseConstFn::constant(2 * alpha), T));
    return f;
}

VectorField make_radial_speed_field(double c, double T) {
    VectorField f;
    f.dim = 2;
    f.horizon = T;
    f.name = "radial_speed";
    f.eval_fn = [c](double, const Vec& x) {
        double r = x.norm();
        if (r < 1e-12) return Vec{c, 0.0};  // arbitrary direction at the origin
        return x * (c / r);
    };
    return f;
}

VectorField make_spiral_field(double cr, double ct, double T) {
    VectorField f;
    f.dim = 2;
    f.horizon = T;
    f.name = "spiral";
    f.eval_fn = [cr, ct](double, const Vec& x) {
        double r = x.norm();
        if (r < 1e-12) return Vec{cr, ct};
        return Vec{(cr * x[0] - ct * x[1]) / r, (cr * x[1] + ct * x[0]) / r};
    };
    return f;
}

VectorField make_ramp_radial_field(double c1, double c2, double r0, double w, double T) {
    VectorField f;
    f.dim = 2;
    f.horizon = T;
    f.name = "ramp_radial";
    f.eval_fn = [c1, c2, r0, w](double, const Vec& x) {
        double r = x.norm();
        if (r < 1e-12) return Vec{c1, 0.0};
        double s = std::clamp((r - r0) / w, 0.0, 1.0);
        double c = c1 + (c2 - c1) * s;
        return x * (c / r);
    };
    return f;
}

// ---- quadrature ------------------------------------------------------------

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Newton iteration from the Chebyshev initial guess.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = 0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) * x * p1 - j * p2) / (j + 1);
            }
            pp = n * (x * p0 - p1) / (x * x - 1);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = weights[n - 1 - i] = 2.0 / ((1 - x * x) * pp * pp);
    }
}

double halton(uint64_t index, int base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * (index % base);
        index /= base;
    }
    return r;
}

Vec halton_point(uint64_t index, int d) {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = halton(index, primes[i]);
    return v;
}

// ---- mollification ---------------------------------------------------------

namespace {

double unit_ball_bump_norm_const(int d) {
    // 1 / int_{B_1} (1-|y|^2)^4 dy, computed from the radial integral
    // int_0^1 r^(d-1) (1-r^2)^4 dr = Beta(d/2, 5)/2 and the sphere area.
    double surface = 2 * std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0);
    double radial = 0.5 * std::tgamma(d / 2.0) * std::tgamma(5.0) / std::tgamma(d / 2.0 + 5.0);
    return 1.0 / (surface * radial);
}

}  // namespace

double mollifier_kernel(const Vec& y) {
    double r2 = y.norm2();
    if (r2 >= 1.0) return 0.0;
    double u = 1.0 - r2;
    double u2 = u * u;
    return unit_ball_bump_norm_const(y.d) * u2 * u2;
}

double mollifier_kernel_mass(int d, int n) {
    std::vector<double> nodes, w;
    gauss_legendre(n, nodes, w);
    double mass = 0;
    std::vector<int> idx(d, 0);
    for (;;) {
        Vec y(d);
        double wt = 1;
        for (int i = 0; i < d; ++i) {
            y[i] = nodes[idx[i]];
            wt *= w[idx[i]];
        }
        mass += wt * mollifier_kernel(y);
        int i = 0;
        while (i < d && ++idx[i] == n) idx[i++] = 0;
        if (i == d) break;
    }
    return mass;
}

VectorField mollify(const VectorField& field, const MollifierParams& params, const Region& clip) {
    if (params.quadrature_points < 2) throw Error("mollify: quadrature_points must be >= 2");
    if (params.epsilon <= 0) throw Error("mollify: epsilon must be positive");
    int d = field.dim;
    std::vector<double> nodes, w;
    gauss_legendre(params.quadrature_points, nodes, w);

    // Precompute quadrature points inside the unit ball with kernel weights,
    // renormalized by the discrete mass so constants survive exactly.
    struct QP { Vec y; double w; };
    auto qps = std::make_shared<std::vector<QP>>();
    double mass = 0;
    std::vector<int> idx(d, 0);
    for (;;) {
        Vec y(d);
        double wt = 1;
        for (int i = 0; i < d; ++i) {
            y[i] = nodes[idx[i]];
            wt *= w[idx[i]];
        }
        double k = mollifier_kernel(y);
        if (k > 0) {
            qps->push_back({y, wt * k});
            mass += wt * k;
        }
        int i = 0;
        while (i < d && ++idx[i] == params.quadrature_points) idx[i++] = 0;
        if (i == d) break;
    }
    for (auto& q : *qps) q.w /= mass;

    VectorField base = field;  // copied into the closure
    Region clip_region = clip;
    double eps = params.epsilon;

    VectorField out;
    out.dim = d;
    out.horizon = field.horizon;
    out.kind = FieldKind::mollified;
    out.name = field.name + "_eps" + std::to_string(eps);
    out.support = clip_region;
    out.eval_fn = [base, clip_region, eps, qps, d](double t, const Vec& x) {
        Vec acc(d);
        for (const auto& q : *qps) {
            Vec xi = x;
            axpy(-eps, q.y, xi);
            if (signed_margin(clip_region, xi) < 0) continue;  // (b chi_clip)
            axpy(q.w, base(t, xi), acc);
        }
        return acc;
    };
    return out;
}

// ---- divergence bound verification ----------------------------------------

DivergenceReport verify_divergence_bound(const VectorField& field, const DivergenceBound& bound,
                                         const SamplePlan& plan) {
    DivergenceReport rep;
    double h = plan.fd_step;
    if (h <= 0) {
        double diam = region_diameter(bound.subdomain);
        h = std::isinf(diam) ? 1e-4 : 1e-4 * diam;
    }
    Box bb = bound.subdomain.is_whole_space()
                 ? Box{Vec(field.dim), Vec(field.dim)}
                 : bounding_box(bound.subdomain);
    if (bound.subdomain.is_whole_space()) {
        for (int i = 0; i < field.dim; ++i) { bb.lo[i] = -4; bb.hi[i] = 4; }
    }
    int accepted = 0;
    uint64_t index = 1;
    std::vector<Vec> pts;
    while (accepted < plan.space_samples && index < 1000000ull * (unsigned)plan.space_samples) {
        Vec u = halton_point(index++, field.dim);
        Vec x(field.dim);
        for (int i = 0; i < field.dim; ++i) x[i] = bb.lo[i] + u[i] * (bb.hi[i] - bb.lo[i]);
        if (signed_margin(bound.subdomain, x) > h) {  // keep FD stencil inside
            pts.push_back(x);
            ++accepted;
        }
    }
    for (int it = 0; it < plan.time_samples; ++it) {
        double t = field.horizon * (it + 0.5) / plan.time_samples;
        double mt = bound.m(t);
        for (const auto& x : pts) {
            double dv = field.divergence(t, x, h);
            double margin = dv - mt;
            rep.worst_margin = std::min(rep.worst_margin, margin);
            if (margin < -plan.tolerance) rep.violations.push_back({t, x, dv, mt});
        }
    }
    return rep;
}

}  // namespace mrf
