#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "region.hpp"
#include "vec.hpp"

namespace mrf {

enum class FieldKind { analytic, counterexample, mollified, composite };

// Piecewise-constant function of t, used for divergence lower bounds m(t).
// Segment i covers [t_{i-1}, t_i) with value v_i; the last segment extends to
// infinity.
struct PiecewiseConstFn {
    std::vector<double> knots;   // increasing interior breakpoints
    std::vector<double> values;  // size knots.size() + 1

    static PiecewiseConstFn constant(double v) { return {{}, {v}}; }

    double operator()(double t) const {
        size_t i = 0;
        while (i < knots.size() && t >= knots[i]) ++i;
        return values[i];
    }
    // integral of |m| over [0, T]; exact for the piecewise-constant data
    double integral_abs(double T) const {
        double s = 0, prev = 0;
        for (size_t i = 0; i < values.size(); ++i) {
            double end = (i < knots.size()) ? std::min(knots[i], T) : T;
            if (end > prev) s += std::abs(values[i]) * (end - prev);
            prev = std::max(prev, end);
            if (prev >= T) break;
        }
        return s;
    }
};

struct DivergenceBound {
    Region subdomain;
    PiecewiseConstFn m;
    double L = 0;  // int_0^T |m|, filled by make_divergence_bound
};

struct VectorField {
    int dim = 0;
    double horizon = 1.0;
    FieldKind kind = FieldKind::analytic;
    std::string name;
    std::function<Vec(double, const Vec&)> eval_fn;
    std::function<double(double, const Vec&)> div_fn;  // optional analytic divergence
    std::optional<Region> support;                     // extend-by-zero outside
    std::vector<DivergenceBound> bounds;

    // Zero outside the declared support; throws on non-finite output.
    Vec operator()(double t, const Vec& x) const;

    bool has_divergence() const { return static_cast<bool>(div_fn); }

    // Analytic divergence when present, otherwise centered finite differences
    // on the zero-extended evaluator with step h.
    double divergence(double t, const Vec& x, double h = 1e-4) const;

    // Lookup the declared bound covering a subdomain (string match on the
    // region), if any.
    const DivergenceBound* bound_for(const Region& sub) const;
    const DivergenceBound* global_bound(const Region& omega) const;
};

DivergenceBound make_divergence_bound(Region sub, PiecewiseConstFn m, double T);

// ---- shipped analytic fields ----

VectorField make_zero_field(int d, double T = 1);
VectorField make_constant_field(const Vec& v, double T = 1);
VectorField make_rotation_field(double T = 1);            // 2D, b=(-y,x)
VectorField make_linear_field(double lambda, int d, double T = 1);  // b = lambda x
VectorField make_cubic_radial_field(int d, double T = 1); // b = x|x|^2
VectorField make_bounded_drift_field(int d, double T = 1);// b = x/(1+|x|)
VectorField make_swirl_field(double alpha, double beta, double T = 1);  // 2D, a x + b x^perp
VectorField make_radial_speed_field(double c, double T = 1);            // 2D, c x/|x|
VectorField make_spiral_field(double cr, double ct, double T = 1);      // 2D
// 2D radial field with Lipschitz speed ramp c1 -> c2 across [r0, r0+w].
VectorField make_ramp_radial_field(double c1, double c2, double r0, double w, double T = 1);

// ---- mollification ----

struct MollifierParams {
    double epsilon = 0.1;
    int quadrature_points = 12;  // Gauss-Legendre points per axis
};

// Normalized polynomial bump (1-|y|^2)^4 on the unit ball.
double mollifier_kernel(const Vec& y);
// Kernel mass under the tensor Gauss-Legendre rule with n points per axis.
double mollifier_kernel_mass(int d, int n);

// (b chi_clip) * rho_eps via tensor Gauss-Legendre quadrature; quadrature
// weights renormalized by the discrete kernel mass so constants are preserved
// exactly.
VectorField mollify(const VectorField& field, const MollifierParams& params, const Region& clip);

// ---- divergence bound verification ----

struct SamplePlan {
    int time_samples = 5;
    int space_samples = 256;  // low-discrepancy points in the subdomain
    double fd_step = 0;       // 0: default 1e-4 * subdomain diameter
    double tolerance = 1e-6;
};

struct DivergenceViolation {
    double t;
    Vec x;
    double div_value;
    double bound_value;
};

struct DivergenceReport {
    std::vector<DivergenceViolation> violations;
    double worst_margin = kInf;  // min over samples of div - m(t)
};

DivergenceReport verify_divergence_bound(const VectorField& field, const DivergenceBound& bound,
                                         const SamplePlan& plan);

// ---- quadrature helpers ----

// Gauss-Legendre nodes/weights on [-1,1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

// Low-discrepancy points: Halton sequence (bases 2,3,5,...), index starts at 1.
double halton(uint64_t index, int base);
Vec halton_point(uint64_t index, int d);

}  // namespace mrf
