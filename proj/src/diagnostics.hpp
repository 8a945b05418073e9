#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "transport.hpp"

namespace mrf {

struct CheckResult {
    std::string check;
    std::vector<std::pair<std::string, double>> metrics;
    double bound = 0;
    double tolerance = 0;
    bool pass = false;
    bool refused = false;  // precondition failure; pass is false
    std::string note;
    long samples = 0;
    double wall_seconds = 0;
};

struct DiagnosticsReport {
    std::vector<CheckResult> checks;
};

std::string report_to_json(const DiagnosticsReport& rep);

// Flow restart identity: X(t-s, s, X(s,x)) = X(t, x), and for blow-up samples
// the restarted maximal time matches the original. Positional defects compared
// against tol, maximal-time defects against 2*dt_max.
CheckResult check_semigroup(const VectorField& field, const ExhaustionDomain& domain,
                            const std::vector<Vec>& xs, double s, double t,
                            const IntegratorParams& params, double tol = 1e-6);

// Stability of the flow under mollification of the field: for each epsilon,
// the mollified flow stopped at its own exit time from A is compared with the
// reference flow in the truncated-sup L1 metric over particles that stay in A
// past t. epsilon = 0 is the identity sentinel (no mollification).
struct StabilityParams {
    std::vector<double> epsilons;  // decreasing; 0 allowed as sentinel
    Region A;                      // compactly contained subdomain
    Region seed;                   // initial uniform ensemble support
    size_t particles = 500;
    double t = 0.5;
    Region clip;                   // mollification clip window (contains A inflated)
    int quadrature_points = 8;
    int sup_grid = 40;             // s-samples for the sup over [0, t]
    double final_tol = 1e-3;       // required distance at the smallest epsilon
};

CheckResult check_stability(const VectorField& field, const StabilityParams& sp,
                            const IntegratorParams& params, int threads = 1);

// Hitting-time semicontinuity: measure of {h_A(X^n) <= t < h_A(X)} along the
// approximation sequence, plus the per-particle lower-semicontinuity check
// h_A(X) <= min over the two finest approximations + 2*dt_max.
CheckResult check_hitting_semicontinuity(const VectorField& field, const StabilityParams& sp,
                                         const IntegratorParams& params, int threads = 1);

// Blow-up census under a global divergence bound: refuses when the field does
// not declare one; otherwise every blow-up must classify proper, and for
// bounded domains final positions must sit on the boundary.
struct ProperBlowupParams {
    Region seed;
    size_t particles = 1000;
    ClassifyParams classify;
    double boundary_tol_rel = 1e-3;  // geometric tolerance, relative to diam
    double tol_frac = 1e-3;          // allowed fraction failing the boundary claim
};

CheckResult check_proper_blowup(const VectorField& field, const ExhaustionDomain& domain,
                                const ProperBlowupParams& pp, const IntegratorParams& params,
                                int threads = 1);

// ---- annulus crossing-time bound (2D) ----

struct CrossingEvent {
    double entry, exit, tau, ratio;
};

struct CrossingAnalysis {
    double R = 1;
    std::vector<double> r_grid, f_values;  // f(r) = sup_{|x|=r} |b| on [R, R+1]
    double f_integral = 0;
    bool analytic_profile = false;
    std::vector<CrossingEvent> crossings;  // tau >= 1/f_integral expected
    double min_ratio = kInf;               // min tau * f_integral
    bool degenerate = false;               // no crossings observed
    bool sigma_monotone = true;            // running max |x| nondecreasing
};

CrossingAnalysis check_crossing_time(const VectorField& field,
                                     const std::vector<Trajectory>& trajs, double R,
                                     const std::function<double(double)>& f_analytic = {},
                                     int n_angles = 720, int n_radii = 201);

CheckResult crossing_check(const CrossingAnalysis& ca, double tol = 0.02);

// (1/(2 pi R)) int_{B_{R+1}\B_R} |b| + |Db|(B_{R+1}\B_R): upper bound for
// int_R^{R+1} sup_{|x|=r} |b| dr, evaluated by polar quadrature with a
// finite-difference Jacobian.
double tv_control_estimate(const VectorField& field, double R, int n_radii = 64,
                           int n_angles = 256);

// No-blow-up criterion: integrates the ensemble to T and requires the maximal
// time to equal T for all but tol_frac of the mass; reports the growth
// functional int |b|/(1+|x|) d mu_t dt alongside.
CheckResult check_no_blowup(const VectorField& field, ParticleEnsemble& ens, double T,
                            int time_samples, double tol_frac, const IntegratorParams& params,
                            int threads = 1);

}  // namespace mrf
