#pragma once

#include <vector>

#include "field.hpp"
#include "region.hpp"
#include "vec.hpp"

namespace mrf {

enum class Scheme { rk4_fixed, rk45_adaptive };

struct IntegratorParams {
    Scheme scheme = Scheme::rk45_adaptive;
    double dt_init = 1e-3;
    double dt_min = 1e-14;
    double dt_max = 0.1;
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    // |b| above which dt is shrunk proportionally: dt <= dt_max * speed_cap/|b|.
    // The default leaves step control to the error estimator alone.
    double speed_cap = 1e12;
    double horizon = 1.0;
    double blowup_potential_threshold = 1e6;
    // Sample storage: all accepted steps, or only the listed times (plus the
    // endpoints). record_times must be sorted.
    bool store_all = true;
    std::vector<double> record_times;

    void validate() const;
};

struct TrajSample {
    double t;
    Vec x;
    Vec v;
};

enum class Termination { horizon_reached, blowup_declared, step_underflow };

struct Trajectory {
    Vec x0;
    double start_time = 0;
    std::vector<TrajSample> samples;
    std::vector<HittingRecord> hitting;  // one per exhaustion level reached
    double t_max_estimate = 0;           // numerical surrogate for T_{Omega,X}(x)
    Termination termination = Termination::horizon_reached;
    TrajSample final_state{};
    std::vector<std::pair<double, double>> jacobian;  // (t, J)
    long steps_accepted = 0;
    long steps_rejected = 0;
};

// Integrate dX/dt = b(t, X) from x0 at start time s0 up to the horizon,
// declared blow-up (V_Omega >= threshold or exit from Omega), or step
// underflow. Hitting records are filled online for every exhaustion level
// crossed, with cubic-Hermite bisection refinement inside the bracketing step.
Trajectory integrate(const VectorField& field, const ExhaustionDomain& domain, const Vec& x0,
                     const IntegratorParams& params, double s0 = 0);

// Solve dJ/dt = J div b(t, X(t)) along a stored trajectory (co-sampled with
// samples; requires store_all so Hermite interpolation is step-accurate).
void integrate_jacobian(const VectorField& field, Trajectory& traj, double fd_h = 1e-4,
                        int substeps = 8);

// State at time t by cubic Hermite interpolation between stored samples.
TrajSample sample_at(const Trajectory& traj, double t);

// First time the trajectory polyline leaves the closed region (Hermite +
// bisection on the bracketing step); 0 if the initial point is outside.
HittingRecord first_hitting(const std::vector<TrajSample>& samples, const Region& region,
                            int level = 0, double time_tol = 1e-12);

enum class BlowupClass { none, proper, oscillating };

struct ClassifyParams {
    int window = 32;                // trailing samples examined for the proper case
    double high_threshold = 1e6;   // potential level counting as an excursion
    double low_threshold = 1.0;    // return level between excursions
};

BlowupClass classify_blowup(const Trajectory& traj, const ExhaustionDomain& domain,
                            const ClassifyParams& params);

}  // namespace mrf
