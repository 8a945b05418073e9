#pragma once

#include <vector>

#include "field.hpp"
#include "integrate.hpp"

namespace mrf {

// Autonomous field on R^d (d >= 3) whose trajectories oscillate between 0 and
// infinity in finite time: vertical transport in a stack of dyadic cylinders
// E_k (axis 2^-k e_1, radius a_k, alternating direction, speed 4^k) joined by
// semicircular handles F_k. The infinite construction is truncated at k_max;
// beyond the last cylinder cap the field is zero and particles freeze there.
struct CounterexampleParams {
    int d = 3;
    double p = 1.5;       // Sobolev exponent, must satisfy 1 < p < d-1
    int k_max = 8;
    // Transverse capture radius floor: cylinder radii a_k = 8^{-pk/(d-1-p)}
    // shrink below double resolution within a few levels, so membership tests
    // snap to the axis once a_k < 2*floor. floor = capture_scale * max(1, 2^k).
    double capture_scale = 1e-7;

    double a(int k) const;   // cylinder radius, min(1, 8^{-pk/(d-1-p)})
    void validate() const;
};

// Smooth cutoff: 1 on [0,1/2], 0 on [1,inf), C^infinity bridge between.
double cutoff_phi(double u);
double cutoff_phi_deriv(double u);

struct TubeLocation {
    enum Kind { outside, cylinder, handle, terminal } kind = outside;
    int level = 0;       // k for cylinder E_k / handle F_k
    double transverse = 0;  // |u| in cross-section units (0 when snapped)
};

TubeLocation locate_in_tube(const CounterexampleParams& params, const Vec& x);

VectorField build_counterexample_field(const CounterexampleParams& params, double horizon = 2.5);

// Sigma = B_{a_1/2}(e_1/2) x [0,1]: starting set whose trajectories stay in
// the primed tube.
Vec sigma_sample(const CounterexampleParams& params, uint64_t index);

// Cylinder/handle coordinates as JSON, for external visualization.
std::string geometry_json(const CounterexampleParams& params);

// ---- Sobolev-norm accounting ----

struct SobolevTerm {
    int k;
    double lp_quad, lp_bound;      // ||b||_{L^p(E_k)}: quadrature vs closed-form bound
    double grad_quad, grad_bound;  // ||grad b||_{L^p(E_k)}
    double w1p;                    // lp_quad + grad_quad
    double ratio;                  // w1p / (lp_bound + grad_bound)
};

struct SobolevReport {
    std::vector<SobolevTerm> terms;
    double series_w1p = 0;      // partial sum S_{k_max}
    double series_lp = 0;
    double tail_w1p_rel = 0;    // |S_k - S_{k-2}| / S_k for the W^{1,p} series
    double tail_lp_rel = 0;     // same for the L^p series
    double max_term_ratio = 0;  // max over k of term_{k+1}/term_k (W^{1,p})
    bool geometric = false;     // max_term_ratio < 1
};

// Per-cylinder W^{1,p} contributions on B_R (height factor 2R as in the
// closed-form bound), with independent multidimensional quadrature per term.
SobolevReport estimate_sobolev_norm(const CounterexampleParams& params, double R,
                                    int quadrature_points = 48);

// ---- oscillation census ----

struct LevelStats {
    int k = 0;
    double nominal_cross = 0;     // 2^k / 4^k
    double cross_min = kInf, cross_max = 0, cross_mean = 0;
    double handle_max = 0;        // max observed F_k' duration
    double handle_bound = 0;      // 4^-k
    double excursion_max = 0;     // max |x| while in level k
    double return_min = kInf;     // min |x| while in level k
    int visits = 0;
};

struct OscillationCensus {
    int samples = 0;
    int ok_count = 0;             // samples meeting all per-trajectory checks
    std::vector<LevelStats> levels;
    double worst_total_time = 0;  // max over samples of cumulative tube time
    double time_budget = 0;       // sum_k (2^k + 1)/4^k over reached levels
    int min_excursions = 0;       // min over samples of (|x|>=8, return <=1) cycles
    bool pass = false;
};

OscillationCensus verify_oscillation(const CounterexampleParams& params, int nsamples,
                                     const IntegratorParams& iparams, int threads = 1);

}  // namespace mrf
