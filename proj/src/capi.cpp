#include "mrflow.h"

#include <cstring>
#include <string>

#include "experiment.hpp"

using namespace mrf;

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

template <typename F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        return fail(MRF_ERR_NUMERIC, e.what());
    } catch (const std::exception& e) {
        return fail(MRF_ERR_INVALID_ARG, e.what());
    }
}

}  // namespace

struct mrf_field {
    VectorField f;
};
struct mrf_domain {
    ExhaustionDomain d;
};
struct mrf_trajectory {
    Trajectory t;
    int dim = 0;
};

extern "C" {

const char* mrf_version(void) {
    static std::string v = tool_version();
    return v.c_str();
}

const char* mrf_last_error(void) { return g_last_error.c_str(); }

int mrf_field_create(const char* spec_json, mrf_field** out) {
    if (!spec_json || !out) return fail(MRF_ERR_INVALID_ARG, "null argument");
    return guarded([&] {
        auto* h = new mrf_field{field_from_json(spec_json)};
        *out = h;
        return MRF_OK;
    });
}

void mrf_field_destroy(mrf_field* f) { delete f; }

int mrf_field_dim(const mrf_field* f, int* out_dim) {
    if (!f || !out_dim) return fail(MRF_ERR_INVALID_ARG, "null argument");
    *out_dim = f->f.dim;
    return MRF_OK;
}

int mrf_field_eval(const mrf_field* f, double t, const double* x, double* out_v) {
    if (!f || !x || !out_v) return fail(MRF_ERR_INVALID_ARG, "null argument");
    return guarded([&] {
        Vec xv(f->f.dim);
        for (int i = 0; i < f->f.dim; ++i) xv[i] = x[i];
        Vec v = f->f(t, xv);
        for (int i = 0; i < f->f.dim; ++i) out_v[i] = v[i];
        return MRF_OK;
    });
}

int mrf_domain_create(const char* omega_region, int nlevels, mrf_domain** out) {
    if (!omega_region || !out) return fail(MRF_ERR_INVALID_ARG, "null argument");
    if (nlevels < 1) return fail(MRF_ERR_INVALID_ARG, "nlevels must be >= 1");
    return guarded([&] {
        Region omega = parse_region(omega_region);
        auto* h = new mrf_domain{omega.is_whole_space()
                                     ? ExhaustionDomain::whole_space(omega.dim(), nlevels)
                                     : ExhaustionDomain::from_region(omega, nlevels)};
        *out = h;
        return MRF_OK;
    });
}

void mrf_domain_destroy(mrf_domain* d) { delete d; }

int mrf_integrate(const mrf_field* f, const mrf_domain* d, const double* x0,
                  const char* params_json, mrf_trajectory** out) {
    if (!f || !d || !x0 || !params_json || !out)
        return fail(MRF_ERR_INVALID_ARG, "null argument");
    if (f->f.dim != d->d.dim)
        return fail(MRF_ERR_INVALID_ARG, "field and domain dimensions differ");
    return guarded([&] {
        IntegratorParams p = integrator_from_json(params_json);
        Vec xv(f->f.dim);
        for (int i = 0; i < f->f.dim; ++i) xv[i] = x0[i];
        auto* h = new mrf_trajectory{integrate(f->f, d->d, xv, p), f->f.dim};
        *out = h;
        return MRF_OK;
    });
}

void mrf_trajectory_destroy(mrf_trajectory* t) { delete t; }

int mrf_trajectory_size(const mrf_trajectory* t, size_t* out_n) {
    if (!t || !out_n) return fail(MRF_ERR_INVALID_ARG, "null argument");
    *out_n = t->t.samples.size();
    return MRF_OK;
}

int mrf_trajectory_sample(const mrf_trajectory* t, size_t i, double* out_t, double* out_x) {
    if (!t || !out_t || !out_x) return fail(MRF_ERR_INVALID_ARG, "null argument");
    if (i >= t->t.samples.size()) return fail(MRF_ERR_INVALID_ARG, "sample index out of range");
    const TrajSample& s = t->t.samples[i];
    *out_t = s.t;
    for (int k = 0; k < t->dim; ++k) out_x[k] = s.x[k];
    return MRF_OK;
}

int mrf_trajectory_info(const mrf_trajectory* t, double* out_t_max, int* out_termination) {
    if (!t || !out_t_max || !out_termination)
        return fail(MRF_ERR_INVALID_ARG, "null argument");
    *out_t_max = t->t.t_max_estimate;
    switch (t->t.termination) {
        case Termination::horizon_reached: *out_termination = MRF_TERM_HORIZON; break;
        case Termination::blowup_declared: *out_termination = MRF_TERM_BLOWUP; break;
        case Termination::step_underflow: *out_termination = MRF_TERM_UNDERFLOW; break;
    }
    return MRF_OK;
}

int mrf_classify_blowup(const mrf_trajectory* t, const mrf_domain* d, int window,
                        double high_threshold, double low_threshold, int* out_class) {
    if (!t || !d || !out_class) return fail(MRF_ERR_INVALID_ARG, "null argument");
    return guarded([&] {
        ClassifyParams p;
        if (window > 0) p.window = window;
        if (high_threshold > 0) p.high_threshold = high_threshold;
        if (low_threshold > 0) p.low_threshold = low_threshold;
        switch (classify_blowup(t->t, d->d, p)) {
            case BlowupClass::none: *out_class = MRF_BLOWUP_NONE; break;
            case BlowupClass::proper: *out_class = MRF_BLOWUP_PROPER; break;
            case BlowupClass::oscillating: *out_class = MRF_BLOWUP_OSCILLATING; break;
        }
        return MRF_OK;
    });
}

int mrf_run_experiment(const char* path_or_preset, const char* out_dir, int threads,
                       long long seed, int* out_all_pass) {
    if (!path_or_preset || !out_all_pass) return fail(MRF_ERR_INVALID_ARG, "null argument");
    return guarded([&] {
        RunOptions opts;
        opts.threads = threads > 0 ? threads : 1;
        if (out_dir) opts.out_dir = out_dir;
        if (seed >= 0) opts.seed = (uint64_t)seed;
        try {
            ExperimentOutcome out = run_experiment(path_or_preset, opts);
            *out_all_pass = out.all_pass ? 1 : 0;
            return MRF_OK;
        } catch (const Error& e) {
            std::string msg = e.what();
            bool io = msg.find("config") != std::string::npos ||
                      msg.find("cannot write") != std::string::npos;
            return fail(io ? MRF_ERR_IO : MRF_ERR_NUMERIC, msg);
        }
    });
}

int mrf_list_experiments(char* buf, size_t cap, size_t* inout_size) {
    if (!inout_size) return fail(MRF_ERR_INVALID_ARG, "null argument");
    return guarded([&] {
        std::string text;
        for (const auto& p : list_presets())
            text += p.name + "\t" + p.anchor + "\t" + p.runtime_class + "\n";
        *inout_size = text.size() + 1;
        if (!buf || cap < text.size() + 1)
            return fail(MRF_ERR_BUFFER, "buffer too small for preset listing");
        std::memcpy(buf, text.c_str(), text.size() + 1);
        return MRF_OK;
    });
}

}  // extern "C"
