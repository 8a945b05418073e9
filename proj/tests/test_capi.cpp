#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mrflow.h"

namespace fs = std::filesystem;

TEST_CASE("version and error strings are always available") {
    CHECK(std::strlen(mrf_version()) > 0);
    CHECK(mrf_last_error() != nullptr);
}

TEST_CASE("field lifecycle and evaluation") {
    mrf_field* f = nullptr;
    REQUIRE(mrf_field_create(R"({"name":"linear","lambda":2.0,"dim":2})", &f) == MRF_OK);
    int dim = 0;
    CHECK(mrf_field_dim(f, &dim) == MRF_OK);
    CHECK(dim == 2);
    double x[2] = {0.5, -1.0}, v[2];
    CHECK(mrf_field_eval(f, 0.0, x, v) == MRF_OK);
    CHECK(v[0] == doctest::Approx(1.0));
    CHECK(v[1] == doctest::Approx(-2.0));
    mrf_field_destroy(f);
}

TEST_CASE("bad field specs fail with a message") {
    mrf_field* f = nullptr;
    CHECK(mrf_field_create(R"({"name":"no-such-field"})", &f) != MRF_OK);
    CHECK(std::strlen(mrf_last_error()) > 0);
    CHECK(mrf_field_create("not json at all", &f) != MRF_OK);
    CHECK(mrf_field_create(R"({"name":"linear","lambda":1.0,"bogus":1})", &f) != MRF_OK);
    CHECK(mrf_field_create(nullptr, &f) == MRF_ERR_INVALID_ARG);
}

TEST_CASE("integration through the C API matches the closed form") {
    mrf_field* f = nullptr;
    mrf_domain* d = nullptr;
    mrf_trajectory* t = nullptr;
    REQUIRE(mrf_field_create(R"({"name":"linear","lambda":1.0,"dim":2})", &f) == MRF_OK);
    REQUIRE(mrf_domain_create("rspace(2)", 40, &d) == MRF_OK);
    double x0[2] = {0.3, 0.0};
    REQUIRE(mrf_integrate(f, d, x0, R"({"horizon":1.0,"rel_tol":1e-10})", &t) == MRF_OK);
    size_t n = 0;
    CHECK(mrf_trajectory_size(t, &n) == MRF_OK);
    CHECK(n > 2);
    double tt = 0, x[2];
    CHECK(mrf_trajectory_sample(t, n - 1, &tt, x) == MRF_OK);
    CHECK(tt == doctest::Approx(1.0));
    CHECK(x[0] == doctest::Approx(0.3 * std::exp(1.0)).epsilon(1e-8));
    double tmax = 0;
    int term = -1;
    CHECK(mrf_trajectory_info(t, &tmax, &term) == MRF_OK);
    CHECK(term == MRF_TERM_HORIZON);
    int cls = -1;
    CHECK(mrf_classify_blowup(t, d, 0, 0, 0, &cls) == MRF_OK);
    CHECK(cls == MRF_BLOWUP_NONE);
    CHECK(mrf_trajectory_sample(t, n + 5, &tt, x) == MRF_ERR_INVALID_ARG);
    mrf_trajectory_destroy(t);
    mrf_domain_destroy(d);
    mrf_field_destroy(f);
}

TEST_CASE("blow-up classification through the C API") {
    mrf_field* f = nullptr;
    mrf_domain* d = nullptr;
    mrf_trajectory* t = nullptr;
    REQUIRE(mrf_field_create(R"({"name":"cubic-radial","dim":3,"horizon":2.0})", &f) == MRF_OK);
    REQUIRE(mrf_domain_create("rspace(3)", 40, &d) == MRF_OK);
    double x0[3] = {1.0, 0.0, 0.0};
    REQUIRE(mrf_integrate(f, d, x0, R"({"horizon":2.0})", &t) == MRF_OK);
    double tmax = 0;
    int term = -1;
    CHECK(mrf_trajectory_info(t, &tmax, &term) == MRF_OK);
    CHECK(term == MRF_TERM_BLOWUP);
    CHECK(tmax == doctest::Approx(0.5).epsilon(1e-2));
    int cls = -1;
    CHECK(mrf_classify_blowup(t, d, 0, 0, 0, &cls) == MRF_OK);
    CHECK(cls == MRF_BLOWUP_PROPER);
    mrf_trajectory_destroy(t);
    mrf_domain_destroy(d);
    mrf_field_destroy(f);
}

TEST_CASE("preset listing fits the two-call buffer protocol") {
    size_t need = 0;
    CHECK(mrf_list_experiments(nullptr, 0, &need) == MRF_ERR_BUFFER);
    REQUIRE(need > 0);
    std::vector<char> buf(need);
    REQUIRE(mrf_list_experiments(buf.data(), buf.size(), &need) == MRF_OK);
    std::string text(buf.data());
    CHECK(text.find("thm-5.6-compression") != std::string::npos);
    CHECK(text.find("prop-7.3-oscillation") != std::string::npos);
}

TEST_CASE("experiment run writes a report and respects all-pass") {
    fs::path out = fs::temp_directory_path() / "mrf-capi-run";
    fs::remove_all(out);
    int all_pass = -1;
    REQUIRE(mrf_run_experiment("ode-jacobian", out.string().c_str(), 2, -1, &all_pass) ==
            MRF_OK);
    CHECK(all_pass == 1);
    CHECK(fs::exists(out / "report.json"));
    CHECK(fs::exists(out / "densities.csv"));
    fs::remove_all(out);
}

TEST_CASE("malformed config leaves no partial outputs") {
    fs::path cfg = fs::temp_directory_path() / "mrf-bad-config.json";
    fs::path out = fs::temp_directory_path() / "mrf-bad-out";
    fs::remove_all(out);
    {
        std::ofstream f(cfg);
        f << R"({"experiment":"flow","field":{"name":"linear","lambda":1.0},)"
          << R"("integrator":{"horizon":1.0},"unknown_section":{}})";
    }
    int all_pass = -1;
    CHECK(mrf_run_experiment(cfg.string().c_str(), out.string().c_str(), 1, -1, &all_pass) !=
          MRF_OK);
    CHECK(std::strlen(mrf_last_error()) > 0);
    CHECK(!fs::exists(out));
    fs::remove(cfg);
}

TEST_CASE("unknown preset or path is an error") {
    int all_pass = -1;
    CHECK(mrf_run_experiment("no-such-thing", nullptr, 1, -1, &all_pass) != MRF_OK);
}
