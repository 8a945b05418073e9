#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace mrf {

constexpr int kMaxDim = 8;

// Small fixed-capacity vector for points/velocities in R^d, d <= kMaxDim.
struct Vec {
    int d = 0;
    std::array<double, kMaxDim> c{};

    Vec() = default;
    explicit Vec(int dim) : d(dim) {
        if (dim < 0 || dim > kMaxDim) throw std::invalid_argument("Vec: bad dimension");
    }
    Vec(std::initializer_list<double> xs) : d(static_cast<int>(xs.size())) {
        if (d > kMaxDim) throw std::invalid_argument("Vec: bad dimension");
        int i = 0;
        for (double v : xs) c[i++] = v;
    }

    double& operator[](int i) { return c[i]; }
    double operator[](int i) const { return c[i]; }

    Vec& operator+=(const Vec& o) { for (int i = 0; i < d; ++i) c[i] += o.c[i]; return *this; }
    Vec& operator-=(const Vec& o) { for (int i = 0; i < d; ++i) c[i] -= o.c[i]; return *this; }
    Vec& operator*=(double s) { for (int i = 0; i < d; ++i) c[i] *= s; return *this; }

    friend Vec operator+(Vec a, const Vec& b) { a += b; return a; }
    friend Vec operator-(Vec a, const Vec& b) { a -= b; return a; }
    friend Vec operator*(Vec a, double s) { a *= s; return a; }
    friend Vec operator*(double s, Vec a) { a *= s; return a; }

    double norm2() const {
        double s = 0;
        for (int i = 0; i < d; ++i) s += c[i] * c[i];
        return s;
    }
    double norm() const { return std::sqrt(norm2()); }

    bool finite() const {
        for (int i = 0; i < d; ++i)
            if (!std::isfinite(c[i])) return false;
        return true;
    }

    std::string str() const {
        std::string s = "(";
        for (int i = 0; i < d; ++i) s += (i ? "," : "") + std::to_string(c[i]);
        return s + ")";
    }
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0;
    for (int i = 0; i < a.d; ++i) s += a[i] * b[i];
    return s;
}

inline Vec zero_vec(int d) { return Vec(d); }

// y += s*x
inline void axpy(double s, const Vec& x, Vec& y) {
    for (int i = 0; i < y.d; ++i) y.c[i] += s * x.c[i];
}

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mrf
