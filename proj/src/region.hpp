#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vec.hpp"

namespace mrf {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Region;

struct RSpace { int dim = 0; };
struct Ball { Vec center; double radius = 0; };
struct Box { Vec lo, hi; };
struct RUnion { std::vector<Region> parts; };

// Open/closed distinction is handled at use sites via the signed margin:
// margin > 0 strictly inside, == 0 on the boundary, < 0 outside.
struct Region {
    std::variant<RSpace, Ball, Box, RUnion> shape;

    Region() : shape(RSpace{0}) {}
    Region(RSpace s) : shape(s) {}
    Region(Ball b) : shape(std::move(b)) {}
    Region(Box b) : shape(std::move(b)) {}
    Region(RUnion u) : shape(std::move(u)) {}

    int dim() const;
    bool is_whole_space() const { return std::holds_alternative<RSpace>(shape); }
};

// Signed distance estimate to the boundary: positive inside, negative outside.
// Exact for balls and boxes; for unions the max over parts (a lower bound on
// the inside distance, exact outside for disjoint parts).
double signed_margin(const Region& r, const Vec& x);

inline bool contains(const Region& r, const Vec& x) { return signed_margin(r, x) >= 0.0; }

double region_volume(const Region& r);   // throws for rspace/union
Box bounding_box(const Region& r);       // throws for rspace
double region_diameter(const Region& r); // inf for rspace

// Syntax: ball([c...],r) | box([lo...],[hi...]) | rspace(d) | union[R;R;...]
Region parse_region(const std::string& text);
std::string region_to_string(const Region& r);

struct HittingRecord {
    int level = 0;           // index into the exhaustion
    bool hit = false;
    double time = kInf;      // hit time; kInf encodes never-within-horizon
    Vec exit_point;
};

struct ExhaustionDomain {
    int dim = 0;
    Region omega;
    std::vector<Region> levels;  // nested Omega_1 c Omega_2 c ...
    bool bounded = false;

    // V(x) = max{ dist(x, R^d \ Omega)^-1, |x| }; throws for x outside Omega.
    double potential(const Vec& x) const;

    bool in_omega(const Vec& x) const { return contains(omega, x); }

    // Omega = R^d with dyadic exhaustion Omega_n = B_{2^n}.
    static ExhaustionDomain whole_space(int d, int nlevels = 40);
    // Bounded omega (ball or box): levels shrink the region by margin 2^-n of
    // its inradius.
    static ExhaustionDomain from_region(const Region& omega, int nlevels = 40);
};

}  // namespace mrf
