#include "region.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace mrf {

int Region::dim() const {
    if (auto* s = std::get_if<RSpace>(&shape)) return s->dim;
    if (auto* b = std::get_if<Ball>(&shape)) return b->center.d;
    if (auto* b = std::get_if<Box>(&shape)) return b->lo.d;
    auto& u = std::get<RUnion>(shape);
    return u.parts.empty() ? 0 : u.parts.front().dim();
}

double signed_margin(const Region& r, const Vec& x) {
    if (std::holds_alternative<RSpace>(r.shape)) return kInf;
    if (auto* b = std::get_if<Ball>(&r.shape)) return b->radius - (x - b->center).norm();
    if (auto* b = std::get_if<Box>(&r.shape)) {
        // Exact SDF for an axis-aligned box, sign flipped to inside-positive.
        double inside = kInf;
        double out2 = 0;
        bool outside = false;
        for (int i = 0; i < x.d; ++i) {
            double lo = b->lo[i] - x[i], hi = x[i] - b->hi[i];
            double e = std::max(lo, hi);
            if (e > 0) { outside = true; out2 += e * e; }
            inside = std::min(inside, -e);
        }
        return outside ? -std::sqrt(out2) : inside;
    }
    auto& u = std::get<RUnion>(r.shape);
    double best = -kInf;
    for (auto& p : u.parts) best = std::max(best, signed_margin(p, x));
    return best;
}

double region_volume(const Region& r) {
    if (auto* b = std::get_if<Ball>(&r.shape)) {
        int d = b->center.d;
        // volume of unit ball in R^d
        double v = (d == 1) ? 2.0 : (d == 2) ? M_PI : (d == 3) ? 4.0 * M_PI / 3.0
                 : std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
        return v * std::pow(b->radius, d);
    }
    if (auto* b = std::get_if<Box>(&r.shape)) {
        double v = 1;
        for (int i = 0; i < b->lo.d; ++i) v *= (b->hi[i] - b->lo[i]);
        return v;
    }
    throw Error("region_volume: only balls and boxes have a closed-form volume");
}

Box bounding_box(const Region& r) {
    if (auto* b = std::get_if<Ball>(&r.shape)) {
        Box out{Vec(b->center.d), Vec(b->center.d)};
        for (int i = 0; i < b->center.d; ++i) {
            out.lo[i] = b->center[i] - b->radius;
            out.hi[i] = b->center[i] + b->radius;
        }
        return out;
    }
    if (auto* b = std::get_if<Box>(&r.shape)) return *b;
    if (auto* u = std::get_if<RUnion>(&r.shape)) {
        if (u->parts.empty()) throw Error("bounding_box: empty union");
        Box out = bounding_box(u->parts.front());
        for (size_t k = 1; k < u->parts.size(); ++k) {
            Box bb = bounding_box(u->parts[k]);
            for (int i = 0; i < out.lo.d; ++i) {
                out.lo[i] = std::min(out.lo[i], bb.lo[i]);
                out.hi[i] = std::max(out.hi[i], bb.hi[i]);
            }
        }
        return out;
    }
    throw Error("bounding_box: whole space is unbounded");
}

double region_diameter(const Region& r) {
    if (r.is_whole_space()) return kInf;
    Box bb = bounding_box(r);
    return (bb.hi - bb.lo).norm();
}

// ---- parsing ---------------------------------------------------------------

namespace {

struct Parser {
    const std::string& s;
    size_t p = 0;
    explicit Parser(const std::string& str) : s(str) {}

    void skip() { while (p < s.size() && std::isspace((unsigned char)s[p])) ++p; }
    bool eat(char c) {
        skip();
        if (p < s.size() && s[p] == c) { ++p; return true; }
        return false;
    }
    void expect(char c) {
        if (!eat(c)) throw Error("region parse: expected '" + std::string(1, c) + "' at offset " + std::to_string(p) + " in '" + s + "'");
    }
    double number() {
        skip();
        size_t end;
        double v;
        try { v = std::stod(s.substr(p), &end); }
        catch (...) { throw Error("region parse: bad number at offset " + std::to_string(p) + " in '" + s + "'"); }
        p += end;
        return v;
    }
    Vec vector() {
        expect('[');
        Vec v(0);
        if (!eat(']')) {
            do {
                if (v.d >= kMaxDim) throw Error("region parse: vector too long");
                v.c[v.d++] = number();
            } while (eat(','));
            expect(']');
        }
        return v;
    }
    std::string ident() {
        skip();
        size_t start = p;
        while (p < s.size() && (std::isalnum((unsigned char)s[p]) || s[p] == '_')) ++p;
        return s.substr(start, p - start);
    }

    Region region() {
        std::string name = ident();
        if (name == "rspace") {
            int d = 0;
            if (eat('(')) { d = (int)number(); expect(')'); }
            return Region(RSpace{d});
        }
        if (name == "ball") {
            expect('(');
            Vec c = vector();
            expect(',');
            double rad = number();
            expect(')');
            if (rad <= 0) throw Error("region parse: ball radius must be positive");
            return Region(Ball{c, rad});
        }
        if (name == "box") {
            expect('(');
            Vec lo = vector();
            expect(',');
            Vec hi = vector();
            expect(')');
            if (lo.d != hi.d) throw Error("region parse: box corner dimensions differ");
            for (int i = 0; i < lo.d; ++i)
                if (!(lo[i] < hi[i])) throw Error("region parse: box needs lo < hi");
            return Region(Box{lo, hi});
        }
        if (name == "union") {
            expect('[');
            RUnion u;
            do { u.parts.push_back(region()); } while (eat(';'));
            expect(']');
            return Region(std::move(u));
        }
        throw Error("region parse: unknown region '" + name + "' in '" + s + "'");
    }
};

std::string vec_str(const Vec& v) {
    std::ostringstream os;
    os << "[";
    for (int i = 0; i < v.d; ++i) os << (i ? "," : "") << v[i];
    os << "]";
    return os.str();
}

}  // namespace

Region parse_region(const std::string& text) {
    Parser pa(text);
    Region r = pa.region();
    pa.skip();
    if (pa.p != text.size()) throw Error("region parse: trailing characters in '" + text + "'");
    return r;
}

std::string region_to_string(const Region& r) {
    if (auto* s = std::get_if<RSpace>(&r.shape)) return "rspace(" + std::to_string(s->dim) + ")";
    if (auto* b = std::get_if<Ball>(&r.shape)) {
        std::ostringstream os;
        os << "ball(" << vec_str(b->center) << "," << b->radius << ")";
        return os.str();
    }
    if (auto* b = std::get_if<Box>(&r.shape)) return "box(" + vec_str(b->lo) + "," + vec_str(b->hi) + ")";
    auto& u = std::get<RUnion>(r.shape);
    std::string s = "union[";
    for (size_t i = 0; i < u.parts.size(); ++i) s += (i ? ";" : "") + region_to_string(u.parts[i]);
    return s + "]";
}

// ---- exhaustion domain -----------------------------------------------------

double ExhaustionDomain::potential(const Vec& x) const {
    double m = signed_margin(omega, x);
    if (m < 0) throw Error("potential undefined outside Omega at x=" + x.str());
    double inv = (m == 0) ? kInf : (std::isinf(m) ? 0.0 : 1.0 / m);
    return std::max(inv, x.norm());
}

ExhaustionDomain ExhaustionDomain::whole_space(int d, int nlevels) {
    ExhaustionDomain dom;
    dom.dim = d;
    dom.omega = Region(RSpace{d});
    dom.bounded = false;
    for (int n = 1; n <= nlevels; ++n)
        dom.levels.push_back(Region(Ball{Vec(d), std::ldexp(1.0, n)}));
    return dom;
}

ExhaustionDomain ExhaustionDomain::from_region(const Region& omega, int nlevels) {
    if (omega.is_whole_space()) return whole_space(omega.dim(), nlevels);
    ExhaustionDomain dom;
    dom.dim = omega.dim();
    dom.omega = omega;
    dom.bounded = true;
    if (auto* b = std::get_if<Ball>(&omega.shape)) {
        for (int n = 1; n <= nlevels; ++n)
            dom.levels.push_back(Region(Ball{b->center, b->radius * (1.0 - std::ldexp(1.0, -n - 1))}));
        return dom;
    }
    if (auto* b = std::get_if<Box>(&omega.shape)) {
        double inr = kInf;
        for (int i = 0; i < b->lo.d; ++i) inr = std::min(inr, (b->hi[i] - b->lo[i]) / 2);
        for (int n = 1; n <= nlevels; ++n) {
            double inset = inr * std::ldexp(1.0, -n - 1);
            Box lvl = *b;
            for (int i = 0; i < lvl.lo.d; ++i) { lvl.lo[i] += inset; lvl.hi[i] -= inset; }
            dom.levels.push_back(Region(lvl));
        }
        return dom;
    }
    throw Error("ExhaustionDomain: default exhaustion only for rspace, balls and boxes");
}

}  // namespace mrf
