#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "dwave/core.hpp"

namespace dwave {

// Uniform grid on (0,1)^2 with N interior nodes per axis, h = 1/(N+1).
// Node (i,j), i,j in [0,N+1], sits at (ih, jh). Corners belong to the closure
// but not to the discrete boundary, and boundary integrals never see them.
struct Mesh {
    int n = 0;
    double h = 0.0;

    Mesh() = default;
    explicit Mesh(int n_interior) : n(n_interior), h(1.0 / (n_interior + 1)) {
        if (n < 2) throw InvalidParameter("grid/mesh: N >= 2 required, got " + std::to_string(n));
        if (std::abs(h * (n + 1) - 1.0) > 1e-15)
            throw InvalidParameter("grid/mesh: h*(N+1) != 1");
    }

    int extent() const { return n + 2; } // nodes per axis on the closure
    double x(int i) const { return i * h; }
    bool same(const Mesh& o) const { return n == o.n; }
};

inline void require_same_mesh(const Mesh& a, const Mesh& b, const char* where) {
    if (!a.same(b)) throw MeshMismatch(std::string(where));
}

// Scalar function handle on [0,1]^2 (continuous side of the transfer operators).
using ScalarField = std::function<double(double, double)>;

// Real-valued discrete function on the closed grid, extent (N+2)^2.
struct NodeField {
    Mesh mesh;
    std::vector<double> v;

    NodeField() = default;
    explicit NodeField(const Mesh& m) : mesh(m), v(static_cast<std::size_t>(m.extent()) * m.extent(), 0.0) {}

    double& operator()(int i, int j) { return v[static_cast<std::size_t>(i) * mesh.extent() + j]; }
    double operator()(int i, int j) const { return v[static_cast<std::size_t>(i) * mesh.extent() + j]; }

    static NodeField sample(const Mesh& m, const ScalarField& f) {
        NodeField out(m);
        for (int i = 0; i <= m.n + 1; ++i)
            for (int j = 0; j <= m.n + 1; ++j)
                out(i, j) = f(m.x(i), m.x(j));
        return out;
    }

    // Force zero on the discrete boundary and at the four corners.
    void zero_boundary() {
        int e = mesh.n + 1;
        for (int i = 0; i <= e; ++i) {
            (*this)(i, 0) = 0.0;
            (*this)(i, e) = 0.0;
            (*this)(0, i) = 0.0;
            (*this)(e, i) = 0.0;
        }
    }

    bool boundary_is_zero(double tol = 0.0) const {
        int e = mesh.n + 1;
        for (int i = 0; i <= e; ++i)
            if (std::abs((*this)(i, 0)) > tol || std::abs((*this)(i, e)) > tol ||
                std::abs((*this)(0, i)) > tol || std::abs((*this)(e, i)) > tol)
                return false;
        return true;
    }

    NodeField& operator+=(const NodeField& o) {
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += o.v[k];
        return *this;
    }
    NodeField& operator-=(const NodeField& o) {
        for (std::size_t k = 0; k < v.size(); ++k) v[k] -= o.v[k];
        return *this;
    }
    NodeField& operator*=(double s) {
        for (double& x : v) x *= s;
        return *this;
    }
};

inline NodeField operator-(NodeField a, const NodeField& b) { a -= b; return a; }
inline NodeField operator+(NodeField a, const NodeField& b) { a += b; return a; }
inline NodeField operator*(double s, NodeField a) { a *= s; return a; }

// Field on the half-shifted set Omega_{h,k}^-. For axis 1 the index set is
// i in [0,N], j in [1,N]; for axis 2 it is i in [1,N], j in [0,N].
struct StaggeredField {
    Mesh mesh;
    int axis = 1;
    std::vector<double> v;

    StaggeredField() = default;
    StaggeredField(const Mesh& m, int k)
        : mesh(m), axis(k), v(static_cast<std::size_t>(m.n + 1) * m.n, 0.0) {
        if (k != 1 && k != 2) throw InvalidParameter("grid/staggered: axis must be 1 or 2");
    }

    // (i,j) in closure coordinates, restricted to the valid half-shifted range.
    double& at(int i, int j) {
        if (axis == 1) return v[static_cast<std::size_t>(i) * mesh.n + (j - 1)];
        return v[static_cast<std::size_t>(i - 1) * (mesh.n + 1) + j];
    }
    double at(int i, int j) const {
        if (axis == 1) return v[static_cast<std::size_t>(i) * mesh.n + (j - 1)];
        return v[static_cast<std::size_t>(i - 1) * (mesh.n + 1) + j];
    }

    template <class F> void for_each_index(F&& f) const {
        if (axis == 1) {
            for (int i = 0; i <= mesh.n; ++i)
                for (int j = 1; j <= mesh.n; ++j) f(i, j);
        } else {
            for (int i = 1; i <= mesh.n; ++i)
                for (int j = 0; j <= mesh.n; ++j) f(i, j);
        }
    }
};

// The four open edges of the discrete boundary, corners excluded.
enum class Edge : int { x1_lo = 0, x1_hi = 1, x2_lo = 2, x2_hi = 3 };

inline int edge_axis(Edge e) { return (e == Edge::x1_lo || e == Edge::x1_hi) ? 1 : 2; }
inline bool edge_is_high(Edge e) { return e == Edge::x1_hi || e == Edge::x2_hi; }

// Trace on the discrete boundary: 4 edges x N nodes, indexed by the running
// interior coordinate j in [1,N] along each edge.
struct BoundaryTrace {
    Mesh mesh;
    std::array<std::vector<double>, 4> edges;

    BoundaryTrace() = default;
    explicit BoundaryTrace(const Mesh& m) : mesh(m) {
        for (auto& e : edges) e.assign(m.n, 0.0);
    }

    double& at(Edge e, int j) { return edges[static_cast<int>(e)][j - 1]; }
    double at(Edge e, int j) const { return edges[static_cast<int>(e)][j - 1]; }

    // closure coordinates of node j on edge e
    std::pair<int, int> node(Edge e, int j) const {
        switch (e) {
        case Edge::x1_lo: return {0, j};
        case Edge::x1_hi: return {mesh.n + 1, j};
        case Edge::x2_lo: return {j, 0};
        default: return {j, mesh.n + 1};
        }
    }

    BoundaryTrace& operator-=(const BoundaryTrace& o) {
        for (int e = 0; e < 4; ++e)
            for (std::size_t k = 0; k < edges[e].size(); ++k) edges[e][k] -= o.edges[e][k];
        return *this;
    }
};

// Axis-aligned open rectangle; the only continuous subset shape supported.
struct Rect {
    double a1, b1, a2, b2;
    bool contains(double x1, double x2) const { return x1 > a1 && x1 < b1 && x2 > a2 && x2 < b2; }
};

struct BoundarySegment {
    Edge edge;
    double lo, hi; // open interval in the running coordinate
};

// Indicator masks over the interior grid (with staggered companions) or over
// the discrete boundary. Interior subsets are unions of open rectangles;
// membership of the staggered companion omega_{h,k}^- is tested analytically:
// (i,j) belongs iff x + eps*e_k lies in the union for some eps in [0,h].
struct SubsetMask {
    Mesh mesh;
    bool boundary = false;
    std::vector<std::uint8_t> interior;              // (N+2)^2, set on interior nodes only
    std::array<std::vector<std::uint8_t>, 2> stag;   // companions, axis 1 and 2
    std::array<std::vector<std::uint8_t>, 4> bdry;   // per-edge, length N
    double nonempty_threshold = 0.0;                 // mask non-empty for h below this

    static SubsetMask interior_union(const Mesh& m, const std::vector<Rect>& rects) {
        SubsetMask out;
        out.mesh = m;
        out.boundary = false;
        int e = m.extent();
        out.interior.assign(static_cast<std::size_t>(e) * e, 0);
        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j)
                for (const Rect& r : rects)
                    if (r.contains(m.x(i), m.x(j))) {
                        out.interior[static_cast<std::size_t>(i) * e + j] = 1;
                        break;
                    }
        for (int k = 1; k <= 2; ++k) {
            auto& s = out.stag[k - 1];
            s.assign(static_cast<std::size_t>(m.n + 1) * m.n, 0);
            StaggeredField idx(m, k);
            idx.for_each_index([&](int i, int j) {
                double x1 = m.x(i), x2 = m.x(j);
                for (const Rect& r : rects) {
                    bool hit = false;
                    if (k == 1)
                        hit = x2 > r.a2 && x2 < r.b2 && x1 < r.b1 && x1 + m.h > r.a1;
                    else
                        hit = x1 > r.a1 && x1 < r.b1 && x2 < r.b2 && x2 + m.h > r.a2;
                    if (hit) {
                        std::size_t p = (k == 1) ? static_cast<std::size_t>(i) * m.n + (j - 1)
                                                 : static_cast<std::size_t>(i - 1) * (m.n + 1) + j;
                        s[p] = 1;
                        break;
                    }
                }
            });
        }
        double side = 1.0;
        for (const Rect& r : rects) side = std::min({side, r.b1 - r.a1, r.b2 - r.a2});
        out.nonempty_threshold = side / 2.0;
        return out;
    }

    static SubsetMask boundary_union(const Mesh& m, const std::vector<BoundarySegment>& segs) {
        SubsetMask out;
        out.mesh = m;
        out.boundary = true;
        for (auto& e : out.bdry) e.assign(m.n, 0);
        for (const auto& s : segs)
            for (int j = 1; j <= m.n; ++j)
                if (m.x(j) > s.lo && m.x(j) < s.hi) out.bdry[static_cast<int>(s.edge)][j - 1] = 1;
        double len = 1.0;
        for (const auto& s : segs) len = std::min(len, s.hi - s.lo);
        out.nonempty_threshold = len / 2.0;
        return out;
    }

    static SubsetMask full_boundary(const Mesh& m) {
        return boundary_union(m, {{Edge::x1_lo, 0.0, 1.0},
                                  {Edge::x1_hi, 0.0, 1.0},
                                  {Edge::x2_lo, 0.0, 1.0},
                                  {Edge::x2_hi, 0.0, 1.0}});
    }

    bool in_interior(int i, int j) const {
        return interior[static_cast<std::size_t>(i) * mesh.extent() + j] != 0;
    }
    bool in_stag(int k, int i, int j) const {
        std::size_t p = (k == 1) ? static_cast<std::size_t>(i) * mesh.n + (j - 1)
                                 : static_cast<std::size_t>(i - 1) * (mesh.n + 1) + j;
        return stag[k - 1][p] != 0;
    }
    bool on_edge(Edge e, int j) const { return bdry[static_cast<int>(e)][j - 1] != 0; }

    bool empty() const {
        if (boundary) {
            for (const auto& e : bdry)
                for (auto b : e)
                    if (b) return false;
            return true;
        }
        for (auto b : interior)
            if (b) return false;
        return true;
    }
};

// --- discrete integrals -----------------------------------------------------

inline double integrate_interior(const NodeField& f) {
    Accumulator acc;
    for (int i = 1; i <= f.mesh.n; ++i)
        for (int j = 1; j <= f.mesh.n; ++j) acc.add(f(i, j));
    return f.mesh.h * f.mesh.h * acc.value();
}

inline double integrate_interior(const NodeField& f, const SubsetMask& mask) {
    require_same_mesh(f.mesh, mask.mesh, "grid/integrate_interior: mask mesh");
    if (mask.boundary) throw InvalidParameter("grid/integrate_interior: boundary mask given");
    Accumulator acc;
    for (int i = 1; i <= f.mesh.n; ++i)
        for (int j = 1; j <= f.mesh.n; ++j)
            if (mask.in_interior(i, j)) acc.add(f(i, j));
    return f.mesh.h * f.mesh.h * acc.value();
}

inline double integrate_staggered(const StaggeredField& f) {
    Accumulator acc;
    for (double x : f.v) acc.add(x);
    return f.mesh.h * f.mesh.h * acc.value();
}

inline double integrate_staggered(const StaggeredField& f, const SubsetMask& mask) {
    require_same_mesh(f.mesh, mask.mesh, "grid/integrate_staggered: mask mesh");
    Accumulator acc;
    f.for_each_index([&](int i, int j) {
        if (mask.in_stag(f.axis, i, j)) acc.add(f.at(i, j));
    });
    return f.mesh.h * f.mesh.h * acc.value();
}

inline double integrate_boundary(const BoundaryTrace& f) {
    Accumulator acc;
    for (const auto& e : f.edges)
        for (double x : e) acc.add(x);
    return f.mesh.h * acc.value();
}

inline double integrate_boundary(const BoundaryTrace& f, const SubsetMask& mask) {
    require_same_mesh(f.mesh, mask.mesh, "grid/integrate_boundary: mask mesh");
    if (!mask.boundary) throw InvalidParameter("grid/integrate_boundary: interior mask given");
    Accumulator acc;
    for (int e = 0; e < 4; ++e)
        for (int j = 1; j <= f.mesh.n; ++j)
            if (mask.on_edge(static_cast<Edge>(e), j)) acc.add(f.at(static_cast<Edge>(e), j));
    return f.mesh.h * acc.value();
}

// --- norms (section "Discrete L^p-spaces" and the H^1_h / H^2_h block) ------

inline double lp_norm_interior(const NodeField& f, double p) {
    if (p < 1.0) throw InvalidParameter("grid/norm: p < 1");
    Accumulator acc;
    for (int i = 1; i <= f.mesh.n; ++i)
        for (int j = 1; j <= f.mesh.n; ++j) acc.add(std::pow(std::abs(f(i, j)), p));
    return std::pow(f.mesh.h * f.mesh.h * acc.value(), 1.0 / p);
}

inline double l2_norm_interior(const NodeField& f) {
    Accumulator acc;
    for (int i = 1; i <= f.mesh.n; ++i)
        for (int j = 1; j <= f.mesh.n; ++j) acc.add(sq(f(i, j)));
    return std::sqrt(f.mesh.h * f.mesh.h * acc.value());
}

inline double l2_norm_interior(const NodeField& f, const SubsetMask& mask) {
    Accumulator acc;
    for (int i = 1; i <= f.mesh.n; ++i)
        for (int j = 1; j <= f.mesh.n; ++j)
            if (mask.in_interior(i, j)) acc.add(sq(f(i, j)));
    return std::sqrt(f.mesh.h * f.mesh.h * acc.value());
}

// L^2 over the full closure; this is the first term of the H^1_h norm.
inline double l2_norm_closure(const NodeField& f) {
    Accumulator acc;
    for (double x : f.v) acc.add(sq(x));
    return std::sqrt(f.mesh.h * f.mesh.h * acc.value());
}

inline double linf_norm(const NodeField& f) {
    double m = 0.0;
    for (int i = 1; i <= f.mesh.n; ++i)
        for (int j = 1; j <= f.mesh.n; ++j) m = std::max(m, std::abs(f(i, j)));
    return m;
}

inline double l2_norm(const StaggeredField& f) {
    Accumulator acc;
    for (double x : f.v) acc.add(sq(x));
    return std::sqrt(f.mesh.h * f.mesh.h * acc.value());
}

inline double l2_norm(const BoundaryTrace& f) {
    Accumulator acc;
    for (const auto& e : f.edges)
        for (double x : e) acc.add(sq(x));
    return std::sqrt(f.mesh.h * acc.value());
}

inline double l2_norm(const BoundaryTrace& f, const SubsetMask& mask) {
    Accumulator acc;
    for (int e = 0; e < 4; ++e)
        for (int j = 1; j <= f.mesh.n; ++j)
            if (mask.on_edge(static_cast<Edge>(e), j)) acc.add(sq(f.at(static_cast<Edge>(e), j)));
    return std::sqrt(f.mesh.h * acc.value());
}

} // namespace dwave
