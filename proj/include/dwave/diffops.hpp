#pragma once

#include <variant>

#include "dwave/grid.hpp"

namespace dwave {

// --- stencil applications ----------------------------------------------------
// Centered / averaging / second-difference operators produce interior values
// only (boundary entries of the result are left at zero); callers needing a
// value on the closure must state a boundary policy themselves.

inline StaggeredField forward_diff(const NodeField& f, int k) {
    StaggeredField out(f.mesh, k);
    double h = f.mesh.h;
    out.for_each_index([&](int i, int j) {
        if (k == 1)
            out.at(i, j) = (f(i + 1, j) - f(i, j)) / h;
        else
            out.at(i, j) = (f(i, j + 1) - f(i, j)) / h;
    });
    return out;
}

inline NodeField centered_diff(const NodeField& f, int k) {
    NodeField out(f.mesh);
    double h2 = 2.0 * f.mesh.h;
    for (int i = 1; i <= f.mesh.n; ++i)
        for (int j = 1; j <= f.mesh.n; ++j)
            out(i, j) = (k == 1) ? (f(i + 1, j) - f(i - 1, j)) / h2
                                 : (f(i, j + 1) - f(i, j - 1)) / h2;
    return out;
}

inline NodeField second_diff(const NodeField& f, int k) {
    NodeField out(f.mesh);
    double hh = f.mesh.h * f.mesh.h;
    for (int i = 1; i <= f.mesh.n; ++i)
        for (int j = 1; j <= f.mesh.n; ++j)
            out(i, j) = (k == 1) ? (f(i + 1, j) - 2.0 * f(i, j) + f(i - 1, j)) / hh
                                 : (f(i, j + 1) - 2.0 * f(i, j) + f(i, j - 1)) / hh;
    return out;
}

// 5-point discrete Laplacian, interior nodes.
inline NodeField laplace(const NodeField& f) {
    NodeField out(f.mesh);
    double hh = f.mesh.h * f.mesh.h;
    for (int i = 1; i <= f.mesh.n; ++i)
        for (int j = 1; j <= f.mesh.n; ++j)
            out(i, j) = (f(i + 1, j) + f(i - 1, j) + f(i, j + 1) + f(i, j - 1) - 4.0 * f(i, j)) / hh;
    return out;
}

inline NodeField centered_avg(const NodeField& f, int k) { // m_{h,k}
    NodeField out(f.mesh);
    for (int i = 1; i <= f.mesh.n; ++i)
        for (int j = 1; j <= f.mesh.n; ++j)
            out(i, j) = (k == 1) ? 0.25 * (f(i + 1, j) + 2.0 * f(i, j) + f(i - 1, j))
                                 : 0.25 * (f(i, j + 1) + 2.0 * f(i, j) + f(i, j - 1));
    return out;
}

inline StaggeredField forward_avg(const NodeField& f, int k) { // m^+_{h,k}
    StaggeredField out(f.mesh, k);
    out.for_each_index([&](int i, int j) {
        out.at(i, j) = (k == 1) ? 0.5 * (f(i + 1, j) + f(i, j)) : 0.5 * (f(i, j + 1) + f(i, j));
    });
    return out;
}

// Cross forward difference d+_{h,1} d+_{h,2}, defined on the (N+1)^2 corner
// set {0..N}^2 (both forward differences exist there).
struct CornerField {
    Mesh mesh;
    std::vector<double> v;
    explicit CornerField(const Mesh& m)
        : mesh(m), v(static_cast<std::size_t>(m.n + 1) * (m.n + 1), 0.0) {}
    double& at(int i, int j) { return v[static_cast<std::size_t>(i) * (mesh.n + 1) + j]; }
    double at(int i, int j) const { return v[static_cast<std::size_t>(i) * (mesh.n + 1) + j]; }
};

inline CornerField cross_diff(const NodeField& f) {
    CornerField out(f.mesh);
    double hh = f.mesh.h * f.mesh.h;
    for (int i = 0; i <= f.mesh.n; ++i)
        for (int j = 0; j <= f.mesh.n; ++j)
            out.at(i, j) = (f(i + 1, j + 1) - f(i, j + 1) - f(i + 1, j) + f(i, j)) / hh;
    return out;
}

inline double l2_norm(const CornerField& f) {
    Accumulator acc;
    for (double x : f.v) acc.add(sq(x));
    return std::sqrt(f.mesh.h * f.mesh.h * acc.value());
}

// Tagged dispatcher over the operator block; the tag determines the stencil
// and the output field kind.
enum class Op {
    laplace,
    laplace_1,
    laplace_2,
    centered_1,
    centered_2,
    forward_1,
    forward_2,
    avg_1,
    avg_2,
    avg_fwd_1,
    avg_fwd_2,
};

inline std::variant<NodeField, StaggeredField> apply(Op tag, const NodeField& f) {
    switch (tag) {
    case Op::laplace: return laplace(f);
    case Op::laplace_1: return second_diff(f, 1);
    case Op::laplace_2: return second_diff(f, 2);
    case Op::centered_1: return centered_diff(f, 1);
    case Op::centered_2: return centered_diff(f, 2);
    case Op::forward_1: return forward_diff(f, 1);
    case Op::forward_2: return forward_diff(f, 2);
    case Op::avg_1: return centered_avg(f, 1);
    case Op::avg_2: return centered_avg(f, 2);
    case Op::avg_fwd_1: return forward_avg(f, 1);
    case Op::avg_fwd_2: return forward_avg(f, 2);
    }
    throw InvalidParameter("diffops/apply: unknown tag");
}

// Eigenvalue of -Laplace_h for the (k,l) sine mode.
inline double laplace_eigenvalue(const Mesh& m, int k, int l) {
    double s1 = std::sin(k * pi * m.h / 2.0);
    double s2 = std::sin(l * pi * m.h / 2.0);
    return 4.0 / (m.h * m.h) * (s1 * s1 + s2 * s2);
}

inline NodeField sine_mode(const Mesh& m, int k, int l) {
    NodeField f(m);
    for (int i = 0; i <= m.n + 1; ++i)
        for (int j = 0; j <= m.n + 1; ++j)
            f(i, j) = std::sin(k * pi * m.x(i)) * std::sin(l * pi * m.x(j));
    return f;
}

// One-sided difference on one edge of the boundary, oriented per the estimate
// terms: backward difference on the high edges, forward on the low edges.
// The field must vanish on the discrete boundary.
inline std::vector<double> normal_difference(const NodeField& f, Edge e) {
    if (!f.boundary_is_zero())
        throw PreconditionError("diffops/normal_difference: field is not Dirichlet-zero");
    int n = f.mesh.n;
    double h = f.mesh.h;
    std::vector<double> out(n, 0.0);
    for (int j = 1; j <= n; ++j) {
        switch (e) {
        case Edge::x1_hi: out[j - 1] = (f(n + 1, j) - f(n, j)) / h; break;
        case Edge::x1_lo: out[j - 1] = (f(1, j) - f(0, j)) / h; break;
        case Edge::x2_hi: out[j - 1] = (f(j, n + 1) - f(j, n)) / h; break;
        case Edge::x2_lo: out[j - 1] = (f(j, 1) - f(j, 0)) / h; break;
        }
    }
    return out;
}

// --- H^1_h and H^2_h norms ---------------------------------------------------

inline double h1_norm(const NodeField& f) {
    double a = l2_norm_closure(f);
    double b = l2_norm(forward_diff(f, 1));
    double c = l2_norm(forward_diff(f, 2));
    return std::sqrt(a * a + b * b + c * c);
}

// Same expression; meaningful for fields vanishing on the discrete boundary.
inline double h1_0_norm(const NodeField& f) { return h1_norm(f); }

inline double h2_norm(const NodeField& f) {
    double a = h1_norm(f);
    double b = l2_norm_interior(second_diff(f, 1));
    double c = l2_norm_interior(second_diff(f, 2));
    double d = l2_norm(cross_diff(f));
    return std::sqrt(a * a + b * b + c * c + d * d);
}

// H^1_h norm localized to a subset mask (L^2 part over the interior mask,
// staggered parts over the companions).
inline double h1_norm(const NodeField& f, const SubsetMask& mask) {
    double a = l2_norm_interior(f, mask);
    double b = std::sqrt(f.mesh.h * f.mesh.h * [&] {
        Accumulator acc;
        for (int k = 1; k <= 2; ++k) {
            StaggeredField d = forward_diff(f, k);
            d.for_each_index([&](int i, int j) {
                if (mask.in_stag(k, i, j)) acc.add(sq(d.at(i, j)));
            });
        }
        return acc.value();
    }());
    return std::sqrt(a * a + b * b);
}

// --- discrete integration-by-parts identities --------------------------------
// The 1-d identities are exercised along every grid row and column with the
// transverse index frozen, exactly how they are used when integrating by parts
// direction by direction on the square. Residuals are normalized by
// (|LHS|+|RHS|+1) so pass/fail is scale-free.

enum class IppId { ipp1, ipp2, ipp3, ipp4, ipp5, ipp6, ipp_transfer, ipp_cross };

inline const char* ipp_name(IppId id) {
    switch (id) {
    case IppId::ipp1: return "sbp-forward";
    case IppId::ipp2: return "centered-to-staggered";
    case IppId::ipp3: return "square-centered";
    case IppId::ipp4: return "laplace-green";
    case IppId::ipp5: return "laplace-square";
    case IppId::ipp6: return "laplace-centered";
    case IppId::ipp_transfer: return "staggered-transfer";
    case IppId::ipp_cross: return "cross-axis";
    }
    return "?";
}

namespace detail {

// Accessor for a 1-d slice of a node field: a(idx) with idx in [0, N+1].
struct Slice {
    const NodeField* f;
    int axis;  // varying axis
    int fixed; // frozen transverse index
    double operator()(int idx) const { return axis == 1 ? (*f)(idx, fixed) : (*f)(fixed, idx); }
};

struct Lhs_Rhs {
    Accumulator lhs, rhs;
};

// The eight 1-d sums of one identity on one slice, h-weighted.
inline void ipp_slice(IppId id, const Slice& g, const Slice& f, const Slice& v, int n, double h,
                      Accumulator& lhs, Accumulator& rhs) {
    auto dplus = [&](const Slice& a, int j) { return (a(j + 1) - a(j)) / h; };
    auto dminus = [&](const Slice& a, int j) { return (a(j) - a(j - 1)) / h; };
    auto dcent = [&](const Slice& a, int j) { return (a(j + 1) - a(j - 1)) / (2.0 * h); };
    auto dsec = [&](const Slice& a, int j) { return (a(j + 1) - 2.0 * a(j) + a(j - 1)) / (h * h); };
    auto mplus = [&](const Slice& a, int j) { return 0.5 * (a(j + 1) + a(j)); };

    switch (id) {
    case IppId::ipp1:
        for (int j = 0; j <= n; ++j) lhs.add(h * g(j) * dplus(f, j));
        for (int j = 1; j <= n + 1; ++j) rhs.add(-h * dminus(g, j) * f(j));
        rhs.add(g(n + 1) * f(n + 1));
        rhs.add(-g(0) * f(0));
        break;
    case IppId::ipp2:
        for (int j = 1; j <= n; ++j) lhs.add(h * g(j) * dcent(f, j));
        for (int j = 0; j <= n; ++j) rhs.add(h * mplus(g, j) * dplus(f, j));
        rhs.add(-0.5 * h * g(0) * dplus(f, 0));
        rhs.add(-0.5 * h * g(n + 1) * dminus(f, n + 1));
        break;
    case IppId::ipp3:
        for (int j = 1; j <= n; ++j) lhs.add(2.0 * h * g(j) * v(j) * dcent(v, j));
        for (int j = 1; j <= n; ++j) rhs.add(-h * sq(v(j)) * dcent(g, j));
        for (int j = 0; j <= n; ++j) rhs.add(0.5 * h * h * h * sq(dplus(v, j)) * dplus(g, j));
        break;
    case IppId::ipp4:
        for (int j = 1; j <= n; ++j) lhs.add(h * g(j) * dsec(v, j));
        for (int j = 0; j <= n; ++j) rhs.add(-h * dplus(v, j) * dplus(g, j));
        rhs.add(-dplus(v, 0) * g(0));
        rhs.add(dminus(v, n + 1) * g(n + 1));
        break;
    case IppId::ipp5:
        for (int j = 1; j <= n; ++j) lhs.add(h * g(j) * v(j) * dsec(v, j));
        for (int j = 0; j <= n; ++j) rhs.add(-h * sq(dplus(v, j)) * mplus(g, j));
        for (int j = 1; j <= n; ++j) rhs.add(0.5 * h * sq(v(j)) * dsec(g, j));
        break;
    case IppId::ipp6:
        for (int j = 1; j <= n; ++j) lhs.add(h * g(j) * dsec(v, j) * dcent(v, j));
        for (int j = 0; j <= n; ++j) rhs.add(-0.5 * h * sq(dplus(v, j)) * dplus(g, j));
        rhs.add(0.5 * sq(dminus(v, n + 1)) * g(n + 1));
        rhs.add(-0.5 * sq(dplus(v, 0)) * g(0));
        break;
    case IppId::ipp_transfer:
        for (int j = 0; j <= n; ++j) lhs.add(h * mplus(v, j) * dplus(f, j) * dplus(g, j));
        for (int j = 1; j <= n; ++j) rhs.add(h * v(j) * dcent(f, j) * dcent(g, j));
        for (int j = 1; j <= n; ++j) rhs.add(0.25 * h * h * h * v(j) * dsec(f, j) * dsec(g, j));
        break;
    default:
        throw InvalidParameter("diffops/ipp: 2-d identity passed to 1-d evaluator");
    }
}

} // namespace detail

// 2-d cross identity: int g Delta_{h,1} v d_{h,2} v over Omega_h against its
// staggered right-hand side. `swap` exchanges the roles of the two axes.
// Staggered averages of g are expanded directly in closure indices so the
// formula sees the same index ranges as the statement.
inline double cross_axis_residual(const NodeField& g, const NodeField& v, bool swap = false) {
    const Mesh& m = g.mesh;
    const double h = m.h;
    auto G = [&](int i, int j) { return swap ? g(j, i) : g(i, j); };
    auto V = [&](int i, int j) { return swap ? v(j, i) : v(i, j); };

    Accumulator lhs, rhs;
    for (int i = 1; i <= m.n; ++i)
        for (int j = 1; j <= m.n; ++j) {
            double lap1 = (V(i + 1, j) - 2.0 * V(i, j) + V(i - 1, j)) / (h * h);
            double d2 = (V(i, j + 1) - V(i, j - 1)) / (2.0 * h);
            lhs.add(G(i, j) * lap1 * d2);
        }

    // over Omega_{h,1}^-: i in [0,N], j in [1,N]
    for (int i = 0; i <= m.n; ++i)
        for (int j = 1; j <= m.n; ++j) {
            double dpv = (V(i + 1, j) - V(i, j)) / h;
            double dpg = (G(i + 1, j) - G(i, j)) / h;
            double dmg = (G(i + 1, j + 1) + G(i, j + 1) - G(i + 1, j - 1) - G(i, j - 1)) / (4.0 * h);
            double mdv = 0.5 * ((V(i, j + 1) - V(i, j - 1)) + (V(i + 1, j + 1) - V(i + 1, j - 1))) / (2.0 * h);
            rhs.add(0.5 * sq(dpv) * dmg);
            rhs.add(-dpv * mdv * dpg);
        }
    // corner set {0..N}^2
    for (int i = 0; i <= m.n; ++i)
        for (int j = 0; j <= m.n; ++j) {
            double cv = (V(i + 1, j + 1) - V(i, j + 1) - V(i + 1, j) + V(i, j)) / (h * h);
            double dmg = (G(i + 1, j + 1) + G(i, j + 1) - G(i + 1, j) - G(i, j)) / (2.0 * h);
            rhs.add(-0.25 * h * h * sq(cv) * dmg);
        }

    double L = h * h * lhs.value();
    double R = h * h * rhs.value();
    return std::abs(L - R) / (std::abs(L) + std::abs(R) + 1.0);
}

// Normalized residual |LHS-RHS|/(|LHS|+|RHS|+1) of a named identity, maximized
// over the two directions. The 1-d identities are applied row- and
// column-wise; fields enter through their closure values.
inline double ipp_residual(IppId id, const NodeField& g, const NodeField& f, const NodeField& v) {
    require_same_mesh(g.mesh, v.mesh, "diffops/ipp: fields");
    bool needs_zero_v = (id == IppId::ipp3 || id == IppId::ipp5 || id == IppId::ipp6 ||
                         id == IppId::ipp_transfer || id == IppId::ipp_cross);
    if (needs_zero_v && !v.boundary_is_zero())
        throw PreconditionError("diffops/ipp: identity requires boundary-zero v");

    if (id == IppId::ipp_cross)
        return std::max(cross_axis_residual(g, v, false), cross_axis_residual(g, v, true));

    const Mesh& m = g.mesh;
    double worst = 0.0;
    for (int axis = 1; axis <= 2; ++axis) {
        Accumulator lhs, rhs;
        for (int t = 1; t <= m.n; ++t) {
            detail::Slice sg{&g, axis, t}, sf{&f, axis, t}, sv{&v, axis, t};
            Accumulator l1, r1;
            detail::ipp_slice(id, sg, sf, sv, m.n, m.h, l1, r1);
            lhs.add(m.h * l1.value());
            rhs.add(m.h * r1.value());
        }
        double L = lhs.value(), R = rhs.value();
        worst = std::max(worst, std::abs(L - R) / (std::abs(L) + std::abs(R) + 1.0));
    }
    return worst;
}

} // namespace dwave
