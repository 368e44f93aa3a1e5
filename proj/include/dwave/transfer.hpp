#pragma once

#include <array>
#include <map>

#include "dwave/grid.hpp"

namespace dwave {

namespace gauss {

// Gauss-Legendre nodes/weights on [-1,1].
inline constexpr std::array<double, 2> x2{-0.5773502691896257, 0.5773502691896257};
inline constexpr std::array<double, 2> w2{1.0, 1.0};

inline constexpr std::array<double, 4> x4{-0.8611363115940526, -0.3399810435848563,
                                          0.3399810435848563, 0.8611363115940526};
inline constexpr std::array<double, 4> w4{0.3478548451374538, 0.6521451548625461,
                                          0.6521451548625461, 0.3478548451374538};

inline constexpr std::array<double, 8> x8{
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> w8{
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

inline constexpr std::array<double, 16> x16{
    -0.9894009349916499, -0.9445750230732326, -0.8656312023878318, -0.7554044083550030,
    -0.6178762444026438, -0.4580167776572274, -0.2816035507792589, -0.0950125098376374,
    0.0950125098376374,  0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
    0.7554044083550030,  0.8656312023878318,  0.9445750230732326,  0.9894009349916499};
inline constexpr std::array<double, 16> w16{
    0.0271524594117541, 0.0622535239386479, 0.0951585116824928, 0.1246289712555339,
    0.1495959888165767, 0.1691565193950025, 0.1826034150449236, 0.1894506104550685,
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};

// Nodes/weights for arbitrary order by Newton iteration on Legendre polynomials.
inline void rule_uncached(int order, std::vector<double>& x, std::vector<double>& w) {
    x.resize(order);
    w.resize(order);
    for (int k = 0; k < order; ++k) {
        double t = std::cos(pi * (k + 0.75) / (order + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int m = 2; m <= order; ++m) {
                double p2 = ((2.0 * m - 1.0) * t * p1 - (m - 1.0) * p0) / m;
                p0 = p1;
                p1 = p2;
            }
            double dp = order * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-16) break;
        }
        double p0 = 1.0, p1 = t;
        for (int m = 2; m <= order; ++m) {
            double p2 = ((2.0 * m - 1.0) * t * p1 - (m - 1.0) * p0) / m;
            p0 = p1;
            p1 = p2;
        }
        double dp = order * (t * p1 - p0) / (t * t - 1.0);
        x[k] = t;
        w[k] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
}

struct Rule {
    std::vector<double> x, w;
};

// Per-thread cache; kernel quadratures request the same orders over and over.
inline const Rule& cached(int order) {
    thread_local std::map<int, Rule> cache;
    auto it = cache.find(order);
    if (it == cache.end()) {
        Rule r;
        rule_uncached(order, r.x, r.w);
        it = cache.emplace(order, std::move(r)).first;
    }
    return it->second;
}

inline void rule(int order, std::vector<double>& x, std::vector<double>& w) {
    const Rule& r = cached(order);
    x = r.x;
    w = r.w;
}

} // namespace gauss

// Piecewise bilinear extension e_h: exact at nodes, evaluable on [0,1]^2.
struct AffineExtension {
    NodeField f;

    double operator()(double x1, double x2) const {
        const Mesh& m = f.mesh;
        if (x1 < -1e-14 || x1 > 1.0 + 1e-14 || x2 < -1e-14 || x2 > 1.0 + 1e-14)
            throw DomainError("transfer/e_h: query outside [0,1]^2");
        x1 = std::min(std::max(x1, 0.0), 1.0);
        x2 = std::min(std::max(x2, 0.0), 1.0);
        int i = std::min(static_cast<int>(x1 / m.h), m.n);
        int j = std::min(static_cast<int>(x2 / m.h), m.n);
        double s = (x1 - i * m.h) / m.h;
        double t = (x2 - j * m.h) / m.h;
        return (1.0 - s) * (1.0 - t) * f(i, j) + s * (1.0 - t) * f(i + 1, j) +
               (1.0 - s) * t * f(i, j + 1) + s * t * f(i + 1, j + 1);
    }

    // gradient of the bilinear interpolant inside a cell
    std::array<double, 2> gradient(double x1, double x2) const {
        const Mesh& m = f.mesh;
        x1 = std::min(std::max(x1, 0.0), 1.0);
        x2 = std::min(std::max(x2, 0.0), 1.0);
        int i = std::min(static_cast<int>(x1 / m.h), m.n);
        int j = std::min(static_cast<int>(x2 / m.h), m.n);
        double s = (x1 - i * m.h) / m.h;
        double t = (x2 - j * m.h) / m.h;
        double g1 = ((1.0 - t) * (f(i + 1, j) - f(i, j)) + t * (f(i + 1, j + 1) - f(i, j + 1))) / m.h;
        double g2 = ((1.0 - s) * (f(i, j + 1) - f(i, j)) + s * (f(i + 1, j + 1) - f(i + 1, j))) / m.h;
        return {g1, g2};
    }
};

inline AffineExtension extend_affine(const NodeField& f) { return AffineExtension{f}; }

// Piecewise constant extension e_h^0: interior value on the half-open cell
// centered at each interior node, zero elsewhere.
struct ConstantExtension {
    NodeField f;

    double operator()(double x1, double x2) const {
        const Mesh& m = f.mesh;
        int i = static_cast<int>(std::floor(x1 / m.h + 0.5));
        int j = static_cast<int>(std::floor(x2 / m.h + 0.5));
        if (i < 1 || i > m.n || j < 1 || j > m.n) return 0.0;
        return f(i, j);
    }
};

inline ConstantExtension extend_constant(const NodeField& f) { return ConstantExtension{f}; }

// L^2(Omega) norm of e_h^0(f); equals the discrete L^2_h norm exactly.
inline double l2_of_constant_extension(const ConstantExtension& e) {
    return l2_norm_interior(e.f);
}

// Exact L^2(Omega) norm of the bilinear extension (2x2 Gauss per cell is exact
// for the squared bilinear).
inline double l2_of_affine_extension(const AffineExtension& e) {
    const Mesh& m = e.f.mesh;
    Accumulator acc;
    for (int i = 0; i <= m.n; ++i)
        for (int j = 0; j <= m.n; ++j)
            for (double gx : gauss::x2)
                for (double gy : gauss::x2) {
                    double x1 = (i + 0.5 * (gx + 1.0)) * m.h;
                    double x2 = (j + 0.5 * (gy + 1.0)) * m.h;
                    acc.add(sq(e(x1, x2)));
                }
    return std::sqrt(acc.value() * m.h * m.h / 4.0);
}

// Exact squared L^2(Omega) norm of grad e_h(f).
inline double grad_l2_sq_of_affine_extension(const AffineExtension& e) {
    const Mesh& m = e.f.mesh;
    Accumulator acc;
    for (int i = 0; i <= m.n; ++i)
        for (int j = 0; j <= m.n; ++j)
            for (double gx : gauss::x2)
                for (double gy : gauss::x2) {
                    double x1 = (i + 0.5 * (gx + 1.0)) * m.h;
                    double x2 = (j + 0.5 * (gy + 1.0)) * m.h;
                    auto g = e.gradient(x1, x2);
                    acc.add(sq(g[0]) + sq(g[1]));
                }
    return acc.value() * m.h * m.h / 4.0;
}

// L^2 distance between the two extensions of the same field, exact per cell
// piecewise decomposition is impractical, so a 4x4 Gauss rule per quarter-cell
// is used (integrand is piecewise smooth on quarter cells).
inline double extension_gap_l2(const NodeField& f) {
    const Mesh& m = f.mesh;
    AffineExtension ea{f};
    ConstantExtension ec{f};
    Accumulator acc;
    int cells = 2 * (m.n + 1);
    double hc = 1.0 / cells;
    for (int i = 0; i < cells; ++i)
        for (int j = 0; j < cells; ++j)
            for (std::size_t a = 0; a < gauss::x4.size(); ++a)
                for (std::size_t b = 0; b < gauss::x4.size(); ++b) {
                    double x1 = (i + 0.5 * (gauss::x4[a] + 1.0)) * hc;
                    double x2 = (j + 0.5 * (gauss::x4[b] + 1.0)) * hc;
                    double d = ea(x1, x2) - ec(x1, x2);
                    acc.add(gauss::w4[a] * gauss::w4[b] * sq(d));
                }
    return std::sqrt(acc.value() * hc * hc / 4.0);
}

// --- restriction operators ---------------------------------------------------

// Nodal sampling r_h on the closure.
inline NodeField restrict_sample(const Mesh& m, const ScalarField& f) {
    return NodeField::sample(m, f);
}

// Cell-average restriction: interior nodes average f over the full h-cell,
// boundary nodes over the half cell clipped to Omega. A 4x4 tensor Gauss rule
// per (sub)cell keeps it exact on bilinear integrands.
inline NodeField restrict_cell_average(const Mesh& m, const ScalarField& f) {
    NodeField out(m);
    auto cell_average = [&](double a1, double b1, double a2, double b2) {
        Accumulator acc;
        for (std::size_t a = 0; a < gauss::x4.size(); ++a)
            for (std::size_t b = 0; b < gauss::x4.size(); ++b) {
                double x1 = 0.5 * (a1 + b1) + 0.5 * (b1 - a1) * gauss::x4[a];
                double x2 = 0.5 * (a2 + b2) + 0.5 * (b2 - a2) * gauss::x4[b];
                acc.add(gauss::w4[a] * gauss::w4[b] * f(x1, x2));
            }
        return acc.value() / 4.0; // weights sum to 2 per axis
    };
    for (int i = 0; i <= m.n + 1; ++i)
        for (int j = 0; j <= m.n + 1; ++j) {
            double a1 = std::max(m.x(i) - m.h / 2.0, 0.0), b1 = std::min(m.x(i) + m.h / 2.0, 1.0);
            double a2 = std::max(m.x(j) - m.h / 2.0, 0.0), b2 = std::min(m.x(j) + m.h / 2.0, 1.0);
            out(i, j) = cell_average(a1, b1, a2, b2);
        }
    return out;
}

// Boundary-segment average over the length-h piece of the edge centered at
// each boundary node. `f` is evaluated in the ambient coordinates.
inline BoundaryTrace restrict_boundary_average(const Mesh& m, const ScalarField& f) {
    BoundaryTrace out(m);
    for (int e = 0; e < 4; ++e) {
        Edge edge = static_cast<Edge>(e);
        for (int j = 1; j <= m.n; ++j) {
            double c = m.x(j);
            Accumulator acc;
            for (std::size_t a = 0; a < gauss::x8.size(); ++a) {
                double s = c + 0.5 * m.h * gauss::x8[a];
                double x1, x2;
                switch (edge) {
                case Edge::x1_lo: x1 = 0.0; x2 = s; break;
                case Edge::x1_hi: x1 = 1.0; x2 = s; break;
                case Edge::x2_lo: x1 = s; x2 = 0.0; break;
                default: x1 = s; x2 = 1.0; break;
                }
                acc.add(gauss::w8[a] * f(x1, x2));
            }
            out.at(edge, j) = acc.value() / 2.0;
        }
    }
    return out;
}

} // namespace dwave
