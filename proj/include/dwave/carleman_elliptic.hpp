#pragma once

#include <map>
#include <string>

#include "dwave/diffops.hpp"
#include "dwave/transfer.hpp"

namespace dwave {

// --- discrete elliptic solver --------------------------------------------------

struct EllipticProblem {
    Mesh mesh;
    NodeField q; // potential
    NodeField g; // right-hand side
};

// Matrix-free conjugate gradient for -Laplace_h w + q w = g with Dirichlet
// zero boundary. Diagonal preconditioning; negative curvature reported as an
// indefinite-operator error.
inline NodeField solve_elliptic(const EllipticProblem& p, double tol = 1e-12, int max_iter = 0) {
    const Mesh& m = p.mesh;
    require_same_mesh(p.q.mesh, p.g.mesh, "elliptic/solve");
    if (max_iter <= 0) max_iter = 20 * m.n * m.n;
    const double hh = m.h * m.h;

    auto apply = [&](const NodeField& u, NodeField& out) {
        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j)
                out(i, j) = -(u(i + 1, j) + u(i - 1, j) + u(i, j + 1) + u(i, j - 1) - 4.0 * u(i, j)) / hh +
                            p.q(i, j) * u(i, j);
    };
    auto dot = [&](const NodeField& a, const NodeField& b) {
        Accumulator acc;
        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j) acc.add(a(i, j) * b(i, j));
        return acc.value();
    };

    NodeField x(m), r = p.g, z(m), q(m);
    NodeField diag(m);
    for (int i = 1; i <= m.n; ++i)
        for (int j = 1; j <= m.n; ++j) diag(i, j) = 4.0 / hh + p.q(i, j);
    for (int i = 1; i <= m.n; ++i)
        for (int j = 1; j <= m.n; ++j) {
            if (diag(i, j) <= 0.0)
                throw SolverError("elliptic/solve: nonpositive diagonal, operator may be indefinite");
            z(i, j) = r(i, j) / diag(i, j);
        }
    NodeField d = z;
    double rz = dot(r, z);
    double g0 = std::sqrt(dot(p.g, p.g));
    if (g0 == 0.0) return x;

    for (int it = 0; it < max_iter; ++it) {
        apply(d, q);
        double dq = dot(d, q);
        if (dq <= 0.0)
            throw SolverError("elliptic/solve: negative curvature " + std::to_string(dq) +
                              " detected, operator indefinite");
        double alpha = rz / dq;
        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j) {
                x(i, j) += alpha * d(i, j);
                r(i, j) -= alpha * q(i, j);
            }
        double rn = std::sqrt(dot(r, r));
        if (rn <= tol * g0) return x;
        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j) z(i, j) = r(i, j) / diag(i, j);
        double rz_new = dot(r, z);
        double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j) d(i, j) = z(i, j) + beta * d(i, j);
    }
    throw SolverError("elliptic/solve: CG iteration cap reached without convergence");
}

// |w|_{H^2_h cap H^1_{0,h}} / |g|_{L^2_h}.
inline double h2_regularity_ratio(const EllipticProblem& p, const NodeField& w) {
    double gn = l2_norm_interior(p.g);
    if (gn == 0.0) throw InvalidParameter("elliptic/h2_ratio: undefined for g = 0");
    return h2_norm(w) / gn;
}

// --- regularized weight on the s-augmented cylinder -----------------------------

// Geometry: Gamma_0 is a sub-interval of the {x1 = 1} edge; omega_r is the
// half-disc |x - z0| < r with z0 = (1, center) on that edge. The arc meets the
// edge perpendicularly, so a weight vanishing on the arc can keep a nonzero
// gradient up to the contact points.
struct EllipticWeightConfig {
    double gamma0_lo = 0.3;
    double gamma0_hi = 0.7;
    double radius = 0.25;   // omega_r radius; contact points at center -+ radius
    double R0 = 0.2;        // the source-free collar width around omega_r
    double R = 0.08;        // annulus outer width, R < R0/2
    double mu = 2.0;
    double tilt = 0.5;      // strength of the inward tilt outside Gamma_0
    double squash = 0.95;   // range cap so |psi_r| <= squash <= 1 on the square
    double s_step = 0.0;    // 0 -> tied to h
    double eps_tau_h = 0.5; // admissibility for the cylinder functional
};

// psi_r(x) = S( Z * (r^2 - |x - z0|^2) * exp(theta * Tfun(x2) * (x1 - 1)) ),
// with Tfun = +1 near the center of Gamma_0 (weight pushes out through the
// observed piece) and -1 near and beyond the contact points, and S an odd
// monotone squashing keeping |psi_r| <= squash globally.
struct EllipticWeight {
    EllipticWeightConfig cfg;
    double z2 = 0.5; // center of Gamma_0
    double Z = 1.0;

    double tfun(double x2) const {
        // C^2 profile: +1 on the middle of Gamma_0, -1 outside it
        double half = 0.5 * (cfg.gamma0_hi - cfg.gamma0_lo);
        double u = std::abs(x2 - z2) / half; // 1 at the ends of Gamma_0
        return 1.0 - 2.0 * smoothstep5((u - 0.45) / 0.45);
    }

    double raw(double x1, double x2) const {
        double P = cfg.radius * cfg.radius - (sq(x1 - 1.0) + sq(x2 - z2));
        return Z * P * std::exp(cfg.tilt * tfun(x2) * (x1 - 1.0));
    }

    double psi(double x1, double x2) const {
        double L = cfg.squash;
        return L * std::tanh(raw(x1, x2) / L);
    }

    std::array<double, 2> grad_psi(double x1, double x2) const {
        double d = 1e-6;
        return {(psi(x1 + d, x2) - psi(x1 - d, x2)) / (2.0 * d),
                (psi(x1, x2 + d) - psi(x1, x2 - d)) / (2.0 * d)};
    }

    // phi_r(s,x) = exp(mu (psi_r(x) - s^2))
    double phi(double s, double x1, double x2) const {
        return std::exp(cfg.mu * (psi(x1, x2) - s * s));
    }

    bool in_omega_r(double x1, double x2) const {
        return x1 < 1.0 && x1 > 0.0 && x2 > 0.0 && x2 < 1.0 &&
               sq(x1 - 1.0) + sq(x2 - z2) < sq(cfg.radius);
    }
    double dist_omega_r(double x1, double x2) const {
        return std::max(0.0, std::sqrt(sq(x1 - 1.0) + sq(x2 - z2)) - cfg.radius);
    }
    bool in_omega_rR(double x1, double x2) const {
        return x1 < 1.0 && x1 > 0.0 && x2 > 0.0 && x2 < 1.0 && dist_omega_r(x1, x2) < cfg.R;
    }
    bool in_annulus(double x1, double x2) const {
        double d = dist_omega_r(x1, x2);
        return x1 > 0.0 && x1 < 1.0 && x2 > 0.0 && x2 < 1.0 && d >= 0.5 * cfg.R && d <= cfg.R;
    }

    // derived extrema (filled by build_elliptic_weight)
    double eps0 = 0.0;    // s window of the infimum
    double inf_omega = 0.0;  // I_{omega_r} = inf_{|s|<=eps0, x in omega_r} phi
    double sup_all = 0.0;    // S = sup_{|s|<=3, x} phi
    double sup_s23 = 0.0;    // sup over 2 < |s| < 3
    double sup_annulus = 0.0;

    double gap() const { return inf_omega - std::max(sup_annulus, sup_s23); }
};

// Builds the weight and verifies every structural requirement numerically:
// nonnegativity on the closed half-disc, nonvanishing gradient there and on the
// R-enlargement, zero value and strictly negative normal slope on the arc,
// negative normal slope on the boundary strips left of Gamma_0, the sup bounds,
// and the ordering of the extrema.
inline EllipticWeight build_elliptic_weight(const EllipticWeightConfig& cfg) {
    EllipticWeight w;
    w.cfg = cfg;
    w.z2 = 0.5 * (cfg.gamma0_lo + cfg.gamma0_hi);
    if (cfg.R >= 0.5 * cfg.R0)
        throw ConstructionError("elliptic_weight: R must be below R0/2");
    if (w.z2 - cfg.radius <= 0.0 || w.z2 + cfg.radius >= 1.0)
        throw ConstructionError("elliptic_weight: half-disc leaves the edge");

    // scale so that sup over omega_r of the raw weight is 1/2 before squashing
    w.Z = 1.0;
    double raw_max = 0.0;
    for (int i = 0; i <= 400; ++i)
        for (int j = 0; j <= 400; ++j) {
            double x1 = i / 400.0, x2 = j / 400.0;
            if (w.in_omega_r(x1, x2)) raw_max = std::max(raw_max, w.raw(x1, x2));
        }
    w.Z = 0.5 / raw_max;

    // bullet checks on a dense grid
    const int nd = 600;
    double min_grad_omega = 1e300, min_grad_rR = 1e300, min_psi_omega = 1e300;
    for (int i = 0; i <= nd; ++i)
        for (int j = 0; j <= nd; ++j) {
            double x1 = i / static_cast<double>(nd), x2 = j / static_cast<double>(nd);
            bool inr = w.in_omega_r(x1, x2);
            bool inrr = w.in_omega_rR(x1, x2);
            if (!inr && !inrr) continue;
            auto g = w.grad_psi(x1, x2);
            double gn = std::sqrt(sq(g[0]) + sq(g[1]));
            if (inr) {
                min_grad_omega = std::min(min_grad_omega, gn);
                min_psi_omega = std::min(min_psi_omega, w.psi(x1, x2));
            }
            if (inrr) min_grad_rR = std::min(min_grad_rR, gn);
        }
    if (min_psi_omega < -1e-9)
        throw ConstructionError("elliptic_weight: psi_r negative inside omega_r (bullet 1)");
    if (min_grad_omega <= 1e-3 || min_grad_rR <= 1e-3)
        throw ConstructionError("elliptic_weight: gradient degenerates (bullet 2 / enlargement)");

    // arc: zero value, negative normal slope; 1000 sample points
    for (int k = 0; k <= 1000; ++k) {
        double th = pi / 2.0 + pi * k / 1000.0; // angle from the edge
        double x1 = 1.0 + cfg.radius * std::cos(th);
        double x2 = w.z2 + cfg.radius * std::sin(th);
        if (x1 <= 0.0 || x2 <= 0.0 || x2 >= 1.0 || x1 >= 1.0) continue;
        if (std::abs(w.psi(x1, x2)) > 1e-12)
            throw ConstructionError("elliptic_weight: psi_r != 0 on the arc (bullet 4)");
        auto g = w.grad_psi(x1, x2);
        double dn = (g[0] * (x1 - 1.0) + g[1] * (x2 - w.z2)) / cfg.radius;
        if (dn >= -1e-6)
            throw ConstructionError("elliptic_weight: normal slope not negative on the arc (bullet 3)");
    }
    // boundary strips of the edge between the contact points and Gamma_0
    for (int k = 1; k < 200; ++k) {
        double lo_strip = (w.z2 - cfg.radius) + k * (cfg.gamma0_lo - (w.z2 - cfg.radius)) / 200.0;
        double hi_strip = cfg.gamma0_hi + k * ((w.z2 + cfg.radius) - cfg.gamma0_hi) / 200.0;
        for (double x2 : {lo_strip, hi_strip}) {
            auto g = w.grad_psi(1.0 - 1e-7, x2);
            if (g[0] >= -1e-7)
                throw ConstructionError("elliptic_weight: outward slope not negative on the edge strip");
        }
    }
    if (std::abs(w.psi(0.0, 0.0)) > 1.0 || std::abs(w.psi(0.0, 1.0)) > 1.0)
        throw ConstructionError("elliptic_weight: |psi_r| exceeds 1");

    // extrema by dense scan + local refinement via finer local grid
    auto scan = [&](auto&& pred, double slo, double shi) {
        double sup = -1e300;
        for (int si = 0; si <= 60; ++si) {
            double s = slo + (shi - slo) * si / 60.0;
            for (int i = 0; i <= nd; ++i)
                for (int j = 0; j <= nd; ++j) {
                    double x1 = i / static_cast<double>(nd), x2 = j / static_cast<double>(nd);
                    if (!pred(x1, x2)) continue;
                    sup = std::max(sup, w.phi(s, x1, x2));
                }
        }
        return sup;
    };

    // the infimum over omega_r of psi is 0 (arc); pick eps0 from the annulus gap
    double sup_psi_annulus = -1e300;
    for (int i = 0; i <= nd; ++i)
        for (int j = 0; j <= nd; ++j) {
            double x1 = i / static_cast<double>(nd), x2 = j / static_cast<double>(nd);
            if (w.in_annulus(x1, x2)) sup_psi_annulus = std::max(sup_psi_annulus, w.psi(x1, x2));
        }
    if (sup_psi_annulus >= 0.0)
        throw ConstructionError("elliptic_weight: annulus psi not negative");
    double g0 = -sup_psi_annulus;
    w.eps0 = 0.5 * std::sqrt(g0);

    w.inf_omega = std::exp(cfg.mu * (0.0 - sq(w.eps0))); // inf over |s|<=eps0, x in omega_r
    w.sup_annulus = std::exp(cfg.mu * (sup_psi_annulus));
    w.sup_s23 = std::exp(cfg.mu * (0.5 - 4.0));
    w.sup_all = scan([&](double a, double b) { return a >= 0.0 && b >= 0.0; }, 0.0, 0.0);

    if (w.gap() <= 0.0)
        throw ConstructionError("elliptic_weight: ordering I_omega > max(S_C, S_(2,3)) fails");
    return w;
}

// --- the cylinder functional -----------------------------------------------------

// s-indexed stack of node fields on [-3,3].
struct CylinderField {
    Mesh mesh;
    double s0 = -3.0, ds = 0.0;
    std::vector<NodeField> slices;

    CylinderField() = default;
    CylinderField(const Mesh& m, double step)
        : mesh(m), ds(step), slices(static_cast<std::size_t>(std::llround(6.0 / step)) + 1, NodeField(m)) {
        s0 = -3.0;
    }
    int steps() const { return static_cast<int>(slices.size()); }
    double s(int n) const { return s0 + n * ds; }
};

struct EllipticFunctionalRecord {
    std::map<std::string, double> terms;
    double lhs = 0.0, rhs = 0.0, ratio = 0.0;
};

// Both sides of the cylinder estimate for fields supported in the mask and
// vanishing at s = +-3 and on the spatial boundary. The observation term lives
// on Gamma_0; the source g = (-d_ss - Laplace_h + q) w uses the 3-point second
// difference in s.
inline EllipticFunctionalRecord elliptic_carleman_functionals(const EllipticWeight& w,
                                                              const CylinderField& v,
                                                              const NodeField& q, double tau,
                                                              const SubsetMask& support_mask,
                                                              const SubsetMask& gamma0) {
    const Mesh& m = v.mesh;
    if (tau * m.h > w.cfg.eps_tau_h + 1e-14)
        throw InadmissibleParameter("elliptic_carleman: tau*h exceeds " + std::to_string(w.cfg.eps_tau_h));
    int ns = v.steps();
    double scale = 0.0;
    for (int n = 0; n < ns; ++n) scale = std::max(scale, linf_norm(v.slices[n]));
    if (scale > 0.0) {
        if (l2_norm_interior(v.slices[0]) > 1e-12 * scale ||
            l2_norm_interior(v.slices[ns - 1]) > 1e-12 * scale)
            throw PreconditionError("elliptic_carleman: w != 0 at s = +-3");
        for (int n = 0; n < ns; ++n) {
            if (!v.slices[n].boundary_is_zero(1e-12 * scale))
                throw PreconditionError("elliptic_carleman: w not Dirichlet-zero");
            for (int i = 1; i <= m.n; ++i)
                for (int j = 1; j <= m.n; ++j)
                    if (v.slices[n](i, j) != 0.0 && !support_mask.in_interior(i, j))
                        throw PreconditionError("elliptic_carleman: support leaves (-3,3) x omega_{r,R}");
        }
    }

    const double hh = m.h * m.h;
    Accumulator lhs_w, lhs_ds, lhs_grad, rhs_src, rhs_obs;
    for (int n = 0; n < ns; ++n) {
        double s = v.s(n);
        double sw = (n == 0 || n == ns - 1) ? 0.5 * v.ds : v.ds;
        const NodeField& u = v.slices[n];

        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j) {
                double e2 = std::exp(2.0 * tau * w.phi(s, m.x(i), m.x(j)));
                lhs_w.add(sw * hh * e2 * sq(u(i, j)));

                double uss;
                if (n >= 1 && n + 1 < ns)
                    uss = (v.slices[n + 1](i, j) - 2.0 * u(i, j) + v.slices[n - 1](i, j)) / (v.ds * v.ds);
                else
                    uss = 0.0; // first/last slices vanish with their neighbors' support
                double lap = (u(i + 1, j) + u(i - 1, j) + u(i, j + 1) + u(i, j - 1) - 4.0 * u(i, j)) / hh;
                double g = -uss - lap + q(i, j) * u(i, j);
                rhs_src.add(sw * hh * e2 * sq(g));

                double dsv;
                if (n == 0)
                    dsv = (v.slices[1](i, j) - v.slices[0](i, j)) / v.ds;
                else if (n == ns - 1)
                    dsv = (v.slices[ns - 1](i, j) - v.slices[ns - 2](i, j)) / v.ds;
                else
                    dsv = (v.slices[n + 1](i, j) - v.slices[n - 1](i, j)) / (2.0 * v.ds);
                lhs_ds.add(sw * hh * e2 * sq(dsv));
            }

        for (int k = 1; k <= 2; ++k) {
            StaggeredField d = forward_diff(u, k);
            d.for_each_index([&](int i, int j) {
                double e2 = std::exp(2.0 * tau * w.phi(s, m.x(i), m.x(j)));
                lhs_grad.add(sw * hh * e2 * sq(d.at(i, j)));
            });
        }

        // observation: one-sided difference on Gamma_0 (x1 = 1 edge)
        for (int j = 1; j <= m.n; ++j)
            if (gamma0.on_edge(Edge::x1_hi, j)) {
                double e2 = std::exp(2.0 * tau * w.phi(s, 1.0, m.x(j)));
                double d = (u(m.n + 1, j) - u(m.n, j)) / m.h;
                rhs_obs.add(sw * m.h * e2 * sq(d));
            }
    }

    EllipticFunctionalRecord rec;
    rec.terms["lhs_w"] = tau * tau * tau * lhs_w.value();
    rec.terms["lhs_ds"] = tau * lhs_ds.value();
    rec.terms["lhs_grad"] = tau * lhs_grad.value();
    rec.terms["rhs_src"] = rhs_src.value();
    rec.terms["rhs_obs"] = tau * rhs_obs.value();
    rec.lhs = rec.terms["lhs_w"] + rec.terms["lhs_ds"] + rec.terms["lhs_grad"];
    rec.rhs = rec.terms["rhs_src"] + rec.terms["rhs_obs"];
    rec.ratio = (rec.lhs == 0.0 && rec.rhs == 0.0) ? 0.0 : rec.lhs / rec.rhs;
    return rec;
}

} // namespace dwave
