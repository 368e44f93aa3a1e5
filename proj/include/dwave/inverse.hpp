#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "dwave/rng.hpp"
#include "dwave/transfer.hpp"
#include "dwave/wavesolve.hpp"

namespace dwave {

// Penalized boundary measurement: flux trace on Gamma_0 plus the h-scaled
// high-frequency stream, with the product-space norms cached.
struct Measurement {
    FluxSeries flux;
    PenalizationStream pen;
    double flux_h1_sq = 0.0; // H^1(0,T; L^2_h(Gamma_0))
    double pen_l2_sq = 0.0;  // L^2(0,T; L^2_h)

    double product_norm() const { return std::sqrt(flux_h1_sq + pen_l2_sq); }
};

inline Measurement measure(const WaveSolution& sol, const SubsetMask& gamma0) {
    Measurement out;
    out.flux = flux_measurement(sol, gamma0);
    out.pen = penalization_stream(sol);
    out.flux_h1_sq = out.flux.h1_time_l2_sq();
    out.pen_l2_sq = out.pen.l2_time_l2_sq();
    return out;
}

// Gap between two measurements in the product norm (and the two pieces).
struct MeasurementGap {
    double flux_h1 = 0.0;
    double pen_l2 = 0.0;
    double total = 0.0;
};

inline MeasurementGap measurement_gap(const Measurement& a, const Measurement& b) {
    MeasurementGap g;
    FluxSeries df = a.flux;
    df -= b.flux;
    g.flux_h1 = std::sqrt(df.h1_time_l2_sq());
    Accumulator acc;
    for (int n = 0; n < a.pen.steps(); ++n) {
        double w = (n == 0 || n == a.pen.steps() - 1) ? 0.5 * a.pen.dt : a.pen.dt;
        Accumulator s;
        a.pen.s1[n].for_each_index([&](int i, int j) {
            s.add(sq(a.pen.s1[n].at(i, j) - b.pen.s1[n].at(i, j)));
        });
        a.pen.s2[n].for_each_index([&](int i, int j) {
            s.add(sq(a.pen.s2[n].at(i, j) - b.pen.s2[n].at(i, j)));
        });
        acc.add(w * a.pen.mesh.h * a.pen.mesh.h * s.value());
    }
    g.pen_l2 = std::sqrt(acc.value());
    g.total = std::sqrt(sq(g.flux_h1) + sq(g.pen_l2));
    return g;
}

// The same gap in the continuum form of the observation operator: exact
// L^2(Gamma_0) norms of the piecewise-linear flux trace and the exact
// L^2(Omega) norm of h grad e_h(d_tt y). Used for the product-norm
// equivalence factor, which the theory asserts is h-uniform.
inline double measurement_gap_extended(const WaveSolution& a, const WaveSolution& b,
                                       const SubsetMask& gamma0) {
    const Mesh& m = a.y.mesh;
    int steps = a.y.steps();
    // flux part: e_h trace is piecewise linear along each edge; Simpson is exact
    TimeSeries diff(m, a.y.t0, a.y.dt, steps);
    for (int n = 0; n < steps; ++n) diff[n] = a.y[n] - b.y[n];
    std::vector<BoundaryTrace> tr(steps, BoundaryTrace(m));
    for (int n = 0; n < steps; ++n) tr[n] = outward_difference(diff[n]);
    Accumulator fl;
    for (int n = 0; n < steps; ++n) {
        double w = (n == 0 || n == steps - 1) ? 0.5 * a.y.dt : a.y.dt;
        // value and time-derivative traces, edge-piecewise-linear L^2
        auto edge_l2sq = [&](const BoundaryTrace& t) {
            Accumulator e;
            for (int ei = 0; ei < 4; ++ei) {
                Edge ed = static_cast<Edge>(ei);
                for (int j = 1; j + 1 <= m.n; ++j) {
                    if (!gamma0.on_edge(ed, j) || !gamma0.on_edge(ed, j + 1)) continue;
                    double u = t.at(ed, j), v = t.at(ed, j + 1);
                    e.add(m.h / 3.0 * (u * u + u * v + v * v));
                }
            }
            return e.value();
        };
        BoundaryTrace td(m);
        for (int ei = 0; ei < 4; ++ei)
            for (int j = 1; j <= m.n; ++j) {
                Edge ed = static_cast<Edge>(ei);
                double d;
                if (n == 0)
                    d = (tr[1].at(ed, j) - tr[0].at(ed, j)) / a.y.dt;
                else if (n == steps - 1)
                    d = (tr[n].at(ed, j) - tr[n - 1].at(ed, j)) / a.y.dt;
                else
                    d = (tr[n + 1].at(ed, j) - tr[n - 1].at(ed, j)) / (2.0 * a.y.dt);
                td.at(ed, j) = d;
            }
        fl.add(w * (edge_l2sq(tr[n]) + edge_l2sq(td)));
    }
    // penalization part: |h grad e_h(d_tt diff)|^2 over Omega, exact per cell
    TimeSeries dtt = time_second_derivative(diff);
    Accumulator pe;
    for (int n = 0; n < steps; ++n) {
        double w = (n == 0 || n == steps - 1) ? 0.5 * a.y.dt : a.y.dt;
        AffineExtension e{dtt[n]};
        pe.add(w * m.h * m.h * grad_l2_sq_of_affine_extension(e));
    }
    return std::sqrt(fl.value() + pe.value());
}

// --- Lipschitz stability sweep ------------------------------------------------

struct StabilityRecord {
    double dq_norm = 0.0;
    double gap_boundary = 0.0;    // flux H^1 + penalization product norm
    double gap_distributed = 0.0; // omega-localized d_t terms + penalization
    double ratio_boundary = 0.0;
    double ratio_distributed = 0.0;
    bool skipped = false;
    std::string reason;
};

struct SweepConfig {
    int N = 20;
    double T = 1.6;
    double dt_factor = 8.0;
    int samples = 20;
    double m_cap = 2.0;     // potential sup-norm cap
    double alpha0 = 1.0;    // lower bound for |y0|
    double amplitude = 0.3; // perturbation size
    double delta = 0.2;     // collar width of the distributed variant
    std::uint64_t seed = 1;
    bool h1_bounded = false; // draw perturbations vanishing on the boundary ring
};

// Random potential perturbation: tensor trig modes up to frequency 4 plus a
// C^2 bump, amplitude-capped.
inline NodeField perturbation(const Mesh& m, Rng& rng, double amplitude, bool h1_bounded) {
    NodeField p(m);
    int modes = 2 + rng.uniform_int(0, 2);
    for (int q = 0; q < modes; ++q) {
        int k = rng.uniform_int(1, 4), l = rng.uniform_int(1, 4);
        double c = rng.uniform(-1.0, 1.0);
        bool cosx = !h1_bounded && rng.uniform() < 0.5;
        bool cosy = !h1_bounded && rng.uniform() < 0.5;
        for (int i = 0; i <= m.n + 1; ++i)
            for (int j = 0; j <= m.n + 1; ++j) {
                double fx = cosx ? std::cos(k * pi * m.x(i)) : std::sin(k * pi * m.x(i));
                double fy = cosy ? std::cos(l * pi * m.x(j)) : std::sin(l * pi * m.x(j));
                p(i, j) += c * fx * fy;
            }
    }
    if (rng.uniform() < 0.5) {
        double cx = rng.uniform(0.25, 0.75), cy = rng.uniform(0.25, 0.75);
        double rad = rng.uniform(0.12, 0.3);
        double c = rng.uniform(-1.0, 1.0);
        for (int i = 0; i <= m.n + 1; ++i)
            for (int j = 0; j <= m.n + 1; ++j) {
                double d = std::hypot(m.x(i) - cx, m.x(j) - cy);
                if (d < rad) p(i, j) += c * sq(1.0 - sq(d / rad)) * sq(1.0 - sq(d / rad));
            }
    }
    double mx = 0.0;
    for (double x : p.v) mx = std::max(mx, std::abs(x));
    if (mx > 0.0)
        for (double& x : p.v) x *= amplitude / mx;
    if (h1_bounded) p.zero_boundary();
    return p;
}

struct SweepSummary {
    std::vector<StabilityRecord> records;
    double max_ratio_boundary = 0.0;
    double max_ratio_distributed = 0.0;
    double equivalence_factor_lo = 1e300; // product-norm expressions ratio
    double equivalence_factor_hi = 0.0;
};

inline SweepSummary lipschitz_sweep(const SweepConfig& cfg) {
    if (cfg.T <= std::sqrt(2.0))
        throw InvalidParameter("inverse/sweep: Gamma-condition needs T > sqrt(2)");
    Mesh m(cfg.N);
    double dt = m.h / cfg.dt_factor;

    NodeField qa = NodeField::sample(m, [](double a, double b) { return 1.0 + 0.3 * a * b; });
    NodeField y0 = NodeField::sample(m, [cfg](double a, double b) {
        return 2.0 * cfg.alpha0 + 0.5 * std::sin(pi * a) * std::sin(pi * b);
    });
    // positivity gate
    for (int i = 1; i <= m.n; ++i)
        for (int j = 1; j <= m.n; ++j)
            if (std::abs(y0(i, j)) < cfg.alpha0)
                throw InvalidParameter("inverse/sweep: |y0| >= alpha0 violated");
    NodeField y1 = NodeField::sample(m, [](double a, double b) { return 0.2 * a * (1.0 - b); });
    auto bdry = [cfg](double, int, int) { return 2.0 * cfg.alpha0; };

    SubsetMask gamma_plus = SubsetMask::boundary_union(
        m, {{Edge::x1_hi, 0.0, 1.0}, {Edge::x2_hi, 0.0, 1.0}});
    SubsetMask omega = SubsetMask::interior_union(
        m, {{1.0 - cfg.delta, 1.0, 0.0, 1.0}, {0.0, 1.0, 1.0 - cfg.delta, 1.0}});

    WaveProblem pa{m, qa, y0, y1, nullptr, bdry, 0.0, cfg.T, dt};
    WaveSolution sa = solve(pa);
    Measurement ma = measure(sa, gamma_plus);

    SweepSummary out;
    for (int s = 0; s < cfg.samples; ++s) {
        Rng rng = Rng::split(cfg.seed, s);
        NodeField dq = perturbation(m, rng, cfg.amplitude, cfg.h1_bounded);
        NodeField qb = qa + dq;
        if (linf_norm(qb) > cfg.m_cap) {
            double sc = cfg.m_cap / linf_norm(qb);
            for (auto& x : qb.v) x *= sc;
            dq = qb - qa;
        }
        StabilityRecord rec;
        rec.dq_norm = l2_norm_interior(dq);
        if (rec.dq_norm == 0.0) {
            rec.skipped = true;
            rec.reason = "identical potentials";
            out.records.push_back(rec);
            continue;
        }
        WaveProblem pb{m, qb, y0, y1, nullptr, bdry, 0.0, cfg.T, dt};
        WaveSolution sb = solve(pb);
        Measurement mb = measure(sb, gamma_plus);
        MeasurementGap g = measurement_gap(ma, mb);
        rec.gap_boundary = g.total;
        rec.ratio_boundary = rec.dq_norm / g.total;

        // distributed variant: omega-localized d_t y terms + penalization
        TimeSeries zdiff(m, 0.0, dt, sa.y.steps());
        for (int n = 0; n < sa.y.steps(); ++n) zdiff[n] = sa.velocity[n] - sb.velocity[n];
        TimeSeries zdiff_t = time_derivative(zdiff);
        Accumulator loc;
        for (int n = 0; n < zdiff.steps(); ++n) {
            double w = trapezoid_weight(zdiff, n);
            double a = l2_norm_interior(zdiff[n], omega);
            double b = l2_norm_interior(zdiff_t[n], omega);
            Accumulator st;
            for (int k = 1; k <= 2; ++k) {
                StaggeredField d = forward_diff(zdiff[n], k);
                d.for_each_index([&](int i, int j) {
                    if (omega.in_stag(k, i, j)) st.add(sq(d.at(i, j)));
                });
            }
            loc.add(w * (a * a + b * b + m.h * m.h * st.value()));
        }
        rec.gap_distributed = std::sqrt(loc.value() + sq(g.pen_l2));
        rec.ratio_distributed = rec.dq_norm / rec.gap_distributed;

        // product-norm equivalence: discrete expression vs extended expression
        double ext = measurement_gap_extended(sa, sb, gamma_plus);
        double disc = g.flux_h1 + g.pen_l2;
        if (ext > 0.0) {
            out.equivalence_factor_lo = std::min(out.equivalence_factor_lo, disc / ext);
            out.equivalence_factor_hi = std::max(out.equivalence_factor_hi, disc / ext);
        }

        out.max_ratio_boundary = std::max(out.max_ratio_boundary, rec.ratio_boundary);
        out.max_ratio_distributed = std::max(out.max_ratio_distributed, rec.ratio_distributed);
        out.records.push_back(rec);
    }
    return out;
}

// --- consistency construction ---------------------------------------------------

// Closed-form continuous inputs of the manufactured mode.
struct ManufacturedProblem {
    std::function<double(double, double, double)> y;    // y(t,x1,x2)
    std::function<double(double, double, double)> y_t;  // d_t y
    std::function<double(double, double, double)> y_tt; // d_tt y
    ScalarField q;                                      // target potential
    ScalarField q_tilde;                                // extension matching q on the boundary
};

struct DiscreteData {
    NodeField y0, y1, q_h, q_tilde_h;
    SpaceTimeNodeFn source;   // f_h(t,i,j), assembled with the discrete Laplacian
    SpaceTimeNodeFn boundary; // trace of the restricted trajectory
};

// Cell-average restrictions of the data; the source is assembled with the
// discrete operator so the restricted trajectory solves the semi-discrete
// system exactly.
inline DiscreteData consistency_data(const Mesh& m, const ManufacturedProblem& mp, double alpha0) {
    DiscreteData d;
    d.y0 = restrict_cell_average(m, [&](double a, double b) { return mp.y(0.0, a, b); });
    d.y1 = restrict_cell_average(m, [&](double a, double b) { return mp.y_t(0.0, a, b); });
    for (int i = 1; i <= m.n; ++i)
        for (int j = 1; j <= m.n; ++j)
            if (std::abs(d.y0(i, j)) < alpha0)
                throw PreconditionError("inverse/consistency: |y0| >= alpha0 rejected");
    d.q_h = restrict_cell_average(m, mp.q);
    d.q_tilde_h = restrict_cell_average(m, mp.q_tilde);

    NodeField qt = d.q_tilde_h;
    auto ytilde = [mp, m](double t) {
        return restrict_cell_average(m, [&](double a, double b) { return mp.y(t, a, b); });
    };
    // f_h(t) = r~(d_tt y) - Laplace_h r~(y(t)) + q~_h r~(y(t)), evaluated lazily
    // per time with a one-deep cache (the solver sweeps t monotonically)
    auto cache = std::make_shared<std::pair<double, NodeField>>(1e300, NodeField(m));
    auto cache_lap = std::make_shared<NodeField>(m);
    d.source = [mp, m, qt, cache, cache_lap](double t, int i, int j) {
        if (cache->first != t) {
            cache->second =
                restrict_cell_average(m, [&](double a, double b) { return mp.y(t, a, b); });
            *cache_lap = laplace(cache->second);
            cache->first = t;
        }
        double ytt = 0.0;
        {
            // r~ commutes with d_tt: restrict the closed-form second derivative
            // at the node cell
            Accumulator acc;
            double a1 = std::max(m.x(i) - m.h / 2.0, 0.0), b1 = std::min(m.x(i) + m.h / 2.0, 1.0);
            double a2 = std::max(m.x(j) - m.h / 2.0, 0.0), b2 = std::min(m.x(j) + m.h / 2.0, 1.0);
            for (std::size_t a = 0; a < gauss::x4.size(); ++a)
                for (std::size_t b = 0; b < gauss::x4.size(); ++b) {
                    double x1 = 0.5 * (a1 + b1) + 0.5 * (b1 - a1) * gauss::x4[a];
                    double x2 = 0.5 * (a2 + b2) + 0.5 * (b2 - a2) * gauss::x4[b];
                    acc.add(gauss::w4[a] * gauss::w4[b] * mp.y_tt(t, x1, x2));
                }
            ytt = acc.value() / 4.0;
        }
        return ytt - (*cache_lap)(i, j) + qt(i, j) * cache->second(i, j);
    };
    auto bcache = std::make_shared<std::pair<double, NodeField>>(1e300, NodeField(m));
    d.boundary = [mp, m, bcache](double t, int i, int j) {
        if (bcache->first != t) {
            bcache->second =
                restrict_cell_average(m, [&](double a, double b) { return mp.y(t, a, b); });
            bcache->first = t;
        }
        return bcache->second(i, j);
    };
    return d;
}

// --- adjoint-state reconstruction -------------------------------------------------

struct ReconstructOptions {
    double grad_tol = 1e-8;
    int max_iter = 120;
    int max_halvings = 40;
    double tikhonov = 0.0;            // eps_reg |grad_h q|^2, off by default
    const SubsetMask* known_region = nullptr; // q fixed there
    const NodeField* known_values = nullptr;
};

struct ReconstructLog {
    std::vector<double> objective;
    std::vector<double> grad_norm;
    int iterations = 0;
    std::string stop_reason;
};

namespace detail {

// Discrete objective: J(q) = 1/2 |flux(q) - flux*|^2_{L^2(t; L^2_h(G0))}
//                    + 1/2 |pen(q) - pen*|^2_{L^2(t; L^2_h)}
// with the exact reverse-sweep gradient of the leapfrog recursion, so the
// finite-difference check holds to rounding.
struct AdjointWorkspace {
    Mesh m;
    SubsetMask gamma0;
    double dt = 0.0;
    double tikhonov = 0.0;

    double evaluate(const WaveProblem& prob, const Measurement& target, const NodeField& q,
                    NodeField* grad) const {
        WaveProblem p = prob;
        p.q = q;
        WaveSolution sol = solve(p);
        const TimeSeries& y = sol.y;
        int M = y.steps() - 1;
        const double hh = m.h * m.h;
        const double dd = dt * dt;

        // residuals
        std::vector<BoundaryTrace> rflux(M + 1, BoundaryTrace(m));
        for (int n = 0; n <= M; ++n) {
            BoundaryTrace tr = outward_difference(y[n]);
            for (int e = 0; e < 4; ++e)
                for (int j = 1; j <= m.n; ++j) {
                    Edge ed = static_cast<Edge>(e);
                    if (gamma0.on_edge(ed, j))
                        rflux[n].at(ed, j) = tr.at(ed, j) - target.flux.traces[n].at(ed, j);
                }
        }
        // second time differences (interior n only; endpoints use one-sided in
        // the measurement, matched here by reusing the same stencils)
        TimeSeries ytt = time_second_derivative(y);
        std::vector<StaggeredField> r1, r2;
        r1.reserve(M + 1);
        r2.reserve(M + 1);
        for (int n = 0; n <= M; ++n) {
            StaggeredField a = forward_diff(ytt[n], 1);
            StaggeredField b = forward_diff(ytt[n], 2);
            a.for_each_index([&](int i, int j) {
                a.at(i, j) = m.h * a.at(i, j) - target.pen.s1[n].at(i, j);
            });
            b.for_each_index([&](int i, int j) {
                b.at(i, j) = m.h * b.at(i, j) - target.pen.s2[n].at(i, j);
            });
            r1.push_back(std::move(a));
            r2.push_back(std::move(b));
        }

        Accumulator jacc;
        for (int n = 0; n <= M; ++n) {
            double w = (n == 0 || n == M) ? 0.5 * dt : dt;
            Accumulator fsq;
            for (int e = 0; e < 4; ++e)
                for (int j = 1; j <= m.n; ++j)
                    if (gamma0.on_edge(static_cast<Edge>(e), j))
                        fsq.add(sq(rflux[n].at(static_cast<Edge>(e), j)));
            Accumulator psq;
            r1[n].for_each_index([&](int i, int j) { psq.add(sq(r1[n].at(i, j))); });
            r2[n].for_each_index([&](int i, int j) { psq.add(sq(r2[n].at(i, j))); });
            jacc.add(w * (0.5 * m.h * fsq.value() + 0.5 * hh * psq.value()));
        }
        double J = jacc.value();
        if (tikhonov > 0.0) {
            Accumulator reg;
            for (int k = 1; k <= 2; ++k) {
                StaggeredField d = forward_diff(q, k);
                d.for_each_index([&](int i, int j) { reg.add(sq(d.at(i, j))); });
            }
            J += 0.5 * tikhonov * hh * reg.value();
        }

        if (!grad) return J;

        // dJ/dy^n assembled from both residual families
        std::vector<NodeField> gy(M + 1, NodeField(m));
        for (int n = 0; n <= M; ++n) {
            double w = (n == 0 || n == M) ? 0.5 * dt : dt;
            // flux part: residual couples to the interior neighbor with -1/h
            for (int e = 0; e < 4; ++e)
                for (int j = 1; j <= m.n; ++j) {
                    Edge ed = static_cast<Edge>(e);
                    if (!gamma0.on_edge(ed, j)) continue;
                    // h boundary weight times the -1/h stencil coefficient
                    double c = w * rflux[n].at(ed, j);
                    switch (ed) {
                    case Edge::x1_lo: gy[n](1, j) -= c; break;
                    case Edge::x1_hi: gy[n](m.n, j) -= c; break;
                    case Edge::x2_lo: gy[n](j, 1) -= c; break;
                    case Edge::x2_hi: gy[n](j, m.n) -= c; break;
                    }
                }
        }
        // penalization part: w * h^2 * (h d+ ytt - p*) couples through
        // h d+_k (D2_t .); transpose both stencils
        std::vector<NodeField> gtt(M + 1, NodeField(m)); // dJ / d(ytt^n)
        for (int n = 0; n <= M; ++n) {
            double w = (n == 0 || n == M) ? 0.5 * dt : dt;
            for (int k = 1; k <= 2; ++k) {
                const StaggeredField& r = (k == 1) ? r1[n] : r2[n];
                r.for_each_index([&](int i, int j) {
                    // h^2 quadrature weight; the h scale and the 1/h of d+ cancel
                    double c = w * hh * r.at(i, j);
                    if (k == 1) {
                        gtt[n](i + 1, j) += c;
                        if (i >= 1) gtt[n](i, j) -= c;
                    } else {
                        gtt[n](i, j + 1) += c;
                        if (j >= 1) gtt[n](i, j) -= c;
                    }
                });
            }
            gtt[n].zero_boundary(); // boundary values of y are data, not unknowns
        }
        // transpose of the second time difference onto gy
        auto add_scaled = [&](int n, const NodeField& src, double c) {
            if (n < 0 || n > M) return;
            for (int i = 1; i <= m.n; ++i)
                for (int j = 1; j <= m.n; ++j) gy[n](i, j) += c * src(i, j);
        };
        for (int n = 0; n <= M; ++n) {
            if (n >= 1 && n <= M - 1) {
                add_scaled(n - 1, gtt[n], 1.0 / dd);
                add_scaled(n, gtt[n], -2.0 / dd);
                add_scaled(n + 1, gtt[n], 1.0 / dd);
            } else if (n == 0) {
                add_scaled(0, gtt[0], 2.0 / dd);
                add_scaled(1, gtt[0], -5.0 / dd);
                add_scaled(2, gtt[0], 4.0 / dd);
                add_scaled(3, gtt[0], -1.0 / dd);
            } else {
                add_scaled(M, gtt[M], 2.0 / dd);
                add_scaled(M - 1, gtt[M], -5.0 / dd);
                add_scaled(M - 2, gtt[M], 4.0 / dd);
                add_scaled(M - 3, gtt[M], -1.0 / dd);
            }
        }

        // reverse leapfrog sweep: p^n = gy^n + (2 + dd A) p^{n+1} - p^{n+2},
        // A = Laplace_h - q on Dirichlet-zero fields
        NodeField p_next(m), p_next2(m), p_cur(m);
        NodeField gq(m);
        auto applyA = [&](const NodeField& u, NodeField& out) {
            for (int i = 1; i <= m.n; ++i)
                for (int j = 1; j <= m.n; ++j)
                    out(i, j) = (u(i + 1, j) + u(i - 1, j) + u(i, j + 1) + u(i, j - 1) -
                                 4.0 * u(i, j)) / hh -
                                q(i, j) * u(i, j);
        };
        NodeField tmp(m);
        for (int n = M; n >= 1; --n) {
            if (n == M)
                p_cur = gy[M];
            else {
                applyA(p_next, tmp);
                for (int i = 1; i <= m.n; ++i)
                    for (int j = 1; j <= m.n; ++j)
                        p_cur(i, j) = gy[n](i, j) + 2.0 * p_next(i, j) + dd * tmp(i, j) -
                                      p_next2(i, j);
            }
            // q enters step n-1 -> n as  - dd q y^{n-1} (and half weight for n=1)
            if (n >= 2)
                for (int i = 1; i <= m.n; ++i)
                    for (int j = 1; j <= m.n; ++j) gq(i, j) -= dd * y[n - 1](i, j) * p_cur(i, j);
            else
                for (int i = 1; i <= m.n; ++i)
                    for (int j = 1; j <= m.n; ++j)
                        gq(i, j) -= 0.5 * dd * y[0](i, j) * p_cur(i, j);
            p_next2 = p_next;
            p_next = p_cur;
        }
        // gy[0] never multiplies a q-step beyond the first, already handled
        if (tikhonov > 0.0)
            for (int i = 1; i <= m.n; ++i)
                for (int j = 1; j <= m.n; ++j)
                    gq(i, j) += tikhonov * (4.0 * q(i, j) - q(i + 1, j) - q(i - 1, j) -
                                            q(i, j + 1) - q(i, j - 1));
        *grad = gq;
        return J;
    }
};

} // namespace detail

// Gradient-descent reconstruction with Armijo backtracking (Barzilai-Borwein
// seeded steps) and optional projection onto known values.
inline NodeField reconstruct(const Measurement& measured, const WaveProblem& data_problem,
                             const SubsetMask& gamma0, const NodeField& q_init,
                             const ReconstructOptions& opts, ReconstructLog* log = nullptr) {
    detail::AdjointWorkspace ws{data_problem.mesh, gamma0, data_problem.dt, opts.tikhonov};
    NodeField q = q_init;
    auto project = [&](NodeField& g) {
        g.zero_boundary();
        if (opts.known_region)
            for (int i = 1; i <= q.mesh.n; ++i)
                for (int j = 1; j <= q.mesh.n; ++j)
                    if (opts.known_region->in_interior(i, j)) g(i, j) = 0.0;
    };
    if (opts.known_region && opts.known_values)
        for (int i = 1; i <= q.mesh.n; ++i)
            for (int j = 1; j <= q.mesh.n; ++j)
                if (opts.known_region->in_interior(i, j)) q(i, j) = (*opts.known_values)(i, j);

    NodeField grad(q.mesh), grad_prev(q.mesh), q_prev(q.mesh);
    double J = ws.evaluate(data_problem, measured, q, &grad);
    project(grad);
    double step = 1.0 / (l2_norm_interior(grad) + 1e-12);
    if (log) {
        log->objective.push_back(J);
        log->grad_norm.push_back(l2_norm_interior(grad));
    }

    for (int it = 0; it < opts.max_iter; ++it) {
        double gn = l2_norm_interior(grad);
        if (gn < opts.grad_tol) {
            if (log) log->stop_reason = "gradient below tolerance";
            break;
        }
        // Armijo backtracking from the BB seed
        double t = step;
        bool accepted = false;
        double gsq = 0.0;
        for (int i = 1; i <= q.mesh.n; ++i)
            for (int j = 1; j <= q.mesh.n; ++j) gsq += sq(grad(i, j));
        for (int half = 0; half < opts.max_halvings; ++half) {
            NodeField trial = q;
            for (int i = 1; i <= q.mesh.n; ++i)
                for (int j = 1; j <= q.mesh.n; ++j) trial(i, j) -= t * grad(i, j);
            double Jt = ws.evaluate(data_problem, measured, trial, nullptr);
            if (Jt <= J - 1e-4 * t * gsq) {
                q_prev = q;
                grad_prev = grad;
                q = trial;
                J = Jt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted)
            throw StagnationError("inverse/reconstruct: line search failed after " +
                                  std::to_string(opts.max_halvings) + " halvings at iteration " +
                                  std::to_string(it) + ", J = " + std::to_string(J));
        J = ws.evaluate(data_problem, measured, q, &grad);
        project(grad);
        if (log) {
            log->objective.push_back(J);
            log->grad_norm.push_back(l2_norm_interior(grad));
            log->iterations = it + 1;
        }
        // BB step from the accepted move
        double num = 0.0, den = 0.0;
        for (int i = 1; i <= q.mesh.n; ++i)
            for (int j = 1; j <= q.mesh.n; ++j) {
                double ds = q(i, j) - q_prev(i, j);
                double dg = grad(i, j) - grad_prev(i, j);
                num += ds * ds;
                den += ds * dg;
            }
        step = (den > 1e-300) ? num / den : 2.0 * t;
        if (!(step > 0.0) || !std::isfinite(step)) step = 2.0 * t;
    }
    if (log && log->stop_reason.empty()) log->stop_reason = "iteration cap";
    return q;
}

// Exact discrete gradient against central finite differences of J.
inline double adjoint_gradient_check(const WaveProblem& prob, const Measurement& target,
                                     const SubsetMask& gamma0, const NodeField& q,
                                     const NodeField& direction, double eps) {
    detail::AdjointWorkspace ws{prob.mesh, gamma0, prob.dt, 0};
    NodeField grad(prob.mesh);
    ws.evaluate(prob, target, q, &grad);
    double directional = 0.0;
    for (int i = 1; i <= prob.mesh.n; ++i)
        for (int j = 1; j <= prob.mesh.n; ++j) directional += grad(i, j) * direction(i, j);

    NodeField qp = q, qm = q;
    for (int i = 1; i <= prob.mesh.n; ++i)
        for (int j = 1; j <= prob.mesh.n; ++j) {
            qp(i, j) += eps * direction(i, j);
            qm(i, j) -= eps * direction(i, j);
        }
    double Jp = ws.evaluate(prob, target, qp, nullptr);
    double Jm = ws.evaluate(prob, target, qm, nullptr);
    double fd = (Jp - Jm) / (2.0 * eps);
    return std::abs(directional - fd) / (std::abs(fd) + 1e-300);
}

// --- mesh-refinement convergence study --------------------------------------------

struct ConvergenceConfig {
    std::vector<int> Ns{10, 20, 40};
    double T = 1.6;
    double dt_factor = 8.0;
    bool reconstruction = false; // otherwise exact-data mode
    int max_iter = 80;
    std::uint64_t seed = 1;
};

struct ConvergenceRow {
    int N = 0;
    double potential_error = 0.0; // |e0(q_h) - e0(r_h q)|_{L^2(Omega)} = |q_h - r_h q|_{L^2_h}
    double measurement_gap = 0.0;
    int iterations = 0;
};

// The default manufactured truth of the study.
inline ManufacturedProblem default_manufactured() {
    ManufacturedProblem mp;
    mp.y = [](double t, double a, double b) { return (1.0 + t * t) * (2.0 + std::sin(pi * a) * std::cos(pi * b)); };
    mp.y_t = [](double t, double a, double b) { return 2.0 * t * (2.0 + std::sin(pi * a) * std::cos(pi * b)); };
    mp.y_tt = [](double, double a, double b) { return 2.0 * (2.0 + std::sin(pi * a) * std::cos(pi * b)); };
    mp.q = [](double a, double b) { return 1.0 + 0.5 * std::sin(pi * a) * std::sin(pi * b); };
    mp.q_tilde = [](double, double) { return 1.0; }; // matches q on the boundary
    return mp;
}

inline std::vector<ConvergenceRow> convergence_study(const ConvergenceConfig& cfg) {
    ManufacturedProblem mp = default_manufactured();
    std::vector<ConvergenceRow> rows;
    for (int N : cfg.Ns) {
        Mesh m(N);
        double dt = m.h / cfg.dt_factor;
        DiscreteData data = consistency_data(m, mp, 0.5);
        SubsetMask gamma_plus = SubsetMask::boundary_union(
            m, {{Edge::x1_hi, 0.0, 1.0}, {Edge::x2_hi, 0.0, 1.0}});
        NodeField q_ref = restrict_sample(m, mp.q);

        ConvergenceRow row;
        row.N = N;
        if (!cfg.reconstruction) {
            NodeField diff = data.q_h - q_ref;
            diff.zero_boundary();
            row.potential_error = l2_norm_interior(diff);
            // measurement consistency: solve with the true discrete potential
            WaveProblem p{m, data.q_h, data.y0, data.y1, data.source, data.boundary, 0.0, cfg.T, dt};
            WaveSolution sol = solve(p);
            Measurement meas = measure(sol, gamma_plus);
            row.measurement_gap = meas.product_norm();
        } else {
            WaveProblem truth{m, data.q_h, data.y0, data.y1, data.source, data.boundary, 0.0, cfg.T, dt};
            WaveSolution sol = solve(truth);
            Measurement target = measure(sol, gamma_plus);
            ReconstructOptions opts;
            opts.max_iter = cfg.max_iter;
            ReconstructLog log;
            NodeField q_rec = reconstruct(target, truth, gamma_plus, data.q_tilde_h, opts, &log);
            // error against the continuum truth (through the exact e_h^0 isometry),
            // so discretization and optimization residue both count
            NodeField diff = q_rec - q_ref;
            diff.zero_boundary();
            row.potential_error = l2_norm_interior(diff);
            row.iterations = log.iterations;
            WaveProblem check = truth;
            check.q = q_rec;
            Measurement got = measure(solve(check), gamma_plus);
            row.measurement_gap = measurement_gap(got, target).total;
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace dwave
