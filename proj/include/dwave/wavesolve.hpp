#pragma once

#include <functional>

#include "dwave/diffops.hpp"
#include "dwave/timeseries.hpp"

namespace dwave {

// Discrete space-time data for the interior source f_h(t) and boundary data
// f_{d,h}(t), addressed by node index so fully discrete constructions (e.g.
// the consistency data of the inverse problem) stay exact.
using SpaceTimeNodeFn = std::function<double(double t, int i, int j)>;

struct WaveProblem {
    Mesh mesh;
    NodeField q;            // potential, interior values used
    NodeField y0, y1;       // data at t_begin
    SpaceTimeNodeFn source;   // empty -> zero
    SpaceTimeNodeFn boundary; // empty -> homogeneous Dirichlet
    double t_begin = 0.0;
    double t_end = 1.0;
    double dt = 0.0;

    double cfl_limit() const {
        double qmax = linf_norm(q);
        return 2.0 / std::sqrt(8.0 / (mesh.h * mesh.h) + qmax);
    }
};

struct WaveSolution {
    TimeSeries y;
    TimeSeries velocity; // reconstructed d_t y on the same grid
};

namespace detail {

inline void apply_boundary(NodeField& f, const SpaceTimeNodeFn& g, double t) {
    int e = f.mesh.n + 1;
    if (!g) {
        f.zero_boundary();
        return;
    }
    for (int i = 1; i <= f.mesh.n; ++i) {
        f(i, 0) = g(t, i, 0);
        f(i, e) = g(t, i, e);
        f(0, i) = g(t, 0, i);
        f(e, i) = g(t, e, i);
    }
    f(0, 0) = f(0, e) = f(e, 0) = f(e, e) = 0.0;
}

inline bool finite(const NodeField& f) {
    for (double x : f.v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace detail

// Explicit leapfrog integration of the semi-discrete wave system
//   d_tt y = Laplace_h y - q y + f   in the interior,
//   y = f_d on the discrete boundary, exact initial data.
inline WaveSolution solve(const WaveProblem& p) {
    const Mesh& m = p.mesh;
    if (p.dt <= 0.0) throw InvalidParameter("wavesolve/solve: dt must be positive");
    if (p.dt > p.cfl_limit())
        throw InvalidParameter("wavesolve/solve: CFL violation, dt=" + std::to_string(p.dt) +
                               " > " + std::to_string(p.cfl_limit()));
    int steps = static_cast<int>(std::llround((p.t_end - p.t_begin) / p.dt));
    if (steps < 2) throw InvalidParameter("wavesolve/solve: fewer than 2 time steps");

    // compatibility of initial position with the boundary data at t_begin
    {
        // corners are not part of the discrete boundary and carry no data
        NodeField chk = p.y0;
        detail::apply_boundary(chk, p.boundary, p.t_begin);
        double scale = linf_norm(p.y0) + 1.0;
        int e = m.n + 1;
        for (int i = 1; i <= m.n; ++i)
            for (int jb : {0, e})
                if (std::abs(chk(i, jb) - p.y0(i, jb)) > 1e-9 * scale ||
                    std::abs(chk(jb, i) - p.y0(jb, i)) > 1e-9 * scale)
                    throw PreconditionError("wavesolve/solve: y0 boundary trace != f_d(t_begin)");
    }

    TimeSeries y(m, p.t_begin, p.dt, steps + 1);
    const double dd = p.dt * p.dt;
    const double hh = m.h * m.h;

    auto accel = [&](const NodeField& u, double t, NodeField& out) {
        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j) {
                double lap = (u(i + 1, j) + u(i - 1, j) + u(i, j + 1) + u(i, j - 1) - 4.0 * u(i, j)) / hh;
                double f = p.source ? p.source(t, i, j) : 0.0;
                out(i, j) = lap - p.q(i, j) * u(i, j) + f;
            }
    };

    y[0] = p.y0;
    detail::apply_boundary(y[0], p.boundary, p.t_begin);

    NodeField acc(m);
    accel(y[0], p.t_begin, acc);
    for (int i = 1; i <= m.n; ++i)
        for (int j = 1; j <= m.n; ++j)
            y[1](i, j) = y[0](i, j) + p.dt * p.y1(i, j) + 0.5 * dd * acc(i, j);
    detail::apply_boundary(y[1], p.boundary, y.time(1));

    for (int n = 1; n < steps; ++n) {
        accel(y[n], y.time(n), acc);
        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j)
                y[n + 1](i, j) = 2.0 * y[n](i, j) - y[n - 1](i, j) + dd * acc(i, j);
        detail::apply_boundary(y[n + 1], p.boundary, y.time(n + 1));
        if (!detail::finite(y[n + 1]))
            throw DivergenceError("wavesolve/solve: NaN at step " + std::to_string(n + 1) +
                                  " (t=" + std::to_string(y.time(n + 1)) + ")");
    }

    WaveSolution sol;
    sol.velocity = time_derivative(y);
    sol.y = std::move(y);
    return sol;
}

// Solution on (-T,T) from data prescribed at t = 0: forward solve plus a
// time-reflected forward solve stitched together.
inline WaveSolution solve_two_sided(const WaveProblem& centered) {
    WaveProblem fwd = centered;
    fwd.t_begin = 0.0;
    WaveProblem bwd = centered;
    bwd.t_begin = 0.0;
    bwd.y1 = centered.y1;
    bwd.y1 *= -1.0;
    if (centered.source) {
        auto f = centered.source;
        bwd.source = [f](double t, int i, int j) { return f(-t, i, j); };
    }
    if (centered.boundary) {
        auto g = centered.boundary;
        bwd.boundary = [g](double t, int i, int j) { return g(-t, i, j); };
    }
    WaveSolution sf = solve(fwd);
    WaveSolution sb = solve(bwd);
    int mfwd = sf.y.steps();
    TimeSeries y(centered.mesh, -sb.y.t_end(), centered.dt, 2 * mfwd - 1);
    for (int n = 0; n < mfwd; ++n) {
        y[mfwd - 1 + n] = sf.y[n];
        y[mfwd - 1 - n] = sb.y[n];
    }
    WaveSolution out;
    out.velocity = time_derivative(y);
    out.y = std::move(y);
    return out;
}

// Energy E(t) = 1/2 |d_t y|^2 + 1/2 sum_k |d+_k y|^2 + 1/2 int q |y|^2.
inline double energy(const WaveSolution& sol, const NodeField& q, int t_index) {
    if (t_index < 0 || t_index >= sol.y.steps())
        throw InvalidParameter("wavesolve/energy: index out of range");
    const NodeField& y = sol.y[t_index];
    const NodeField& v = sol.velocity[t_index];
    double kin = sq(l2_norm_interior(v));
    double pot = sq(l2_norm(forward_diff(y, 1))) + sq(l2_norm(forward_diff(y, 2)));
    Accumulator acc;
    for (int i = 1; i <= y.mesh.n; ++i)
        for (int j = 1; j <= y.mesh.n; ++j) acc.add(q(i, j) * sq(y(i, j)));
    return 0.5 * (kin + pot + y.mesh.h * y.mesh.h * acc.value());
}

// Outward one-sided boundary difference (y at boundary minus adjacent interior
// node over h); the discrete realization of the normal derivative of e_h(y)
// on each edge.
inline BoundaryTrace outward_difference(const NodeField& y) {
    const Mesh& m = y.mesh;
    BoundaryTrace tr(m);
    for (int j = 1; j <= m.n; ++j) {
        tr.at(Edge::x1_lo, j) = (y(0, j) - y(1, j)) / m.h;
        tr.at(Edge::x1_hi, j) = (y(m.n + 1, j) - y(m.n, j)) / m.h;
        tr.at(Edge::x2_lo, j) = (y(j, 0) - y(j, 1)) / m.h;
        tr.at(Edge::x2_hi, j) = (y(j, m.n + 1) - y(j, m.n)) / m.h;
    }
    return tr;
}

// Time-indexed boundary flux on a boundary mask.
struct FluxSeries {
    Mesh mesh;
    double t0 = 0.0, dt = 0.0;
    SubsetMask gamma0;
    std::vector<BoundaryTrace> traces;

    int steps() const { return static_cast<int>(traces.size()); }

    FluxSeries& operator-=(const FluxSeries& o) {
        for (int n = 0; n < steps(); ++n) traces[n] -= o.traces[n];
        return *this;
    }

    double l2_time_l2_sq() const {
        Accumulator acc;
        for (int n = 0; n < steps(); ++n) {
            double w = (n == 0 || n == steps() - 1) ? 0.5 * dt : dt;
            acc.add(w * sq(l2_norm(traces[n], gamma0)));
        }
        return acc.value();
    }

    // H^1(0,T; L^2_h(Gamma_0)) squared: trapezoid in time, centered time
    // differences of the trace values (2nd order one-sided at endpoints).
    double h1_time_l2_sq() const {
        Accumulator acc;
        int msteps = steps();
        for (int n = 0; n < msteps; ++n) {
            double w = (n == 0 || n == msteps - 1) ? 0.5 * dt : dt;
            Accumulator node;
            for (int e = 0; e < 4; ++e)
                for (int j = 1; j <= mesh.n; ++j) {
                    Edge ed = static_cast<Edge>(e);
                    if (!gamma0.on_edge(ed, j)) continue;
                    double g = traces[n].at(ed, j);
                    double gd;
                    if (n == 0)
                        gd = (-3.0 * traces[0].at(ed, j) + 4.0 * traces[1].at(ed, j) - traces[2].at(ed, j)) / (2.0 * dt);
                    else if (n == msteps - 1)
                        gd = (traces[msteps - 3].at(ed, j) - 4.0 * traces[msteps - 2].at(ed, j) +
                              3.0 * traces[msteps - 1].at(ed, j)) / (2.0 * dt);
                    else
                        gd = (traces[n + 1].at(ed, j) - traces[n - 1].at(ed, j)) / (2.0 * dt);
                    node.add(sq(g) + sq(gd));
                }
            acc.add(w * mesh.h * node.value());
        }
        return acc.value();
    }
};

inline FluxSeries flux_measurement(const WaveSolution& sol, const SubsetMask& gamma0) {
    if (!gamma0.boundary)
        throw InvalidParameter("wavesolve/flux: gamma0 is not a boundary mask");
    require_same_mesh(sol.y.mesh, gamma0.mesh, "wavesolve/flux");
    FluxSeries f;
    f.mesh = sol.y.mesh;
    f.t0 = sol.y.t0;
    f.dt = sol.y.dt;
    f.gamma0 = gamma0;
    f.traces.reserve(sol.y.steps());
    for (int n = 0; n < sol.y.steps(); ++n) f.traces.push_back(outward_difference(sol.y[n]));
    return f;
}

// h-scaled high-frequency stream h * d+_{h,k} d_tt y, k = 1,2.
struct PenalizationStream {
    Mesh mesh;
    double t0 = 0.0, dt = 0.0;
    std::vector<StaggeredField> s1, s2; // per-snapshot, axes 1 and 2

    int steps() const { return static_cast<int>(s1.size()); }

    double l2_time_l2_sq() const {
        Accumulator acc;
        for (int n = 0; n < steps(); ++n) {
            double w = (n == 0 || n == steps() - 1) ? 0.5 * dt : dt;
            acc.add(w * (sq(l2_norm(s1[n])) + sq(l2_norm(s2[n]))));
        }
        return acc.value();
    }
};

inline PenalizationStream penalization_stream(const WaveSolution& sol) {
    if (sol.y.steps() < 4)
        throw PreconditionError("wavesolve/penalization: need at least 4 snapshots");
    TimeSeries ytt = time_second_derivative(sol.y);
    PenalizationStream out;
    out.mesh = sol.y.mesh;
    out.t0 = sol.y.t0;
    out.dt = sol.y.dt;
    double h = sol.y.mesh.h;
    out.s1.reserve(ytt.steps());
    out.s2.reserve(ytt.steps());
    for (int n = 0; n < ytt.steps(); ++n) {
        StaggeredField a = forward_diff(ytt[n], 1);
        StaggeredField b = forward_diff(ytt[n], 2);
        for (auto& x : a.v) x *= h;
        for (auto& x : b.v) x *= h;
        out.s1.push_back(std::move(a));
        out.s2.push_back(std::move(b));
    }
    return out;
}

} // namespace dwave
