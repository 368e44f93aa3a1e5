#pragma once

#include <vector>

#include "dwave/grid.hpp"

namespace dwave {

// A node field sampled on a uniform time grid.
struct TimeSeries {
    Mesh mesh;
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<NodeField> snapshots;

    TimeSeries() = default;
    TimeSeries(const Mesh& m, double t_begin, double step, int count)
        : mesh(m), t0(t_begin), dt(step), snapshots(count, NodeField(m)) {}

    int steps() const { return static_cast<int>(snapshots.size()); }
    double time(int n) const { return t0 + n * dt; }
    double t_end() const { return time(steps() - 1); }

    NodeField& operator[](int n) { return snapshots[static_cast<std::size_t>(n)]; }
    const NodeField& operator[](int n) const { return snapshots[static_cast<std::size_t>(n)]; }

    // odd reflection onto (2*t0 - t_end, t_end]; used to extend solutions given
    // on [0,T] to (-T,T) with z(-t) = -z(t)
    TimeSeries odd_extension() const {
        int m = steps();
        TimeSeries out(mesh, t0 - (m - 1) * dt, dt, 2 * m - 1);
        for (int n = 0; n < m; ++n) {
            out.snapshots[m - 1 + n] = snapshots[n];
            NodeField neg = snapshots[n];
            neg *= -1.0;
            out.snapshots[m - 1 - n] = neg;
        }
        return out;
    }
};

// Time derivative on the snapshot grid: 4th-order central stencils in the
// interior, 2nd-order one-sided / central near the ends.
inline TimeSeries time_derivative(const TimeSeries& s) {
    int m = s.steps();
    if (m < 3) throw PreconditionError("timeseries/ddt: need at least 3 snapshots");
    TimeSeries out(s.mesh, s.t0, s.dt, m);
    std::size_t sz = s.snapshots[0].v.size();
    double dt = s.dt;
    for (int n = 0; n < m; ++n) {
        auto& o = out.snapshots[n].v;
        if (n >= 2 && n <= m - 3) {
            const auto& a = s.snapshots[n - 2].v;
            const auto& b = s.snapshots[n - 1].v;
            const auto& c = s.snapshots[n + 1].v;
            const auto& d = s.snapshots[n + 2].v;
            for (std::size_t k = 0; k < sz; ++k)
                o[k] = (a[k] - 8.0 * b[k] + 8.0 * c[k] - d[k]) / (12.0 * dt);
        } else if (n == 0) {
            const auto& a = s.snapshots[0].v;
            const auto& b = s.snapshots[1].v;
            const auto& c = s.snapshots[2].v;
            for (std::size_t k = 0; k < sz; ++k) o[k] = (-3.0 * a[k] + 4.0 * b[k] - c[k]) / (2.0 * dt);
        } else if (n == m - 1) {
            const auto& a = s.snapshots[m - 3].v;
            const auto& b = s.snapshots[m - 2].v;
            const auto& c = s.snapshots[m - 1].v;
            for (std::size_t k = 0; k < sz; ++k) o[k] = (a[k] - 4.0 * b[k] + 3.0 * c[k]) / (2.0 * dt);
        } else {
            const auto& a = s.snapshots[n - 1].v;
            const auto& c = s.snapshots[n + 1].v;
            for (std::size_t k = 0; k < sz; ++k) o[k] = (c[k] - a[k]) / (2.0 * dt);
        }
    }
    return out;
}

// Second time difference (central; one-sided 2nd order at the ends).
inline TimeSeries time_second_derivative(const TimeSeries& s) {
    int m = s.steps();
    if (m < 4) throw PreconditionError("timeseries/ddtt: need at least 4 snapshots");
    TimeSeries out(s.mesh, s.t0, s.dt, m);
    std::size_t sz = s.snapshots[0].v.size();
    double dd = s.dt * s.dt;
    for (int n = 0; n < m; ++n) {
        auto& o = out.snapshots[n].v;
        if (n >= 1 && n <= m - 2) {
            const auto& a = s.snapshots[n - 1].v;
            const auto& b = s.snapshots[n].v;
            const auto& c = s.snapshots[n + 1].v;
            for (std::size_t k = 0; k < sz; ++k) o[k] = (a[k] - 2.0 * b[k] + c[k]) / dd;
        } else {
            int base = (n == 0) ? 0 : m - 4;
            const auto& a = s.snapshots[base].v;
            const auto& b = s.snapshots[base + 1].v;
            const auto& c = s.snapshots[base + 2].v;
            const auto& d = s.snapshots[base + 3].v;
            if (n == 0)
                for (std::size_t k = 0; k < sz; ++k)
                    o[k] = (2.0 * a[k] - 5.0 * b[k] + 4.0 * c[k] - d[k]) / dd;
            else
                for (std::size_t k = 0; k < sz; ++k)
                    o[k] = (-a[k] + 4.0 * b[k] - 5.0 * c[k] + 2.0 * d[k]) / dd;
        }
    }
    return out;
}

// Trapezoid weight of snapshot n on the time grid.
inline double trapezoid_weight(const TimeSeries& s, int n) {
    return (n == 0 || n == s.steps() - 1) ? 0.5 * s.dt : s.dt;
}

// L^2(t; L^2_h interior) norm.
inline double l2l2_norm(const TimeSeries& s) {
    Accumulator acc;
    for (int n = 0; n < s.steps(); ++n)
        acc.add(trapezoid_weight(s, n) * sq(l2_norm_interior(s[n])));
    return std::sqrt(acc.value());
}

} // namespace dwave
