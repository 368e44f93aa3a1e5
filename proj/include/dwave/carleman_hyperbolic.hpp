#pragma once

#include <map>
#include <string>

#include "dwave/diffops.hpp"
#include "dwave/rng.hpp"
#include "dwave/timeseries.hpp"
#include "dwave/transfer.hpp"

namespace dwave {

// Space-time weight psi(t,x) = |x - x_a|^2 - beta t^2 + c0 with x_a = (-a,-a),
// phi = exp(mu psi). c0 keeps psi >= 1 on [-T,T] x [0,1]^2; the minimum sits at
// |x - x_a|^2 = 2a^2, t = +-T, so the constraint is checked exactly.
struct CarlemanParams {
    double a = 0.1;
    double beta = 0.3;
    double c0 = 1.0;
    double mu = 1.0;
    double tau = 1.0;
    double T = 0.5;
    double eps_tau_h = 0.25; // admissibility: tau * h <= eps_tau_h

    double alpha1() const { return (beta + 1.0) / (beta + 2.0); }

    double psi(double t, double x1, double x2) const {
        return sq(x1 + a) + sq(x2 + a) - beta * t * t + c0;
    }
    double phi(double t, double x1, double x2) const { return std::exp(mu * psi(t, x1, x2)); }
    double psi_t(double t) const { return -2.0 * beta * t; }
    double psi_tt() const { return -2.0 * beta; }
    double psi_x(double xk) const { return 2.0 * (xk + a); }
    static double psi_xx() { return 2.0; }

    double psi_min() const { return 2.0 * a * a - beta * T * T + c0; }
    double psi_max() const { return 2.0 * sq(1.0 + a) + c0; }

    void validate() const {
        if (a <= 0.0 || beta <= 0.0 || beta >= 1.0 || mu < 1.0 || tau < 0.0 || T <= 0.0)
            throw InvalidParameter("carleman/params: need a>0, beta in (0,1), mu>=1, tau>=0, T>0");
        if (psi_min() < 1.0 - 1e-12)
            throw InvalidParameter("carleman/params: psi >= 1 fails, min = " + std::to_string(psi_min()));
    }

    void require_admissible(double h) const {
        if (tau * h > eps_tau_h + 1e-14)
            throw InadmissibleParameter("carleman/params: tau*h = " + std::to_string(tau * h) +
                                        " exceeds " + std::to_string(eps_tau_h));
    }

    // Small weight for operator-level checks: moderate exp range so the
    // conjugation ratios stay well inside double range at tau*h up to ~0.25.
    static CarlemanParams test_preset(double tau_ = 1.0) {
        CarlemanParams p;
        p.a = 0.1;
        p.beta = 0.3;
        p.T = 0.5;
        p.c0 = 1.0 + p.beta * p.T * p.T - 2.0 * p.a * p.a + 0.01;
        p.mu = 1.0;
        p.tau = tau_;
        p.validate();
        return p;
    }

    // Weight for the stability application: T > sqrt(2), beta close to 1 and a
    // small enough that beta T^2 > 2 + 4a with margin, so the comparison of the
    // weight at |t| near T against t = 0 holds.
    static CarlemanParams gamma_preset(double T_ = 1.6, double tau_ = 1.0) {
        CarlemanParams p;
        p.T = T_;
        p.beta = 0.99;
        double room = p.beta * T_ * T_ - 2.0;
        if (room <= 0.0) throw InvalidParameter("carleman/gamma_preset: T too small, need T > sqrt(2)");
        p.a = 0.9 * room / 4.0;
        p.c0 = 1.0 + p.beta * T_ * T_ - 2.0 * p.a * p.a + 0.01;
        p.mu = 1.0;
        p.tau = tau_;
        p.eps_tau_h = 0.45; // admits the default sweep grid down to N = 10
        p.validate();
        return p;
    }
};

// Default sweep grid: 12 geometric points between tau_0 = 4 and 0.2/h.
inline std::vector<double> tau_sweep_grid(double h, int points = 12, double tau0 = 4.0) {
    double tau1 = 0.2 / h;
    std::vector<double> out;
    for (int k = 0; k < points; ++k)
        out.push_back(tau0 * std::pow(tau1 / tau0, k / static_cast<double>(points - 1)));
    return out;
}

// Exact extremization of the weight comparison: eta > 0 with
// sup_{|t| in (T-eta,T)} psi <= inf_x psi(0,x), which needs beta (T-eta)^2 >= 2+4a.
inline double weight_comparison_eta(const CarlemanParams& p) {
    double need = 2.0 + 4.0 * p.a;
    double have = p.beta * p.T * p.T;
    if (have <= need)
        throw ConstructionError("carleman/weight_eta: beta T^2 <= 2 + 4a, no admissible eta");
    double margin = 0.5 * (have - need);
    double eta = p.T - std::sqrt((need + margin) / p.beta);
    // verify by the closed-form extrema
    double sup_band = 2.0 * sq(1.0 + p.a) + p.c0 - p.beta * sq(p.T - eta);
    double inf_zero = 2.0 * p.a * p.a + p.c0;
    if (sup_band > inf_zero + 1e-12)
        throw ConstructionError("carleman/weight_eta: comparison failed after construction");
    return eta;
}

// Evaluated weights on the grid: phi_h(t) = r_h phi(t).
struct WeightFields {
    TimeSeries psi;
    TimeSeries phi;
};

inline WeightFields weight_fields(const CarlemanParams& p, const Mesh& m, double t0, double dt, int count) {
    p.validate();
    WeightFields w{TimeSeries(m, t0, dt, count), TimeSeries(m, t0, dt, count)};
    for (int n = 0; n < count; ++n) {
        double t = t0 + n * dt;
        for (int i = 0; i <= m.n + 1; ++i)
            for (int j = 0; j <= m.n + 1; ++j) {
                double ps = p.psi(t, m.x(i), m.x(j));
                w.psi[n](i, j) = ps;
                w.phi[n](i, j) = std::exp(p.mu * ps);
            }
    }
    return w;
}

// Coefficients of the expanded conjugate operator, one sigma-quadrature per
// (time, node, axis). The integrands carry exp(-tau (phi(x+sigma h e_k) - phi(x)))
// which is smooth on each half panel; (1-|sigma|) kinks at 0, so panels split there.
struct ConjugateCoefficients {
    Mesh mesh;
    double t0 = 0.0, dt = 0.0;
    int quad_order = 16;
    // per snapshot, per axis (0,1), A1..A4 on the closure
    std::vector<std::array<std::array<NodeField, 4>, 2>> data;

    int steps() const { return static_cast<int>(data.size()); }
    double time(int n) const { return t0 + n * dt; }

    double A(int ell, int k, int n, int i, int j) const { // ell in 1..4
        return data[n][k - 1][ell - 1](i, j);
    }
    double A0(const CarlemanParams& p, int k, int n, int i, int j) const {
        double h = mesh.h;
        return 0.5 * h * h *
               (sq(p.tau * p.mu) * A(2, k, n, i, j) - p.tau * p.mu * p.mu * A(3, k, n, i, j) -
                p.tau * p.mu * A(4, k, n, i, j));
    }
};

namespace detail {

inline void gauss_half_panels(int order, std::vector<double>& sig, std::vector<double>& wgt) {
    std::vector<double> x, w;
    gauss::rule(order, x, w);
    sig.clear();
    wgt.clear();
    for (int half = 0; half < 2; ++half)
        for (int q = 0; q < order; ++q) {
            double s = 0.5 * (x[q] + 1.0);       // [0,1]
            double ww = 0.5 * w[q];
            sig.push_back(half == 0 ? s - 1.0 : s); // [-1,0] then [0,1]
            wgt.push_back(ww);
        }
}

inline void eval_coeff_at(const CarlemanParams& p, const Mesh& m, double t, int i, int j, int k,
                          const std::vector<double>& sig, const std::vector<double>& wgt,
                          double out[4]) {
    double x1 = m.x(i), x2 = m.x(j);
    double phi0 = p.phi(t, x1, x2);
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t q = 0; q < sig.size(); ++q) {
        double s = sig[q];
        double y1 = x1 + (k == 1 ? s * m.h : 0.0);
        double y2 = x2 + (k == 2 ? s * m.h : 0.0);
        double phis = p.phi(t, y1, y2);
        double expo = -p.tau * (phis - phi0);
        if (expo > 700.0)
            throw InadmissibleParameter("carleman/coefficients: conjugation ratio overflows; reduce tau*h");
        double rho = std::exp(expo);
        double dpsik = p.psi_x(k == 1 ? y1 : y2);
        double tri = 1.0 - std::abs(s);
        acc[0] += wgt[q] * 0.5 * phis * dpsik * rho;                 // A1 (factor 1/2, no triangle)
        acc[1] += wgt[q] * tri * sq(phis * dpsik) * rho;             // A2
        acc[2] += wgt[q] * tri * phis * sq(dpsik) * rho;             // A3
        acc[3] += wgt[q] * tri * phis * CarlemanParams::psi_xx() * rho; // A4
    }
    for (int l = 0; l < 4; ++l) out[l] = acc[l];
}

} // namespace detail

inline ConjugateCoefficients coefficients(const CarlemanParams& p, const Mesh& m, double t0, double dt,
                                          int count, int order = 16, bool convergence_check = true) {
    p.validate();
    p.require_admissible(m.h);
    ConjugateCoefficients c;
    c.mesh = m;
    c.t0 = t0;
    c.dt = dt;
    c.quad_order = order;
    c.data.resize(count);

    std::vector<double> sig, wgt, sig2, wgt2;
    detail::gauss_half_panels(order, sig, wgt);
    if (convergence_check) detail::gauss_half_panels(2 * order, sig2, wgt2);

    double worst_gap = 0.0;
    for (int n = 0; n < count; ++n) {
        double t = t0 + n * dt;
        for (int k = 1; k <= 2; ++k) {
            for (int l = 0; l < 4; ++l) c.data[n][k - 1][l] = NodeField(m);
            for (int i = 0; i <= m.n + 1; ++i)
                for (int j = 0; j <= m.n + 1; ++j) {
                    double a[4];
                    detail::eval_coeff_at(p, m, t, i, j, k, sig, wgt, a);
                    if (convergence_check && ((i + j + n) % 7 == 0)) {
                        double b[4];
                        detail::eval_coeff_at(p, m, t, i, j, k, sig2, wgt2, b);
                        for (int l = 0; l < 4; ++l)
                            worst_gap = std::max(worst_gap,
                                                 std::abs(a[l] - b[l]) / (std::abs(b[l]) + 1e-300));
                    }
                    for (int l = 0; l < 4; ++l) c.data[n][k - 1][l](i, j) = a[l];
                }
        }
    }
    if (convergence_check && worst_gap > 1e-10)
        throw Error("carleman/coefficients: quadrature non-convergence, order-" + std::to_string(order) +
                    " vs order-" + std::to_string(2 * order) + " gap " + std::to_string(worst_gap));
    return c;
}

// Continuum limits f_{l,k} of the coefficients and the fitted constant in
// sup |A_{l,k} - f_{l,k}| <= C tau h.
inline double coefficient_limit(const CarlemanParams& p, int ell, int k, double t, double x1, double x2) {
    double phi = p.phi(t, x1, x2);
    double dps = p.psi_x(k == 1 ? x1 : x2);
    switch (ell) {
    case 1: return phi * dps;
    case 2: return sq(phi * dps);
    case 3: return phi * sq(dps);
    case 4: return phi * CarlemanParams::psi_xx();
    }
    throw InvalidParameter("carleman/coefficient_limit: ell in 1..4");
}

inline double prox_constant(const CarlemanParams& p, const ConjugateCoefficients& c, int ell, int k) {
    const Mesh& m = c.mesh;
    double sup = 0.0;
    for (int n = 0; n < c.steps(); ++n)
        for (int i = 0; i <= m.n + 1; ++i)
            for (int j = 0; j <= m.n + 1; ++j)
                sup = std::max(sup, std::abs(c.A(ell, k, n, i, j) -
                                             coefficient_limit(p, ell, k, c.time(n), m.x(i), m.x(j))));
    return sup / (p.tau * m.h);
}

namespace detail {

// checks the Assumption-W shape on a conjugated test function
inline void require_admissible_v(const TimeSeries& v, const char* where) {
    int mm = v.steps();
    if (mm < 7) throw PreconditionError(std::string(where) + ": too few snapshots");
    double scale = 0.0;
    for (int n = 0; n < mm; ++n) scale = std::max(scale, linf_norm(v[n]));
    if (scale == 0.0) return;
    if (l2_norm_interior(v[0]) > 1e-10 * scale || l2_norm_interior(v[mm - 1]) > 1e-10 * scale)
        throw PreconditionError(std::string(where) + ": v(+-T) != 0");
    for (int n : {0, mm - 1})
        if (!v[n].boundary_is_zero(1e-12 * scale))
            throw PreconditionError(std::string(where) + ": v not Dirichlet-zero");
}

} // namespace detail

// Conjugated operator applied two ways. Route A evaluates
// exp(tau phi) Box_h (exp(-tau phi) v) with the weight folded into ratio form;
// route B evaluates the expanded formula with the A coefficients. Both use
// 4th-order central time stencils; the first/last two snapshots are zeroed.
struct ConjugateApplication {
    TimeSeries route_a;
    TimeSeries route_b;
};

inline ConjugateApplication conjugate_apply(const CarlemanParams& p, const ConjugateCoefficients& c,
                                            const TimeSeries& v) {
    p.require_admissible(v.mesh.h);
    detail::require_admissible_v(v, "carleman/conjugate_apply");
    require_same_mesh(v.mesh, c.mesh, "carleman/conjugate_apply");
    const Mesh& m = v.mesh;
    int steps = v.steps();
    ConjugateApplication out{TimeSeries(m, v.t0, v.dt, steps), TimeSeries(m, v.t0, v.dt, steps)};
    const double hh = m.h * m.h;
    const double dd = v.dt * v.dt;

    for (int n = 2; n + 2 < steps; ++n) {
        double t = v.time(n);
        NodeField& ra = out.route_a[n];
        NodeField& rb = out.route_b[n];
        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j) {
                double x1 = m.x(i), x2 = m.x(j);
                double phi0 = p.phi(t, x1, x2);

                // route A: time part, ratios against phi(t_n, x)
                double wt[5];
                for (int s = -2; s <= 2; ++s) {
                    double ts = v.time(n + s);
                    wt[s + 2] = std::exp(-p.tau * (p.phi(ts, x1, x2) - phi0)) * v[n + s](i, j);
                }
                double dtt = (-wt[0] + 16.0 * wt[1] - 30.0 * wt[2] + 16.0 * wt[3] - wt[4]) / (12.0 * dd);
                // spatial part: 5-point with spatial ratios at time t_n
                auto ratio = [&](double y1, double y2) {
                    return std::exp(-p.tau * (p.phi(t, y1, y2) - phi0));
                };
                double lap = (ratio(x1 + m.h, x2) * v[n](i + 1, j) + ratio(x1 - m.h, x2) * v[n](i - 1, j) +
                              ratio(x1, x2 + m.h) * v[n](i, j + 1) + ratio(x1, x2 - m.h) * v[n](i, j - 1) -
                              4.0 * v[n](i, j)) / hh;
                ra(i, j) = dtt - lap;

                // route B: expanded formula
                double vt = (v[n - 2](i, j) - 8.0 * v[n - 1](i, j) + 8.0 * v[n + 1](i, j) -
                             v[n + 2](i, j)) / (12.0 * v.dt);
                double vtt = (-v[n - 2](i, j) + 16.0 * v[n - 1](i, j) - 30.0 * v[n](i, j) +
                              16.0 * v[n + 1](i, j) - v[n + 2](i, j)) / (12.0 * dd);
                double pt = p.psi_t(t);
                double val = vtt - 2.0 * p.tau * p.mu * phi0 * pt * vt +
                             sq(p.tau * p.mu * phi0 * pt) * v[n](i, j) -
                             p.tau * p.mu * p.mu * phi0 * sq(pt) * v[n](i, j) -
                             p.tau * p.mu * phi0 * p.psi_tt() * v[n](i, j);
                for (int k = 1; k <= 2; ++k) {
                    double lapk = (k == 1)
                                      ? (v[n](i + 1, j) - 2.0 * v[n](i, j) + v[n](i - 1, j)) / hh
                                      : (v[n](i, j + 1) - 2.0 * v[n](i, j) + v[n](i, j - 1)) / hh;
                    double dk = (k == 1) ? (v[n](i + 1, j) - v[n](i - 1, j)) / (2.0 * m.h)
                                         : (v[n](i, j + 1) - v[n](i, j - 1)) / (2.0 * m.h);
                    val += -(1.0 + c.A0(p, k, n, i, j)) * lapk;
                    val += 2.0 * p.tau * p.mu * c.A(1, k, n, i, j) * dk;
                    val -= (sq(p.tau * p.mu) * c.A(2, k, n, i, j) -
                            p.tau * p.mu * p.mu * c.A(3, k, n, i, j) -
                            p.tau * p.mu * c.A(4, k, n, i, j)) * v[n](i, j);
                }
                rb(i, j) = val;
            }
    }
    return out;
}

// Self-adjoint / skew-adjoint / remainder splitting; L1 + L2 = L + R holds
// termwise with the same coefficient arrays.
struct Splitting {
    TimeSeries l1, l2, r;
};

inline Splitting split(const CarlemanParams& p, const ConjugateCoefficients& c, const TimeSeries& v) {
    p.require_admissible(v.mesh.h);
    detail::require_admissible_v(v, "carleman/split");
    const Mesh& m = v.mesh;
    int steps = v.steps();
    Splitting out{TimeSeries(m, v.t0, v.dt, steps), TimeSeries(m, v.t0, v.dt, steps),
                  TimeSeries(m, v.t0, v.dt, steps)};
    const double hh = m.h * m.h;
    const double dd = v.dt * v.dt;
    double a1 = p.alpha1();

    for (int n = 2; n + 2 < steps; ++n) {
        double t = v.time(n);
        double pt = p.psi_t(t);
        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j) {
                double phi0 = p.phi(t, m.x(i), m.x(j));
                double vtt = (-v[n - 2](i, j) + 16.0 * v[n - 1](i, j) - 30.0 * v[n](i, j) +
                              16.0 * v[n + 1](i, j) - v[n + 2](i, j)) / (12.0 * dd);
                double vt = (v[n - 2](i, j) - 8.0 * v[n - 1](i, j) + 8.0 * v[n + 1](i, j) -
                             v[n + 2](i, j)) / (12.0 * v.dt);

                double A2 = c.A(2, 1, n, i, j) + c.A(2, 2, n, i, j);
                double A3 = c.A(3, 1, n, i, j) + c.A(3, 2, n, i, j);
                double A4 = c.A(4, 1, n, i, j) + c.A(4, 2, n, i, j);

                double l1 = vtt + sq(p.tau * p.mu) * (sq(phi0 * pt) - A2) * v[n](i, j);
                for (int k = 1; k <= 2; ++k) {
                    double lapk = (k == 1)
                                      ? (v[n](i + 1, j) - 2.0 * v[n](i, j) + v[n](i - 1, j)) / hh
                                      : (v[n](i, j + 1) - 2.0 * v[n](i, j) + v[n](i, j - 1)) / hh;
                    l1 -= (1.0 + c.A0(p, k, n, i, j)) * lapk;
                }

                double grad_part = phi0 * pt * vt;
                for (int k = 1; k <= 2; ++k) {
                    double dk = (k == 1) ? (v[n](i + 1, j) - v[n](i - 1, j)) / (2.0 * m.h)
                                         : (v[n](i, j + 1) - v[n](i, j - 1)) / (2.0 * m.h);
                    grad_part -= c.A(1, k, n, i, j) * dk;
                }
                double l2 = (a1 - 1.0) * p.tau * p.mu * (phi0 * p.psi_tt() - A4) * v[n](i, j) -
                            p.tau * p.mu * p.mu * (phi0 * sq(pt) - A3) * v[n](i, j) -
                            2.0 * p.tau * p.mu * grad_part;

                out.l1[n](i, j) = l1;
                out.l2[n](i, j) = l2;
                out.r[n](i, j) = a1 * p.tau * p.mu * (phi0 * p.psi_tt() - A4) * v[n](i, j);
            }
    }
    return out;
}

// --- admissible sample fields ---------------------------------------------------

struct SampleOptions {
    int modes = 3;
    bool zero_at_t0 = false; // for the t=0 variant, w(0) = 0
    bool checkerboard = false;     // checkerboard-diagonal standing wave
};

// Random function satisfying the endpoint/boundary assumptions: compactly
// supported C^2 time profile times Dirichlet-zero sine combinations. The
// checkerboard variant oscillates at the 2/h frequency of the diagonal mode.
inline TimeSeries carleman_sample(const Mesh& m, double T, double dt, Rng& rng,
                                  const SampleOptions& opt = {}) {
    int half = static_cast<int>(std::llround(T / dt));
    TimeSeries v(m, -half * dt, dt, 2 * half + 1);
    PlateauCutoff chi{0.55 * T, 0.85 * T};

    if (opt.checkerboard) {
        NodeField k(m);
        for (int i = 1; i <= m.n; ++i) k(i, i) = (i % 2 == 0) ? 1.0 : -1.0;
        double nrm = l2_norm_interior(k);
        for (auto& x : k.v) x /= nrm;
        double omega = 2.0 / m.h;
        for (int n = 0; n < v.steps(); ++n) {
            double t = v.time(n);
            double c = chi(t) * std::cos(omega * t);
            if (opt.zero_at_t0) c = chi(t) * std::sin(omega * t);
            if (c == 0.0) continue;
            for (int i = 1; i <= m.n; ++i) v[n](i, i) = c * k(i, i);
        }
        return v;
    }

    struct Part {
        NodeField x;
        double amp, freq, phase;
    };
    std::vector<Part> parts;
    for (int q = 0; q < opt.modes; ++q) {
        NodeField x = sine_mode(m, rng.uniform_int(1, 3), rng.uniform_int(1, 3));
        double phase = opt.zero_at_t0 ? 0.0 : rng.uniform(0.0, 2.0 * pi);
        parts.push_back({x, rng.uniform(0.3, 1.0), rng.uniform(0.5, 3.0), phase});
    }
    for (int n = 0; n < v.steps(); ++n) {
        double t = v.time(n);
        double c = chi(t);
        if (c == 0.0) continue;
        for (const Part& p : parts) {
            double prof = opt.zero_at_t0 ? std::sin(p.freq * t) : std::cos(p.freq * t + p.phase);
            double amp = c * p.amp * prof;
            for (int i = 1; i <= m.n; ++i)
                for (int j = 1; j <= m.n; ++j) v[n](i, j) += amp * p.x(i, j);
        }
    }
    return v;
}

// --- weighted functionals of the estimates ------------------------------------

enum class CarlemanVariant { boundary, distributed, t0 };

struct FunctionalRecord {
    std::map<std::string, double> terms;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0; // lhs / rhs, 0 when both vanish
    double weight_ref = 0.0; // phi maximum used to normalize exp(2 tau phi)
};

// All sides of the weighted estimates, every term separately. Weights are
// normalized by exp(2 tau (phi - phi_max)) so that large tau stays inside
// double range; LHS/RHS ratios are unaffected.
//
// obs_mask: boundary mask for the observation term (boundary variant);
// omega:    interior mask for the distributed variant.
inline FunctionalRecord carleman_functionals(const CarlemanParams& p, const TimeSeries& w,
                                             CarlemanVariant variant,
                                             const SubsetMask* obs_mask = nullptr,
                                             const SubsetMask* omega = nullptr) {
    p.validate();
    p.require_admissible(w.mesh.h);
    detail::require_admissible_v(w, "carleman/functionals");
    const Mesh& m = w.mesh;
    int steps = w.steps();

    // phi maximum over the space-time grid
    double phimax = 0.0;
    for (int n = 0; n < steps; ++n) {
        double t = w.time(n);
        phimax = std::max({phimax, p.phi(t, 0.0, 0.0), p.phi(t, 1.0, 1.0)});
    }
    phimax = std::max(phimax, p.phi(0.0, 1.0, 1.0));
    auto wexp = [&](double t, double x1, double x2) {
        return std::exp(2.0 * p.tau * (p.phi(t, x1, x2) - phimax));
    };

    TimeSeries wt = time_derivative(w);
    TimeSeries wtt = time_second_derivative(w);

    Accumulator lhs_dt, lhs_grad, lhs_w, rhs_box, rhs_bdry, rhs_pen;
    Accumulator rhs_om_dt, rhs_om_grad, rhs_om_w;

    for (int n = 0; n < steps; ++n) {
        double t = w.time(n);
        double tw = trapezoid_weight(w, n);
        const double hh = m.h * m.h;

        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j) {
                double e2 = wexp(t, m.x(i), m.x(j));
                double box = wtt[n](i, j) -
                             (w[n](i + 1, j) + w[n](i - 1, j) + w[n](i, j + 1) + w[n](i, j - 1) -
                              4.0 * w[n](i, j)) / hh;
                lhs_dt.add(tw * hh * e2 * sq(wt[n](i, j)));
                lhs_w.add(tw * hh * e2 * sq(w[n](i, j)));
                rhs_box.add(tw * hh * e2 * sq(box));
                if (variant == CarlemanVariant::distributed && omega && omega->in_interior(i, j)) {
                    rhs_om_dt.add(tw * hh * e2 * sq(wt[n](i, j)));
                    rhs_om_w.add(tw * hh * e2 * sq(w[n](i, j)));
                }
            }

        for (int k = 1; k <= 2; ++k) {
            StaggeredField dw = forward_diff(w[n], k);
            StaggeredField dwt = forward_diff(wt[n], k);
            dw.for_each_index([&](int i, int j) {
                double e2 = wexp(t, m.x(i), m.x(j)); // weight at the left node of the pair
                lhs_grad.add(tw * hh * e2 * sq(dw.at(i, j)));
                rhs_pen.add(tw * hh * e2 * sq(dwt.at(i, j)));
                if (variant == CarlemanVariant::distributed && omega && omega->in_stag(k, i, j))
                    rhs_om_grad.add(tw * hh * e2 * sq(dw.at(i, j)));
            });
        }

        if (variant != CarlemanVariant::distributed) {
            // observation on the + edges (optionally masked)
            for (int j = 1; j <= m.n; ++j) {
                if (!obs_mask || obs_mask->on_edge(Edge::x1_hi, j)) {
                    double e2 = wexp(t, 1.0, m.x(j));
                    double d = (w[n](m.n + 1, j) - w[n](m.n, j)) / m.h;
                    rhs_bdry.add(tw * m.h * e2 * sq(d));
                }
                if (!obs_mask || obs_mask->on_edge(Edge::x2_hi, j)) {
                    double e2 = wexp(t, m.x(j), 1.0);
                    double d = (w[n](j, m.n + 1) - w[n](j, m.n)) / m.h;
                    rhs_bdry.add(tw * m.h * e2 * sq(d));
                }
            }
        }
    }

    FunctionalRecord rec;
    rec.weight_ref = phimax;
    double tau = p.tau;
    rec.terms["lhs_dt"] = tau * lhs_dt.value();
    rec.terms["lhs_grad"] = tau * lhs_grad.value();
    rec.terms["lhs_w"] = tau * tau * tau * lhs_w.value();
    rec.terms["rhs_box"] = rhs_box.value();
    rec.terms["rhs_pen"] = tau * m.h * m.h * rhs_pen.value();

    if (variant == CarlemanVariant::distributed) {
        rec.terms["rhs_omega_dt"] = tau * rhs_om_dt.value();
        rec.terms["rhs_omega_grad"] = tau * rhs_om_grad.value();
        rec.terms["rhs_omega_w"] = tau * tau * tau * rhs_om_w.value();
    } else {
        rec.terms["rhs_bdry"] = tau * rhs_bdry.value();
    }

    if (variant == CarlemanVariant::t0) {
        // snapshot nearest t = 0; requires w(0) = 0
        int n0 = static_cast<int>(std::llround((0.0 - w.t0) / w.dt));
        double scale = 0.0;
        for (int n = 0; n < steps; ++n) scale = std::max(scale, linf_norm(w[n]));
        if (l2_norm_interior(w[n0]) > 1e-8 * scale)
            throw PreconditionError("carleman/functionals: t0 variant requires w(0) = 0");
        Accumulator t0acc;
        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j)
                t0acc.add(m.h * m.h * wexp(0.0, m.x(i), m.x(j)) * sq(wt[n0](i, j)));
        rec.terms["lhs_t0"] = std::sqrt(tau) * t0acc.value();
    }

    rec.lhs = rec.terms["lhs_dt"] + rec.terms["lhs_grad"] + rec.terms["lhs_w"];
    if (variant == CarlemanVariant::t0) rec.lhs += rec.terms["lhs_t0"];
    rec.rhs = rec.terms["rhs_box"] + rec.terms["rhs_pen"];
    if (variant == CarlemanVariant::distributed)
        rec.rhs += rec.terms["rhs_omega_dt"] + rec.terms["rhs_omega_grad"] + rec.terms["rhs_omega_w"];
    else
        rec.rhs += rec.terms["rhs_bdry"];
    rec.ratio = (rec.lhs == 0.0 && rec.rhs == 0.0) ? 0.0 : rec.lhs / rec.rhs;
    return rec;
}

// --- cross-product terms -------------------------------------------------------

struct CrossProducts {
    double I[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    double sum_Inm = 0.0;
    double l1_dot_l2 = 0.0; // independent evaluation of int L1 v L2 v
    double I_v = 0.0;       // leading-order grouped functionals
    double I_dv = 0.0;
    double I_gamma = 0.0;        // exact boundary group
    double I_gamma_plus = 0.0;   // its Sigma+ part (expected <= 0 at small tau h)
    double I_gamma_minus = 0.0;  // its Sigma- part (expected >= 0)
    double I_tych = 0.0;         // exact high-frequency group
};

inline CrossProducts cross_product_terms(const CarlemanParams& p, const ConjugateCoefficients& c,
                                         const TimeSeries& v) {
    p.require_admissible(v.mesh.h);
    detail::require_admissible_v(v, "carleman/cross_products");
    const Mesh& m = v.mesh;
    int steps = v.steps();
    const double hh = m.h * m.h;
    const double dd = v.dt * v.dt;
    double a1 = p.alpha1();

    Splitting s = split(p, c, v);
    CrossProducts out;

    Accumulator acc[3][3], dot;
    Accumulator tych1, tych2, gplus, gminus, iv, idv;

    for (int n = 2; n + 2 < steps; ++n) {
        double t = v.time(n);
        double tw = trapezoid_weight(v, n);
        double pt = p.psi_t(t), ptt = p.psi_tt();

        for (int i = 1; i <= m.n; ++i)
            for (int j = 1; j <= m.n; ++j) {
                double x1 = m.x(i), x2 = m.x(j);
                double phi0 = p.phi(t, x1, x2);
                double vtt = (-v[n - 2](i, j) + 16.0 * v[n - 1](i, j) - 30.0 * v[n](i, j) +
                              16.0 * v[n + 1](i, j) - v[n + 2](i, j)) / (12.0 * dd);
                double vt = (v[n - 2](i, j) - 8.0 * v[n - 1](i, j) + 8.0 * v[n + 1](i, j) -
                             v[n + 2](i, j)) / (12.0 * v.dt);
                double d1 = (v[n](i + 1, j) - v[n](i - 1, j)) / (2.0 * m.h);
                double d2 = (v[n](i, j + 1) - v[n](i, j - 1)) / (2.0 * m.h);

                double A2s = c.A(2, 1, n, i, j) + c.A(2, 2, n, i, j);
                double A3s = c.A(3, 1, n, i, j) + c.A(3, 2, n, i, j);
                double A4s = c.A(4, 1, n, i, j) + c.A(4, 2, n, i, j);

                // L1 terms
                double t1[3];
                t1[0] = vtt;
                t1[1] = 0.0;
                for (int k = 1; k <= 2; ++k) {
                    double lapk = (k == 1)
                                      ? (v[n](i + 1, j) - 2.0 * v[n](i, j) + v[n](i - 1, j)) / hh
                                      : (v[n](i, j + 1) - 2.0 * v[n](i, j) + v[n](i, j - 1)) / hh;
                    t1[1] -= (1.0 + c.A0(p, k, n, i, j)) * lapk;
                }
                t1[2] = sq(p.tau * p.mu) * (sq(phi0 * pt) - A2s) * v[n](i, j);

                // L2 terms
                double t2[3];
                t2[0] = (a1 - 1.0) * p.tau * p.mu * (phi0 * ptt - A4s) * v[n](i, j);
                t2[1] = -p.tau * p.mu * p.mu * (phi0 * sq(pt) - A3s) * v[n](i, j);
                double grad_part = phi0 * pt * vt - c.A(1, 1, n, i, j) * d1 - c.A(1, 2, n, i, j) * d2;
                t2[2] = -2.0 * p.tau * p.mu * grad_part;

                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b) acc[a][b].add(tw * hh * t1[a] * t2[b]);
                dot.add(tw * hh * s.l1[n](i, j) * s.l2[n](i, j));

                // leading-order volume group
                double gpsi1 = p.psi_x(x1), gpsi2 = p.psi_x(x2);
                double grad2 = sq(gpsi1) + sq(gpsi2);
                double X = sq(pt) - grad2;
                double tau3mu3 = std::pow(p.tau, 3) * std::pow(p.mu, 3);
                double Fpsi = a1 * tau3mu3 * std::pow(phi0, 3) * X * (ptt - 4.0) +
                              tau3mu3 * std::pow(phi0, 3) * (2.0 * ptt * grad2 + 4.0 * grad2) +
                              2.0 * tau3mu3 * p.mu * std::pow(phi0, 3) * sq(X);
                iv.add(tw * hh * sq(v[n](i, j)) * Fpsi);

                // leading-order first-order group (volume pieces)
                double dot_grad = d1 * gpsi1 + d2 * gpsi2;
                double taumu2 = p.tau * sq(p.mu);
                double idv_val = 2.0 * taumu2 * sq(vt) * phi0 * sq(pt) +
                                 2.0 * taumu2 * sq(dot_grad) * phi0 -
                                 4.0 * taumu2 * vt * pt * phi0 * dot_grad +
                                 p.tau * p.mu * sq(vt) * phi0 * (2.0 * ptt - a1 * (ptt - 4.0)) -
                                 2.0 * taumu2 * phi0 * (sq(d1) * sq(gpsi1) + sq(d2) * sq(gpsi2));
                idv.add(tw * hh * idv_val);
            }

        // staggered pieces of the first-order group
        for (int k = 1; k <= 2; ++k) {
            StaggeredField dv = forward_diff(v[n], k);
            dv.for_each_index([&](int i, int j) {
                double x1 = m.x(i), x2 = m.x(j);
                double phi0 = p.phi(t, x1, x2);
                double gk = p.psi_x(k == 1 ? x1 : x2);
                double val = p.tau * p.mu * sq(dv.at(i, j)) * phi0 *
                                 (a1 * (p.psi_tt() - 4.0) + 2.0 * CarlemanParams::psi_xx()) +
                             2.0 * p.tau * sq(p.mu) * sq(dv.at(i, j)) * phi0 * sq(gk);
                idv.add(tw * hh * val);
            });
        }

        // exact boundary group: g_k = (1 + A0k) A1k at the boundary nodes
        for (int j = 1; j <= m.n; ++j) {
            {
                double g = (1.0 + c.A0(p, 1, n, m.n + 1, j)) * c.A(1, 1, n, m.n + 1, j);
                double d = (v[n](m.n + 1, j) - v[n](m.n, j)) / m.h;
                gplus.add(-p.tau * p.mu * tw * m.h * g * sq(d));
                g = (1.0 + c.A0(p, 2, n, j, m.n + 1)) * c.A(1, 2, n, j, m.n + 1);
                d = (v[n](j, m.n + 1) - v[n](j, m.n)) / m.h;
                gplus.add(-p.tau * p.mu * tw * m.h * g * sq(d));
            }
            {
                double g = (1.0 + c.A0(p, 1, n, 0, j)) * c.A(1, 1, n, 0, j);
                double d = (v[n](1, j) - v[n](0, j)) / m.h;
                gminus.add(p.tau * p.mu * tw * m.h * g * sq(d));
                g = (1.0 + c.A0(p, 2, n, j, 0)) * c.A(1, 2, n, j, 0);
                d = (v[n](j, 1) - v[n](j, 0)) / m.h;
                gminus.add(p.tau * p.mu * tw * m.h * g * sq(d));
            }
        }

        // exact high-frequency group
        // - tau mu / 2 sum_k int |h d+_k d_t v|^2 d+_k A1k
        for (int k = 1; k <= 2; ++k)
            for (int i = (k == 1 ? 0 : 1); i <= m.n; ++i)
                for (int j = (k == 2 ? 0 : 1); j <= m.n; ++j) {
                    auto vt_at = [&](int ii, int jj) {
                        return (v[n - 2](ii, jj) - 8.0 * v[n - 1](ii, jj) + 8.0 * v[n + 1](ii, jj) -
                                v[n + 2](ii, jj)) / (12.0 * v.dt);
                    };
                    int i2 = i + (k == 1 ? 1 : 0), j2 = j + (k == 2 ? 1 : 0);
                    double hdvt = vt_at(i2, j2) - vt_at(i, j); // h * d+_k d_t v
                    double dA1 = (c.A(1, k, n, i2, j2) - c.A(1, k, n, i, j)) / m.h;
                    tych1.add(-0.5 * p.tau * p.mu * tw * hh * sq(hdvt) * dA1);
                }
        // + tau mu / 2 int |h d+_1 d+_2 v|^2 [d+2 m+1((1+A01)A12) + d+1 m+2((1+A02)A11)]
        for (int i = 0; i <= m.n; ++i)
            for (int j = 0; j <= m.n; ++j) {
                double hcv = (v[n](i + 1, j + 1) - v[n](i, j + 1) - v[n](i + 1, j) + v[n](i, j)) / m.h;
                auto B = [&](int k_of_A0, int k_of_A1, int ii, int jj) {
                    return (1.0 + c.A0(p, k_of_A0, n, ii, jj)) * c.A(1, k_of_A1, n, ii, jj);
                };
                double term1 = 0.5 * ((B(1, 2, i + 1, j + 1) + B(1, 2, i, j + 1)) -
                                      (B(1, 2, i + 1, j) + B(1, 2, i, j))) / m.h;
                double term2 = 0.5 * ((B(2, 1, i + 1, j + 1) + B(2, 1, i + 1, j)) -
                                      (B(2, 1, i, j + 1) + B(2, 1, i, j))) / m.h;
                tych2.add(0.5 * p.tau * p.mu * tw * hh * sq(hcv) * (term1 + term2));
            }
    }

    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            out.I[a][b] = acc[a][b].value();
            out.sum_Inm += out.I[a][b];
        }
    out.l1_dot_l2 = dot.value();
    out.I_v = iv.value();
    out.I_dv = idv.value();
    out.I_gamma_plus = gplus.value();
    out.I_gamma_minus = gminus.value();
    out.I_gamma = out.I_gamma_plus + out.I_gamma_minus;
    out.I_tych = tych1.value() + tych2.value();
    return out;
}

} // namespace dwave
