// Command-line front end: every experiment of the library behind one binary.
// Exit codes: 0 pass, 1 usage error, 2 numerical/assertion failure.

#include <atomic>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "dwave/carleman_elliptic.hpp"
#include "dwave/carleman_hyperbolic.hpp"
#include "dwave/expr.hpp"
#include "dwave/fbi.hpp"
#include "dwave/inverse.hpp"
#include "dwave/io.hpp"

namespace fs = std::filesystem;
using namespace dwave;
using nlohmann::json;

namespace {

struct Global {
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    int threads = 1;
    std::string format = "csv";
};

template <class F>
void parallel_for(int count, int threads, F&& f) {
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(threads, count); ++t)
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= count) return;
                f(i);
            }
        });
    for (auto& th : pool) th.join();
}

fs::path prepare_out(const Global& g, const std::string& sub) {
    fs::path dir = fs::path(g.out_dir) / sub;
    fs::create_directories(dir);
    return dir;
}

void write_manifest(const fs::path& dir, const Config& cfg, const std::string& command,
                    std::uint64_t seed) {
    write_text(dir / "manifest.json", cfg.manifest(command, seed).dump(2) + "\n");
}

SpaceTimeNodeFn field_from_key(const Config& cfg, const std::string& key, const std::string& dflt,
                               const Mesh& m) {
    std::string spec = cfg.get(key, dflt);
    if (spec.rfind("csv:", 0) == 0) {
        auto f = std::make_shared<NodeField>(read_node_field(spec.substr(4)));
        require_same_mesh(f->mesh, m, "cli/config field");
        return [f](double, int i, int j) { return (*f)(i, j); };
    }
    Expr e = Expr::parse(spec);
    double h = m.h;
    return [e, h](double t, int i, int j) { return e(t, i * h, j * h); };
}

int run_solve(const Global& g, const std::string& config_path) {
    Config cfg = Config::load(config_path);
    int N = cfg.get("N", 20);
    double T = cfg.get("T", 1.0);
    double dtf = cfg.get("dt_factor", 8.0);
    int stride = cfg.get("snapshot_stride", 8);
    Mesh m(N);
    double dt = m.h / dtf;

    auto qf = field_from_key(cfg, "q", "0", m);
    auto y0f = field_from_key(cfg, "y0", "sin(pi*x1)*sin(pi*x2)", m);
    auto y1f = field_from_key(cfg, "y1", "0", m);
    auto ff = field_from_key(cfg, "f", "0", m);
    auto fbf = field_from_key(cfg, "f_bdy", "0", m);

    WaveProblem p{m, NodeField(m), NodeField(m), NodeField(m), ff, fbf, 0.0, T, dt};
    for (int i = 0; i <= N + 1; ++i)
        for (int j = 0; j <= N + 1; ++j) {
            p.q(i, j) = qf(0.0, i, j);
            p.y0(i, j) = y0f(0.0, i, j);
            p.y1(i, j) = y1f(0.0, i, j);
        }
    WaveSolution sol = solve(p);

    fs::path dir = prepare_out(g, "solve");
    write_time_series(dir / "snapshots", "y", sol.y, stride);
    std::ostringstream energy;
    energy << "t,E\n";
    for (int n = 0; n < sol.y.steps(); n += stride)
        energy << fmt(sol.y.time(n)) << ',' << fmt(dwave::energy(sol, p.q, n)) << '\n';
    write_text(dir / "energy.csv", energy.str());
    write_manifest(dir, cfg, "solve", g.seed);
    std::cout << "solve: " << sol.y.steps() << " steps, N = " << N << "\n";
    return 0;
}

int run_ipp_check(const Global& g, const std::vector<int>& ns, int trials) {
    fs::path dir = prepare_out(g, "ipp-check");
    std::ostringstream csv;
    csv << "identity,N,trial,residual\n";
    double worst = 0.0;
    const IppId ids[] = {IppId::ipp1, IppId::ipp2, IppId::ipp3, IppId::ipp4,
                         IppId::ipp5, IppId::ipp6, IppId::ipp_transfer, IppId::ipp_cross};
    for (int n : ns) {
        Mesh m(n);
        for (int trial = 0; trial < trials; ++trial) {
            Rng rng = Rng::split(g.seed, static_cast<std::uint64_t>(n) * 100003 + trial);
            NodeField gf(m), ff(m), vf(m);
            for (auto& x : gf.v) x = rng.uniform(-1.0, 1.0);
            for (auto& x : ff.v) x = rng.uniform(-1.0, 1.0);
            for (auto& x : vf.v) x = rng.uniform(-1.0, 1.0);
            vf.zero_boundary();
            for (IppId id : ids) {
                double r = ipp_residual(id, gf, ff, vf);
                worst = std::max(worst, r);
                csv << ipp_name(id) << ',' << n << ',' << trial << ',' << fmt(r) << '\n';
            }
        }
    }
    write_text(dir / "residuals.csv", csv.str());
    Config empty;
    empty.resolved["n"] = std::to_string(ns.size());
    empty.resolved["trials"] = std::to_string(trials);
    write_manifest(dir, empty, "ipp-check", g.seed);
    std::cout << "ipp-check: worst normalized residual " << worst << "\n";
    return worst <= 1e-10 ? 0 : 2;
}

int run_carleman_sweep(const Global& g, const std::string& variant_name, const std::vector<int>& ns,
                       const std::vector<double>& tauhs, int samples) {
    CarlemanVariant variant;
    if (variant_name == "boundary")
        variant = CarlemanVariant::boundary;
    else if (variant_name == "distributed")
        variant = CarlemanVariant::distributed;
    else if (variant_name == "t0")
        variant = CarlemanVariant::t0;
    else
        throw CLI::ValidationError("--variant", "must be boundary|distributed|t0");

    fs::path dir = prepare_out(g, "carleman-sweep");
    std::ostringstream csv;
    csv << "N,tau,sample,term_name,value,ratio\n";
    json summary;
    for (int n : ns) {
        Mesh m(n);
        double dt = m.h / 8.0;
        double c_emp = 0.0;
        SubsetMask omega = SubsetMask::interior_union(
            m, {{0.8, 1.0, 0.0, 1.0}, {0.0, 1.0, 0.8, 1.0}});
        SubsetMask gamma0 = SubsetMask::boundary_union(m, {{Edge::x1_hi, 0.25, 0.75}});
        // without --tauh, sweep the default geometric tau grid for this mesh
        std::vector<double> tauh_list = tauhs;
        if (tauh_list.empty())
            for (double tau : tau_sweep_grid(m.h)) tauh_list.push_back(tau * m.h);
        for (double tauh : tauh_list) {
            CarlemanParams p = CarlemanParams::gamma_preset(1.6, tauh / m.h);
            std::vector<FunctionalRecord> recs(samples);
            std::vector<std::string> kinds(samples);
            parallel_for(samples, g.threads, [&](int s) {
                Rng rng = Rng::split(g.seed, static_cast<std::uint64_t>(n) * 1000 + s);
                SampleOptions opt;
                opt.zero_at_t0 = (variant == CarlemanVariant::t0);
                opt.checkerboard = (s == 0 && variant == CarlemanVariant::boundary);
                kinds[s] = opt.checkerboard ? "checkerboard" : "random";
                TimeSeries w = carleman_sample(m, p.T, dt, rng, opt);
                recs[s] = carleman_functionals(p, w, variant, opt.checkerboard ? &gamma0 : nullptr,
                                               variant == CarlemanVariant::distributed ? &omega
                                                                                       : nullptr);
            });
            for (int s = 0; s < samples; ++s) {
                for (const auto& [name, value] : recs[s].terms)
                    csv << n << ',' << fmt(p.tau) << ',' << s << ',' << name << ',' << fmt(value)
                        << ',' << fmt(recs[s].ratio) << '\n';
                c_emp = std::max(c_emp, recs[s].ratio);
            }
        }
        summary["C_emp_max"][std::to_string(n)] = c_emp;
    }
    write_text(dir / "sweep.csv", csv.str());
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    Config meta;
    meta.resolved["variant"] = variant_name;
    write_manifest(dir, meta, "carleman-sweep", g.seed);
    std::cout << "carleman-sweep: " << summary.dump() << "\n";
    return 0;
}

int run_elliptic_check(const Global& g, const std::vector<int>& ns) {
    fs::path dir = prepare_out(g, "elliptic-check");
    std::ostringstream csv;
    csv << "N,h2_ratio\n";
    std::vector<double> ratios;
    for (int n : ns) {
        Mesh m(n);
        NodeField q = NodeField::sample(m, [](double a, double b) {
            return 1.0 + 0.5 * std::sin(pi * a) * std::cos(pi * b);
        });
        NodeField rhs = NodeField::sample(m, [](double a, double b) {
            return std::exp(a) * std::sin(pi * b) + a * b;
        });
        rhs.zero_boundary();
        EllipticProblem p{m, q, rhs};
        NodeField w = solve_elliptic(p);
        double r = h2_regularity_ratio(p, w);
        ratios.push_back(r);
        csv << n << ',' << fmt(r) << '\n';
    }
    write_text(dir / "ratios.csv", csv.str());
    Config meta;
    write_manifest(dir, meta, "elliptic-check", g.seed);
    double lo = *std::min_element(ratios.begin(), ratios.end());
    double hi = *std::max_element(ratios.begin(), ratios.end());
    std::cout << "elliptic-check: ratio range [" << lo << ", " << hi << "]\n";
    return hi <= 1.5 * lo ? 0 : 2;
}

int run_elliptic_carleman(const Global& g, const std::string& config_path) {
    Config cfg = Config::load(config_path);
    EllipticWeightConfig wc;
    wc.gamma0_lo = cfg.get("gamma0_lo", 0.3);
    wc.gamma0_hi = cfg.get("gamma0_hi", 0.7);
    wc.radius = cfg.get("radius", 0.25);
    wc.mu = cfg.get("mu", 2.0);
    wc.eps_tau_h = cfg.get("eps_tau_h", 0.5);
    EllipticWeight w = build_elliptic_weight(wc);
    std::vector<int> ns = cfg.get_int_list("n", "10,20,40");
    double tauh = cfg.get("tauh", 0.3);
    int samples = cfg.get("samples", 4);

    fs::path dir = prepare_out(g, "elliptic-carleman");
    std::ostringstream csv;
    csv << "N,tau,sample,term_name,value,ratio\n";
    json summary;
    for (int n : ns) {
        Mesh m(n);
        NodeField q = NodeField::sample(m, [](double a, double b) { return 0.5 + 0.2 * a * b; });
        SubsetMask support = SubsetMask::interior_union(
            m, {{1.0 - wc.radius - wc.R, 1.0, w.z2 - wc.radius - wc.R, w.z2 + wc.radius + wc.R}});
        SubsetMask gamma0 =
            SubsetMask::boundary_union(m, {{Edge::x1_hi, wc.gamma0_lo, wc.gamma0_hi}});
        double tau = tauh / m.h;
        double c_emp = 0.0;
        double s_step = cfg.get("s_step", 0.0);
        if (s_step <= 0.0) s_step = m.h;
        for (int s = 0; s < samples; ++s) {
            Rng rng = Rng::split(g.seed, static_cast<std::uint64_t>(n) * 131 + s);
            CylinderField v(m, s_step);
            PlateauCutoff chi_s{1.8, 2.7};
            double r_in = wc.radius + 0.55 * wc.R;
            double amp = rng.uniform(0.5, 1.5), freq = rng.uniform(0.5, 3.0);
            for (int si = 0; si < v.steps(); ++si) {
                double cs = chi_s(v.s(si));
                if (cs == 0.0) continue;
                for (int i = 1; i <= m.n; ++i)
                    for (int j = 1; j <= m.n; ++j) {
                        double d = std::hypot(m.x(i) - 1.0, m.x(j) - w.z2);
                        if (d >= r_in) continue;
                        v.slices[si](i, j) = cs * amp * sq(1.0 - sq(d / r_in)) *
                                             std::cos(freq * v.s(si)) * std::sin(pi * m.x(i));
                    }
            }
            EllipticFunctionalRecord rec =
                elliptic_carleman_functionals(w, v, q, tau, support, gamma0);
            for (const auto& [name, value] : rec.terms)
                csv << n << ',' << fmt(tau) << ',' << s << ',' << name << ',' << fmt(value) << ','
                    << fmt(rec.ratio) << '\n';
            c_emp = std::max(c_emp, rec.ratio);
        }
        summary["C_emp_max"][std::to_string(n)] = c_emp;
    }
    write_text(dir / "sweep.csv", csv.str());
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    write_manifest(dir, cfg, "elliptic-carleman", g.seed);
    std::cout << "elliptic-carleman: " << summary.dump() << "\n";
    return 0;
}

int run_fbi_check(const Global& g, int kernel_n, const std::vector<double>& lambdas) {
    fs::path dir = prepare_out(g, "fbi-check");
    FbiKernel k(kernel_n);
    KernelFit fit = kernel_decay_check(k);
    json report;
    report["constants"] = {{"C0", fit.C0},   {"c0", fit.c0},       {"c1", fit.c1},
                           {"c2", fit.c2},   {"r_max", fit.r_max}, {"gamma", k.gamma()},
                           {"n", kernel_n}};
    report["violations"] = {{"growth", fit.violation_growth}, {"decay", fit.violation_decay}};
    std::ostringstream csv;
    csv << "lambda,fourier_sup_error\n";
    bool ok = fit.violation_growth <= 0.0 && fit.violation_decay <= 0.0;
    for (double lam : lambdas) {
        FbiKernel kl(kernel_n, lam);
        double err = fourier_identity_error(kl, fit);
        csv << fmt(lam) << ',' << fmt(err) << '\n';
        report["fourier"][fmt(lam)] = err;
        ok = ok && err <= 1e-6;
    }
    write_text(dir / "fourier.csv", csv.str());
    write_text(dir / "report.json", report.dump(2) + "\n");
    Config meta;
    meta.resolved["n_kernel"] = std::to_string(kernel_n);
    write_manifest(dir, meta, "fbi-check", g.seed);
    std::cout << "fbi-check: " << report["constants"].dump() << "\n";
    return ok ? 0 : 2;
}

int run_log_stability(const Global& g, const std::string& config_path) {
    Config cfg = Config::load(config_path);
    LogStabilityConfig lc;
    lc.N = cfg.get("N", 12);
    lc.T = cfg.get("T", 16.0);
    lc.dt_factor = cfg.get("dt_factor", 8.0);
    lc.kernel_n = cfg.get("kernel_n", 2);
    lc.alpha = cfg.get("alpha", 0.5);
    lc.scenario = cfg.get("scenario", std::string("generic"));
    lc.seed = g.seed;
    LogStabilityReport rep = log_stability_experiment(lc);

    fs::path dir = prepare_out(g, "log-stability");
    json out;
    out["constants"] = rep.constants;
    out["terms"] = rep.terms;
    out["lambda_case"] = rep.lambda_case;
    write_text(dir / "report.json", out.dump(2) + "\n");
    std::ostringstream csv;
    csv << "name,value\n";
    for (const auto& [k2, v] : rep.constants) csv << k2 << ',' << fmt(v) << '\n';
    for (const auto& [k2, v] : rep.terms) csv << k2 << ',' << fmt(v) << '\n';
    write_text(dir / "report.csv", csv.str());
    write_manifest(dir, cfg, "log-stability", g.seed);
    std::cout << "log-stability: case " << rep.lambda_case << ", C_emp "
              << rep.terms.at("C_emp") << "\n";
    return 0;
}

int run_stability_sweep(const Global& g, const std::string& config_path) {
    Config cfg = Config::load(config_path);
    SweepConfig sc;
    std::vector<int> ns = cfg.get_int_list("n", "10,20,40");
    sc.T = cfg.get("T", 1.6);
    sc.dt_factor = cfg.get("dt_factor", 8.0);
    sc.samples = cfg.get("samples", 20);
    sc.m_cap = cfg.get("m", 2.0);
    sc.alpha0 = cfg.get("alpha0", 1.0);
    sc.amplitude = cfg.get("amplitude", 0.3);
    sc.delta = cfg.get("delta", 0.2);
    sc.h1_bounded = cfg.get("perturbation_family", std::string("trig_bump")) == "h1_bounded";
    sc.seed = g.seed;

    fs::path dir = prepare_out(g, "stability-sweep");
    std::ostringstream csv, dat;
    csv << "N,sample,dq_norm,gap_boundary,gap_distributed,ratio_boundary,ratio_distributed,skipped\n";
    dat << "# N max_ratio_boundary\n";
    json summary;
    for (int n : ns) {
        sc.N = n;
        SweepSummary sum = lipschitz_sweep(sc);
        for (std::size_t s = 0; s < sum.records.size(); ++s) {
            const auto& r = sum.records[s];
            csv << n << ',' << s << ',' << fmt(r.dq_norm) << ',' << fmt(r.gap_boundary) << ','
                << fmt(r.gap_distributed) << ',' << fmt(r.ratio_boundary) << ','
                << fmt(r.ratio_distributed) << ',' << (r.skipped ? 1 : 0) << '\n';
        }
        dat << n << ' ' << fmt(sum.max_ratio_boundary) << '\n';
        summary["max_ratio_boundary"][std::to_string(n)] = sum.max_ratio_boundary;
        summary["max_ratio_distributed"][std::to_string(n)] = sum.max_ratio_distributed;
        summary["equivalence_factor"][std::to_string(n)] = {
            {"lo", sum.equivalence_factor_lo}, {"hi", sum.equivalence_factor_hi}};
    }
    write_text(dir / "records.csv", csv.str());
    write_text(dir / "ratios.dat", dat.str());
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    write_manifest(dir, cfg, "stability-sweep", g.seed);
    std::cout << "stability-sweep: " << summary["max_ratio_boundary"].dump() << "\n";
    return 0;
}

int run_reconstruct(const Global& g, const std::string& config_path) {
    Config cfg = Config::load(config_path);
    int N = cfg.get("N", 20);
    double T = cfg.get("T", 1.6);
    double dtf = cfg.get("dt_factor", 8.0);
    Mesh m(N);
    double dt = m.h / dtf;

    Expr qtrue = Expr::parse(cfg.get("q_true", "1 + 0.5*sin(pi*x1)*sin(pi*x2)"));
    Expr qinit = Expr::parse(cfg.get("q_init", "1"));
    NodeField q_true(m), q_init(m);
    for (int i = 1; i <= m.n; ++i)
        for (int j = 1; j <= m.n; ++j) {
            q_true(i, j) = qtrue(0.0, m.x(i), m.x(j));
            q_init(i, j) = qinit(0.0, m.x(i), m.x(j));
        }
    NodeField y0 = NodeField::sample(m, [](double a, double b) {
        return 2.0 + 0.5 * std::sin(pi * a) * std::sin(pi * b);
    });
    auto bdry = [](double, int, int) { return 2.0; };
    WaveProblem truth{m, q_true, y0, NodeField(m), nullptr, bdry, 0.0, T, dt};
    SubsetMask g0 = SubsetMask::boundary_union(m, {{Edge::x1_hi, 0.0, 1.0}, {Edge::x2_hi, 0.0, 1.0}});
    Measurement target = measure(solve(truth), g0);

    ReconstructOptions opts;
    opts.max_iter = cfg.get("max_iter", 120);
    opts.grad_tol = cfg.get("grad_tol", 1e-8);
    opts.tikhonov = cfg.get("eps_reg", 0.0);
    ReconstructLog log;
    NodeField q_rec = reconstruct(target, truth, g0, q_init, opts, &log);

    fs::path dir = prepare_out(g, "reconstruct");
    std::ostringstream conv;
    conv << "iteration,objective,grad_norm\n";
    for (std::size_t i = 0; i < log.objective.size(); ++i)
        conv << i << ',' << fmt(log.objective[i]) << ',' << fmt(log.grad_norm[i]) << '\n';
    write_text(dir / "convergence.csv", conv.str());
    write_node_field(dir / "q_reconstructed.csv", q_rec, false);

    NodeField e0 = q_init - q_true, e1 = q_rec - q_true;
    e0.zero_boundary();
    e1.zero_boundary();
    json summary;
    summary["initial_error"] = l2_norm_interior(e0);
    summary["final_error"] = l2_norm_interior(e1);
    summary["iterations"] = log.iterations;
    summary["stop_reason"] = log.stop_reason;
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    write_manifest(dir, cfg, "reconstruct", g.seed);
    std::cout << "reconstruct: error " << summary["initial_error"].get<double>() << " -> "
              << summary["final_error"].get<double>() << " in " << log.iterations << " iterations\n";
    return 0;
}

int run_convergence(const Global& g, const std::string& config_path) {
    Config cfg = Config::load(config_path);
    ConvergenceConfig cc;
    cc.Ns = cfg.get_int_list("n", "10,20,40");
    cc.T = cfg.get("T", 1.6);
    cc.dt_factor = cfg.get("dt_factor", 8.0);
    cc.reconstruction = cfg.get("mode", std::string("exact")) == "reconstruction";
    cc.max_iter = cfg.get("max_iter", 80);
    cc.seed = g.seed;
    auto rows = convergence_study(cc);

    fs::path dir = prepare_out(g, "convergence");
    std::ostringstream csv, dat;
    csv << "N,h,potential_error,measurement_gap,iterations\n";
    dat << "# h potential_error\n";
    for (const auto& r : rows) {
        Mesh m(r.N);
        csv << r.N << ',' << fmt(m.h) << ',' << fmt(r.potential_error) << ','
            << fmt(r.measurement_gap) << ',' << r.iterations << '\n';
        dat << fmt(m.h) << ' ' << fmt(r.potential_error) << '\n';
    }
    write_text(dir / "table.csv", csv.str());
    write_text(dir / "errors.dat", dat.str());
    write_manifest(dir, cfg, "convergence", g.seed);

    bool mono = true;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].potential_error > 1.1 * rows[i - 1].potential_error) mono = false;
    std::cout << "convergence: " << rows.size() << " levels, monotone(10% slack) = "
              << (mono ? "yes" : "no") << "\n";
    return mono ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-difference laboratory for the 2-d wave equation: weighted energy "
                 "estimates, boundary-flux inverse problems, convergence studies"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags are accepted after the subcommand too

    Global g;
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--seed", g.seed, "root seed");
    app.add_option("--threads", g.threads, "worker threads for sweeps");
    app.add_option("--format", g.format, "csv|json (reports always write both)");

    auto* solve_cmd = app.add_subcommand("solve", "integrate one wave problem from a config file");
    std::string solve_cfg;
    solve_cmd->add_option("--config", solve_cfg, "config file")->required();

    auto* ipp = app.add_subcommand("ipp-check", "verify the discrete integration-by-parts identities");
    std::vector<int> ipp_ns{4, 8, 16};
    int ipp_trials = 200;
    ipp->add_option("--n", ipp_ns, "interior sizes")->delimiter(',');
    ipp->add_option("--trials", ipp_trials, "random trials per size");
    ipp->add_option("--seed", g.seed, "seed");

    auto* casw = app.add_subcommand("carleman-sweep", "weighted hyperbolic functional sweep");
    std::string ca_variant = "boundary";
    std::vector<int> ca_ns{10, 20, 40};
    std::vector<double> ca_tauh; // empty -> geometric default grid per mesh
    int ca_samples = 20;
    casw->add_option("--variant", ca_variant, "boundary|distributed|t0");
    casw->add_option("--n", ca_ns, "sizes")->delimiter(',');
    casw->add_option("--tauh", ca_tauh, "tau*h values (default: geometric tau grid)")->delimiter(',');
    casw->add_option("--samples", ca_samples, "samples per (N, tau)");
    casw->add_option("--seed", g.seed, "seed");

    auto* ell = app.add_subcommand("elliptic-check", "H2 regularity ratio across refinement");
    std::vector<int> ell_ns{10, 20, 40, 80};
    ell->add_option("--n", ell_ns, "sizes")->delimiter(',');

    auto* ellc = app.add_subcommand("elliptic-carleman", "weighted cylinder functional sweep");
    std::string ellc_cfg;
    ellc->add_option("--config", ellc_cfg, "config file")->required();

    auto* fbic = app.add_subcommand("fbi-check", "kernel closed form, decay fits, Fourier identity");
    int fbi_n = 2;
    std::vector<double> fbi_lambdas{1.0, 4.0};
    fbic->add_option("--n-kernel", fbi_n, "kernel order n");
    fbic->add_option("--lambda", fbi_lambdas, "lambda list")->delimiter(',');

    auto* logst = app.add_subcommand("log-stability", "assembled logarithmic stability experiment");
    std::string logst_cfg;
    logst->add_option("--config", logst_cfg, "config file")->required();

    auto* stab = app.add_subcommand("stability-sweep", "Lipschitz stability ratios across refinement");
    std::string stab_cfg;
    stab->add_option("--config", stab_cfg, "config file")->required();

    auto* rec = app.add_subcommand("reconstruct", "adjoint-state potential reconstruction");
    std::string rec_cfg;
    rec->add_option("--config", rec_cfg, "config file")->required();

    auto* conv = app.add_subcommand("convergence", "mesh-refinement convergence study");
    std::string conv_cfg;
    conv->add_option("--config", conv_cfg, "config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (solve_cmd->parsed()) return run_solve(g, solve_cfg);
        if (ipp->parsed()) return run_ipp_check(g, ipp_ns, ipp_trials);
        if (casw->parsed()) return run_carleman_sweep(g, ca_variant, ca_ns, ca_tauh, ca_samples);
        if (ell->parsed()) return run_elliptic_check(g, ell_ns);
        if (ellc->parsed()) return run_elliptic_carleman(g, ellc_cfg);
        if (fbic->parsed()) return run_fbi_check(g, fbi_n, fbi_lambdas);
        if (logst->parsed()) return run_log_stability(g, logst_cfg);
        if (stab->parsed()) return run_stability_sweep(g, stab_cfg);
        if (rec->parsed()) return run_reconstruct(g, rec_cfg);
        if (conv->parsed()) return run_convergence(g, conv_cfg);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
