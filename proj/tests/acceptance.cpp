/* Acceptance gate. Each numbered criterion prints exactly one PASS/FAIL line
   with the measured quantities; the process exit status is the number of
   failures. Everything runs on one core at small scale: at most 1e5 paths
   and at most 512 grid steps per criterion.

   usage: acceptance_tests <cli_binary> <scratch_dir> [criteria]

   The optional third argument is a comma-separated subset, e.g. "1,5,9",
   used when bringing a single criterion up. */

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <Eigen/Dense>

#include "json.hpp"

#include "sbsde/control.hpp"
#include "sbsde/forward.hpp"
#include "sbsde/grid.hpp"
#include "sbsde/linear.hpp"
#include "sbsde/maximum_principle.hpp"
#include "sbsde/noise.hpp"
#include "sbsde/picard.hpp"
#include "sbsde/skorohod.hpp"
#include "sbsde/stats.hpp"

namespace {

using json = nlohmann::json;
using namespace sbsde;

std::string g_cli;
std::string g_scratch;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw std::runtime_error("cannot write " + path);
}

int run_cli(const std::string& args, const std::string& log_name) {
    const std::string cmd =
        g_cli + " " + args + " > " + g_scratch + "/" + log_name + " 2>&1";
    const int rc = std::system(cmd.c_str());
    if (rc == -1) throw std::runtime_error("failed to launch: " + cmd);
    if (WIFEXITED(rc)) return WEXITSTATUS(rc);
    return -1;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> csv_column(const std::string& path, const std::string& name) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty csv: " + path);
    const std::vector<std::string> head = split_fields(line);
    std::size_t idx = head.size();
    for (std::size_t i = 0; i < head.size(); ++i)
        if (head[i] == name) idx = i;
    if (idx == head.size()) throw std::runtime_error(path + " has no column " + name);
    std::vector<std::string> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_fields(line);
        if (idx < cells.size()) out.push_back(cells[idx]);
    }
    return out;
}

std::vector<double> csv_numbers(const std::string& path, const std::string& name) {
    std::vector<double> out;
    for (const std::string& cell : csv_column(path, name)) out.push_back(std::stod(cell));
    return out;
}

Eigen::VectorXd bounded_terminal(const PathBundle& b) {
    const Eigen::VectorXd xT = b.X.col(b.X.cols() - 1);
    return Eigen::VectorXd(1.0 - (-xT.array()).exp());
}

/* Iterative solve against the affine closed form on the nodes shared by
   three nested grids, one affine coefficient set at a time. Both solutions
   discretize the integrating factor differently, so their gap carries an
   O(dt) bias: the sup-node gap must roughly halve per refinement, and the
   pairing 2*d(fine) - d(mid) that cancels the leading bias must sit inside
   three combined standard errors plus a second-order allowance. */
bool criterion1(std::string& detail) {
    const auto t_start = std::chrono::steady_clock::now();
    struct Set {
        double alpha, phi, c;
    };
    const std::array<Set, 3> sets{{{0.5, 1.0, 0.2}, {0.8, 0.5, 0.0}, {0.3, 2.0, 0.5}}};
    const std::array<std::size_t, 3> steps{32, 64, 128};
    const std::size_t n_paths = 10000;
    const RegressionBasis basis{};
    /* allowance for the second-order bias surviving the pairing; measured
       remainders sit near 1e-6, so this leaves two orders of headroom */
    const double kSecondOrderSlack = 2e-4;

    const std::size_t n_common = steps[0] + 1;
    std::array<std::array<std::vector<double>, 3>, 3> dmean, dse; // [set][grid]

    for (std::size_t gi = 0; gi < 3; ++gi) {
        const TimeGrid grid(1.0, steps[gi]);
        const auto noise = sample_noise(grid, n_paths, 101);
        const SingularControl xi = linear_control(grid, 0.4);
        const PathBundle pb = simulate_geometric_consumption(0.05, 0.2, 1.0, xi, noise);
        const std::size_t stride = steps[gi] / steps[0];

        for (std::size_t si = 0; si < 3; ++si) {
            const double a = sets[si].alpha, f0 = sets[si].phi, cc = sets[si].c;
            SingularDriver drv;
            drv.g = [a, f0, cc](std::size_t, std::size_t, double, double y, double u) {
                return f0 + a * y + cc * u;
            };
            drv.lip_g = a;
            drv.terminal = bounded_terminal;
            const BsdeSolution pic = picard_solve(drv, pb, basis, 1e-7, 80);

            LinearDriverSpec spec;
            spec.phi = [f0](double) { return f0; };
            spec.alpha = [a](double) { return a; };
            spec.c = [cc](double) { return cc; };
            const Eigen::VectorXd term = bounded_terminal(pb);
            const BsdeSolution ora = linear_solution(spec, term, pb, basis);

            dmean[si][gi].resize(n_common);
            dse[si][gi].resize(n_common);
            for (std::size_t k = 0; k < n_common; ++k) {
                const Eigen::Index col = static_cast<Eigen::Index>(k * stride);
                const Eigen::VectorXd diff = pic.Y.col(col) - ora.Y.col(col);
                const MeanSe ms = mean_and_se(diff);
                dmean[si][gi][k] = ms.mean;
                dse[si][gi][k] = ms.se;
            }
        }
    }

    bool ok = true;
    double ratio_lo = 1e300, ratio_hi = -1e300;
    double worst_excess = -1e300;
    for (std::size_t si = 0; si < 3; ++si) {
        std::array<double, 3> sup{};
        for (std::size_t gi = 0; gi < 3; ++gi)
            for (std::size_t k = 0; k < n_common; ++k)
                sup[gi] = std::max(sup[gi], std::abs(dmean[si][gi][k]));
        for (const double r : {sup[1] / sup[0], sup[2] / sup[1]}) {
            ratio_lo = std::min(ratio_lo, r);
            ratio_hi = std::max(ratio_hi, r);
            if (r < 0.4 || r > 0.6) ok = false;
        }
        for (std::size_t k = 0; k < n_common; ++k) {
            const double lhs = std::abs(2.0 * dmean[si][2][k] - dmean[si][1][k]);
            const double se = std::sqrt(4.0 * dse[si][2][k] * dse[si][2][k] +
                                        dse[si][1][k] * dse[si][1][k]);
            worst_excess = std::max(worst_excess, lhs - 3.0 * se);
            if (lhs >= 3.0 * se + kSecondOrderSlack) ok = false;
        }
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    if (secs >= 60.0) ok = false;

    detail = "3 coefficient sets, gap halving ratios in [" + fmt(ratio_lo) + ", " +
             fmt(ratio_hi) + "] (need [0.4, 0.6]), paired-grid residual at most 3 SE + " +
             fmt(worst_excess) + " (allow " + fmt(kSecondOrderSlack) + "), solve time " +
             fmt(secs) + "s (limit 60)";
    return ok;
}

/* Successive approximation under a declared contraction: Lipschitz constant
   of the driver in y times the control total stays below 1, the residuals
   fall strictly from the second iteration on, and 1e-4 is reached within
   15 iterations. */
bool criterion2(std::string& detail) {
    const TimeGrid grid(1.0, 64);
    const auto noise = sample_noise(grid, 4000, 202);
    const SingularControl xi = linear_control(grid, 0.6);
    const PathBundle pb = simulate_geometric_consumption(0.05, 0.2, 1.0, xi, noise);

    SingularDriver drv;
    drv.g = [](std::size_t, std::size_t, double, double y, double u) {
        return 1.0 + 0.7 * y + 0.2 * u;
    };
    drv.lip_g = 0.7;
    drv.terminal = bounded_terminal;
    const BsdeSolution sol = picard_solve(drv, pb, RegressionBasis{}, 1e-6, 40);

    const double contraction = drv.lip_g * xi.total(); // no dt driver term
    bool ok = contraction < 1.0;

    const std::vector<double>& r = sol.residuals;
    if (r.size() < 3) ok = false;
    bool monotone = true;
    for (std::size_t i = 1; i + 1 < r.size(); ++i)
        if (!(r[i + 1] < r[i])) monotone = false;
    if (!monotone) ok = false;
    std::size_t hit = 0; // first iteration (1-based) with residual below 1e-4
    for (std::size_t i = 0; i < r.size(); ++i)
        if (r[i] < 1e-4) {
            hit = i + 1;
            break;
        }
    if (hit == 0 || hit > 15) ok = false;

    const ContractionReport rep = contraction_diagnostics(r);
    detail = "declared contraction constant " + fmt(contraction) +
             " < 1, residuals strictly decreasing from iteration 2: " +
             (monotone ? std::string("yes") : std::string("no")) + ", below 1e-4 at iteration " +
             std::to_string(hit) + " (limit 15), fitted geometric rate " +
             fmt(rep.geometric_rate);
    return ok;
}

/* The compensated process built from the affine solution has martingale
   increments: every node-wise mean must vanish up to sampling error plus a
   first-order discretization allowance proportional to the largest clock
   integrand. */
bool criterion3(std::string& detail) {
    const TimeGrid grid(1.0, 128);
    const auto noise = sample_noise(grid, 20000, 303);
    const SingularControl xi = linear_control(grid, 0.4);
    const PathBundle pb = simulate_geometric_consumption(0.05, 0.2, 1.0, xi, noise);

    LinearDriverSpec spec;
    spec.phi = [](double) { return 1.0; };
    spec.alpha = [](double) { return 0.5; };
    spec.c = [](double) { return 0.2; };
    const Eigen::VectorXd term = bounded_terminal(pb);
    const BsdeSolution ora = linear_solution(spec, term, pb, RegressionBasis{});
    const GammaPath gamma = gamma_process(spec.alpha, xi, grid);
    const MartingaleReport rep = martingale_check(gamma, ora.Y, spec, pb);

    double integrand_bound = 0.0; // sup over nodes of |Gamma (phi + c xi) dxi/dt|
    for (std::size_t i = 0; i < grid.n_steps(); ++i) {
        const double rate = (xi.values[i + 1] - xi.values[i]) / grid.dt();
        integrand_bound = std::max(
            integrand_bound, std::abs(gamma.values[i] * (1.0 + 0.2 * xi.values[i]) * rate));
    }
    const double gate =
        3.0 * rep.increment_se[rep.argmax_node] + 2.0 * grid.dt() * integrand_bound;
    const bool ok = rep.max_abs_mean < gate;
    detail = "largest |mean increment| " + fmt(rep.max_abs_mean) + " at node " +
             std::to_string(rep.argmax_node) + ", gate 3 SE + 2 dt B = " + fmt(gate) +
             " with integrand bound B = " + fmt(integrand_bound);
    return ok;
}

/* Driverless equation with terminal X(T) under geometric dynamics: the
   volatility readout must track sigma0 X(t) exp(b0 (T - t)), whose ensemble
   mean is constant in t. Compared mean against mean on the same draw for
   every node up to t = 0.9 T. */
bool criterion4(std::string& detail) {
    const TimeGrid grid(1.0, 128);
    const std::size_t n_paths = 100000;
    const auto noise = sample_noise(grid, n_paths, 404);
    const SingularControl xi = zero_control(grid);
    const PathBundle pb = simulate_geometric_consumption(0.05, 0.2, 1.0, xi, noise);

    SingularDriver drv;
    drv.g = [](std::size_t, std::size_t, double, double, double) { return 0.0; };
    drv.terminal = [](const PathBundle& b) {
        return Eigen::VectorXd(b.X.col(b.X.cols() - 1));
    };
    const BsdeSolution sol = picard_solve(drv, pb, RegressionBasis{}, 1e-7, 50);
    const Eigen::MatrixXd Z = extract_Z(sol.Y, pb, RegressionBasis{});

    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < grid.n_steps(); ++i) {
        const double t = grid.node(i);
        if (t > 0.9 * grid.horizon() + 1e-12) break;
        const double ref =
            (0.2 * pb.X.col(static_cast<Eigen::Index>(i)) *
             std::exp(0.05 * (grid.horizon() - t)))
                .mean();
        const double got = Z.col(static_cast<Eigen::Index>(i)).mean();
        worst = std::max(worst, std::abs(got - ref) / std::abs(ref));
        ++checked;
    }
    const bool ok = worst < 0.05;
    detail = "relative error of mean volatility readout at most " + fmt(worst) +
             " over " + std::to_string(checked) + " nodes up to t = 0.9 T (limit 0.05), " +
             std::to_string(n_paths) + " paths";
    return ok;
}

/* Minimal reflection against an exhaustive quadratic-time reference on 1000
   random 64-node paths: bitwise equality of the regulator and the reflected
   path, monotonicity, and attainment (every positive regulator level is
   forced by some prefix node hitting zero exactly). */
bool criterion5(std::string& detail) {
    const TimeGrid grid(1.0, 63);
    std::mt19937_64 rng(777);
    std::normal_distribution<double> step(-0.02, 0.25);
    std::uniform_real_distribution<double> start(-0.5, 0.5);

    std::size_t bad_trials = 0;
    const std::size_t n_trials = 1000;
    for (std::size_t trial = 0; trial < n_trials; ++trial) {
        std::vector<double> fp(grid.n_nodes());
        fp[0] = start(rng);
        for (std::size_t i = 1; i < fp.size(); ++i) fp[i] = fp[i - 1] + step(rng);

        const ReflectionOutput out = skorohod_map(fp, grid);
        bool good = validate_control(out.xi, grid).ok;
        double prev = 0.0;
        for (std::size_t i = 0; i < fp.size() && good; ++i) {
            double m = 0.0;
            for (std::size_t j = 0; j <= i; ++j) m = std::max(m, -fp[j]);
            if (out.xi.values[i] != m) good = false;
            if (out.reflected[i] != fp[i] + m) good = false;
            if (m < prev) good = false;
            if (m > 0.0) {
                bool attained = false;
                for (std::size_t j = 0; j <= i; ++j)
                    if (fp[j] + m == 0.0) attained = true;
                if (!attained) good = false;
            }
            prev = m;
        }
        if (!good) ++bad_trials;
    }
    const bool ok = bad_trials == 0;
    detail = std::to_string(n_trials - bad_trials) + " of " + std::to_string(n_trials) +
             " random 64-node paths bitwise-identical to the quadratic reference with "
             "minimality attained";
    return ok;
}

/* Consumption scenario at full scale through the CLI. A clean exit must
   come with small barrier excess and complementarity residual; a declared
   non-convergence (exit 3) is acceptable only when the report says so
   explicitly and the zero-weight variant of the same scenario recovers the
   all-zero control exactly. */
bool criterion6(std::string& detail) {
    const std::string cfg = g_scratch + "/consumption_full.json";
    const std::string out = g_scratch + "/consumption_full";
    spit(cfg, R"({
  "grid": {"horizon": 1.0, "n_steps": 256},
  "paths": 10000,
  "seed": 1,
  "model": {"kind": "geometric", "x0": 2.0, "b0": 0.05, "sigma0": 0.2},
  "driver": {"kind": "consumption", "alpha": 0.4},
  "control": {"kind": "solve"},
  "tasks": ["reflection"]
}
)");
    const int rc = run_cli("run " + cfg + " --out " + out, "consumption_full.log");

    if (rc == 0) {
        const json rep = json::parse(slurp(out + "/report.json"));
        const double me = rep.at("summary").at("vi").at("max_excess").get<double>();
        const double cr =
            rep.at("summary").at("vi").at("complementarity_residual").get<double>();
        const bool ok = me < 5e-2 && cr < 5e-2;
        detail = "candidate established: barrier excess " + fmt(me) +
                 ", complementarity residual " + fmt(cr) + " (both < 0.05 required)";
        return ok;
    }
    if (rc != 3) {
        detail = "unexpected exit code " + std::to_string(rc) + ", see consumption_full.log";
        return false;
    }

    const json rep = json::parse(slurp(out + "/report.json"));
    bool ok = rep.at("exit_code").get<int>() == 3;
    if (rep.at("summary").at("reflection").at("converged").get<bool>()) ok = false;
    const std::string msg = rep.at("message").get<std::string>();
    if (msg.find("not established") == std::string::npos) ok = false;
    const std::vector<std::string> upd = csv_column(out + "/sweeps.csv", "update_norm_exact");
    const std::string last_update = upd.empty() ? std::string("?") : upd.back();

    const std::string cfg0 = g_scratch + "/consumption_zero_weight.json";
    const std::string out0 = g_scratch + "/consumption_zero_weight";
    spit(cfg0, R"({
  "grid": {"horizon": 1.0, "n_steps": 256},
  "paths": 10000,
  "seed": 1,
  "model": {"kind": "geometric", "x0": 2.0, "b0": 0.05, "sigma0": 0.2},
  "driver": {"kind": "consumption", "alpha": 0.0},
  "control": {"kind": "solve"},
  "tasks": ["reflection"]
}
)");
    const int rc0 = run_cli("run " + cfg0 + " --out " + out0, "consumption_zero_weight.log");
    if (rc0 != 0) {
        ok = false;
    } else {
        const std::vector<std::string> xi = csv_column(out0 + "/nodes.csv", "xi_exact");
        if (xi.size() != 257) ok = false;
        for (const std::string& v : xi)
            if (v != "0") ok = false;
    }
    detail = std::string("candidate not established at this scale, reported honestly ") +
             "(exit 3, message flags it, last update norm " + last_update +
             "); zero-weight variant exits 0 with the exact all-zero control";
    return ok;
}

/* Derivative battery at the solved candidate through the CLI (no admissible
   variation may have a derivative significantly above zero), plus a
   noise-free instance where the derivative has an exact integral form and
   the numeric quotient must match it to 0.1%. */
bool criterion7(std::string& detail) {
    const std::string cfg = g_scratch + "/battery_scenario.json";
    const std::string out = g_scratch + "/battery_scenario";
    spit(cfg, R"({
  "grid": {"horizon": 1.0, "n_steps": 64},
  "paths": 4000,
  "seed": 1,
  "model": {"kind": "geometric", "x0": 1.3, "b0": 0.05, "sigma0": 0.2},
  "driver": {"kind": "consumption", "alpha": 0.4},
  "control": {"kind": "solve"},
  "tasks": ["reflection", "battery"]
}
)");
    const int rc = run_cli("run " + cfg + " --out " + out, "battery_scenario.log");
    bool ok = rc == 0;
    double worst = -1e300; // max over admissible variations of numeric - 3 SE
    std::size_t n_admissible = 0;
    if (rc == 0) {
        const std::vector<std::string> adm = csv_column(out + "/battery.csv", "admissible_exact");
        const std::vector<double> num = csv_numbers(out + "/battery.csv", "numeric");
        const std::vector<double> se = csv_numbers(out + "/battery.csv", "numeric_se");
        for (std::size_t i = 0; i < adm.size(); ++i) {
            if (adm[i] == "0") continue;
            ++n_admissible;
            worst = std::max(worst, num[i] - 3.0 * se[i]);
        }
        if (n_admissible == 0 || worst > 0.0) ok = false;
    }

    // Noise-free half: geometric state, consumption driver, ramp candidate.
    const TimeGrid grid(1.0, 512);
    const auto noise = sample_noise(grid, 16, 9);
    const double b0 = 0.05, alpha = 0.4, x0 = 2.0;

    SingularDriver drv;
    drv.g = [alpha](std::size_t, std::size_t, double, double y, double) { return alpha * y; };
    drv.lip_g = alpha;
    drv.terminal = bounded_terminal;

    const auto objective = [&](const SingularControl& xi) {
        const PathBundle b = simulate_geometric_consumption(b0, 0.0, x0, xi, noise);
        const BsdeSolution sol = picard_solve(drv, b, RegressionBasis{}, 1e-12, 400);
        ObjectiveEvaluation ev;
        ev.per_path = sol.Y.col(0);
        ev.y0 = ev.per_path.mean();
        ev.value = ev.y0;
        return ev;
    };

    const SingularControl xi_hat = linear_control(grid, 0.1);
    std::vector<double> beta(grid.n_nodes());
    for (std::size_t i = 0; i < beta.size(); ++i) beta[i] = grid.node(i);

    const ConsumptionModel model = make_consumption_model(x0, b0, 0.0, alpha);
    const ControlProblemSpec spec = consumption_control_problem(model);
    const PathBundle paths = simulate_geometric_consumption(b0, 0.0, x0, xi_hat, noise);
    const BsdeSolution sol = picard_solve(drv, paths, RegressionBasis{}, 1e-12, 400);
    const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(sol.Y.rows(), sol.Y.cols());
    const Eigen::MatrixXd lambda = simulate_lambda(spec, paths, sol.Y, Z);
    AdjointSettings adj_settings;
    adj_settings.tol = 1e-12;
    adj_settings.max_iter = 400;
    const AdjointSolution adj =
        solve_adjoint_p(spec, paths, sol.Y, lambda, RegressionBasis{}, adj_settings);
    AnalyticGateauxInputs inputs{&spec, &paths, &sol.Y, &lambda, &adj.p};
    const GateauxResult der = gateaux_derivative(objective, xi_hat, beta, {2e-3, 1e-3}, &inputs);
    const double rel =
        std::abs(der.numeric - der.analytic) / std::max(1e-12, std::abs(der.analytic));
    if (rel >= 1e-3) ok = false;

    detail = "battery exit " + std::to_string(rc) + ", " + std::to_string(n_admissible) +
             " admissible variations with max (numeric - 3 SE) = " + fmt(worst) +
             "; noise-free quotient " + fmt(der.numeric) + " vs integral form " +
             fmt(der.analytic) + ", relative gap " + fmt(rel) + " (limit 1e-3)";
    return ok;
}

/* Tiny noise-free consumption instance with a linear payoff where every
   candidate value has a closed recursion: the solved control must match the
   best control on a full monotone lattice to 1e-3 in value. */
bool criterion8(std::string& detail) {
    const TimeGrid grid(1.0, 4);
    const auto noise = sample_noise(grid, 16, 15);
    ConsumptionModel model = make_consumption_model(2.0, 0.05, 0.0, 0.4);
    model.h = [](double x) { return x; };
    model.h_x = [](double) { return 1.0; };
    const ReflectionSolveResult res = solve_reflection_fixed_point(model, grid, noise);

    /* exact value of a deterministic continuous candidate: the state is
       x0 exp(b0 t - xi(t)) pathwise and each increment compounds the value
       through the implicit left-point step */
    const auto value_of = [](const std::array<double, 5>& v) {
        double y = 2.0 * std::exp(0.05 - v[4]);
        for (int i = 3; i >= 0; --i) y /= 1.0 - 0.4 * (v[i + 1] - v[i]);
        return y;
    };

    const std::array<double, 5> lv{0.0, 0.25, 0.5, 0.75, 1.0};
    double best = -1e300;
    std::size_t n_profiles = 0;
    for (std::size_t a = 0; a < 5; ++a)
        for (std::size_t b = a; b < 5; ++b)
            for (std::size_t c = b; c < 5; ++c)
                for (std::size_t d = c; d < 5; ++d) {
                    const std::array<double, 5> v{0.0, lv[a], lv[b], lv[c], lv[d]};
                    best = std::max(best, value_of(v));
                    ++n_profiles;
                }

    std::array<double, 5> vhat{};
    for (std::size_t i = 0; i < 5; ++i) vhat[i] = res.xi.values[i];
    const double got = value_of(vhat);
    const double gap = std::abs(got - best);
    const bool ok = res.trace.converged && gap <= 1e-3;
    detail = "solved control value " + fmt(got) + " vs best of " +
             std::to_string(n_profiles) + " lattice profiles " + fmt(best) + ", gap " +
             fmt(gap) + " (limit 1e-3), converged in " +
             std::to_string(res.trace.sweeps.size()) + " sweeps";
    return ok;
}

/* Reproducibility through the CLI: repeated runs and different thread counts
   must produce byte-identical tables, for a single scenario and for a
   refinement sweep. */
bool criterion9(std::string& detail) {
    const std::string cfg = g_scratch + "/repeat.json";
    spit(cfg, R"({
  "grid": {"horizon": 1.0, "n_steps": 32},
  "paths": 2000,
  "seed": 1,
  "model": {"kind": "geometric", "x0": 2.0, "b0": 0.05, "sigma0": 0.2},
  "driver": {"kind": "consumption", "alpha": 0.4},
  "control": {"kind": "linear", "rate": 0.3},
  "tasks": ["forward", "bsde", "adjoint", "vi"]
}
)");
    const std::string out_a = g_scratch + "/repeat_a";
    const std::string out_b = g_scratch + "/repeat_b";
    const std::string out_c = g_scratch + "/repeat_c";
    const int r1 = run_cli("run " + cfg + " --threads 1 --out " + out_a, "repeat_a.log");
    const int r2 = run_cli("run " + cfg + " --threads 1 --out " + out_b, "repeat_b.log");
    const int r3 = run_cli("run " + cfg + " --threads 4 --out " + out_c, "repeat_c.log");
    bool ok = r1 == 0 && r2 == 0 && r3 == 0;

    bool nodes_equal = false, residuals_equal = false;
    if (ok) {
        const std::string na = slurp(out_a + "/nodes.csv");
        nodes_equal = na == slurp(out_b + "/nodes.csv") && na == slurp(out_c + "/nodes.csv");
        const std::string ra = slurp(out_a + "/residuals.csv");
        residuals_equal =
            ra == slurp(out_b + "/residuals.csv") && ra == slurp(out_c + "/residuals.csv");
        if (!nodes_equal || !residuals_equal) ok = false;
    }

    const std::string conv_a = g_scratch + "/sweep_a";
    const std::string conv_b = g_scratch + "/sweep_b";
    const int c1 = run_cli("converge " + cfg + " --axis grid --levels 8,16 --threads 1 --out " +
                               conv_a,
                           "sweep_a.log");
    const int c2 = run_cli("converge " + cfg + " --axis grid --levels 8,16 --threads 4 --out " +
                               conv_b,
                           "sweep_b.log");
    bool levels_equal = false;
    if (c1 == 0 && c2 == 0)
        levels_equal = slurp(conv_a + "/levels.csv") == slurp(conv_b + "/levels.csv");
    else
        ok = false;
    if (!levels_equal) ok = false;

    detail = std::string("node and residual tables byte-identical across reruns and ") +
             "1 vs 4 threads: " + (nodes_equal && residuals_equal ? "yes" : "no") +
             "; refinement table byte-identical across thread counts: " +
             (levels_equal ? "yes" : "no");
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: %s <cli_binary> <scratch_dir> [criteria]\n", argv[0]);
        return 64;
    }
    g_cli = argv[1];
    g_scratch = argv[2];
    std::filesystem::create_directories(g_scratch);

    std::vector<int> wanted;
    if (argc > 3) {
        std::stringstream ss(argv[3]);
        std::string tok;
        while (std::getline(ss, tok, ',')) wanted.push_back(std::stoi(tok));
    } else {
        for (int i = 1; i <= 9; ++i) wanted.push_back(i);
    }

    struct Entry {
        int id;
        bool (*fn)(std::string&);
    };
    const Entry entries[] = {{1, criterion1}, {2, criterion2}, {3, criterion3},
                             {4, criterion4}, {5, criterion5}, {6, criterion6},
                             {7, criterion7}, {8, criterion8}, {9, criterion9}};

    int failures = 0;
    for (const Entry& e : entries) {
        if (std::find(wanted.begin(), wanted.end(), e.id) == wanted.end()) continue;
        bool ok = false;
        std::string detail;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            ok = e.fn(detail);
        } catch (const std::exception& ex) {
            detail = std::string("exception: ") + ex.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d: %s - %s [%.1fs]\n", e.id, ok ? "PASS" : "FAIL",
                    detail.c_str(), secs);
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures;
}
