// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "qmask/checks.hpp"
#include "qmask/cli.hpp"
#include "qmask/harness.hpp"

using namespace qmask;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

Verdict dephasing_closed_form_agreement() {
    const auto t0 = Clock::now();
    double worst = 0;
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(0.1 * i);
    for (double q : {0.1, 0.3, 0.5}) {
        for (auto [e0, e1] : {std::pair{0.0, 1.0}, std::pair{0.1, 0.8}}) {
            const DephasingSpec spec{q, e0, e1};
            const MaskingInstance inst(dephasing_channel(spec));
            const auto cf = dephasing_closed_form(spec, grid);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const auto r0 = eval_ea_point(inst, dephasing_r0_candidate(spec, grid[i]), true);
                const auto r1 = eval_ea_point(inst, dephasing_r1_candidate(spec, grid[i]), true);
                worst = std::max({worst, std::abs(r0.rate - cf.r0[i].rate), std::abs(r0.leakage - cf.r0[i].leakage),
                                  std::abs(r1.rate - cf.r1[i].rate), std::abs(r1.leakage - cf.r1[i].leakage)});
            }
        }
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-9 && t < 10, "max deviation " + sci(worst) + ", " + sci(t) + " s"};
}

Verdict controlled_z_region() {
    const auto t0 = Clock::now();
    const CodeReport r = controlled_z_code({0.5, 0.0, 1.0});
    const double t = seconds_since(t0);
    bool all = r.messages.size() == 4;
    for (const auto& m : r.messages) all = all && m.error <= 1e-9;
    const bool rate_ok = std::abs(r.Q - 2.0) < 1e-12;
    return {all && r.leakage <= 1e-9 && rate_ok && t < 5,
            "error " + sci(r.error) + ", leakage " + sci(r.leakage) + ", R " + sci(r.Q) + ", " + sci(t) + " s"};
}

Verdict erasure_capacities() {
    const auto t0 = Clock::now();
    auto run = [](double eps, RegionObjective obj) {
        OptimizeRequest req;
        req.objective = obj;
        req.family = CandidateFamily::product;
        req.budget.seed = 3;
        return optimize_region(MaskingInstance(without_state(erasure_channel(eps))), req).points.at(0).rate;
    };
    double worst = 0;
    std::ostringstream os;
    for (double eps : {0.1, 0.25, 0.4}) {
        const double ea = run(eps, RegionObjective::ea_quantum);
        const double un = run(eps, RegionObjective::unassisted_inner);
        worst = std::max({worst, std::abs(ea - (1 - eps)), std::abs(un - (1 - 2 * eps))});
        os << "eps " << eps << ": EA " << sci(ea) << " unassisted " << sci(un) << "; ";
    }
    const double un6 = run(0.6, RegionObjective::unassisted_inner);
    worst = std::max(worst, std::abs(un6));
    const double t = seconds_since(t0);
    os << "eps 0.6 unassisted " << sci(un6) << "; max deviation " << sci(worst) << ", " << sci(t) << " s";
    return {worst <= 5e-3 && t < 120, os.str()};
}

Verdict maximally_entangled_baselines() {
    double worst = 0;
    for (std::size_t d : {2u, 3u, 4u}) {
        const DensityOperator phi = maximally_entangled(d).density();
        const double ld = std::log2(static_cast<double>(d));
        worst = std::max({worst, std::abs(mutual_information(phi, {lbl::A}, {lbl::B}) - 2 * ld),
                          std::abs(coherent_information(phi, {lbl::A}, {lbl::B}) - ld)});
    }
    return {worst <= 1e-10, "max deviation " + sci(worst)};
}

Verdict decoupling_monte_carlo() {
    const auto t0 = Clock::now();
    struct Config {
        std::size_t ds, dg;
    };
    const Config configs[] = {{1, 4}, {1, 1}, {2, 2}, {4, 1}};
    std::size_t checked = 0, failed = 0;
    std::ostringstream os;
    for (const auto& c : configs) {
        DecouplingConfig cfg;
        cfg.omega = flat_omega();
        cfg.dim_s = c.ds;
        cfg.dim_g = c.dg;
        cfg.blocklengths = {1, 2, 3};
        cfg.samples = 200;
        cfg.seed = 5;
        const auto rep = run_iid_decoupling(cfg);
        for (const auto& row : rep.rows) {
            const bool any = !row.vacuous || !row.vacuous_g;
            if (!any) continue;
            ++checked;
            const bool ok = (row.vacuous || row.pass) && (row.vacuous_g || row.pass_g);
            if (!ok) {
                ++failed;
                os << "fail |S|=" << c.ds << " |G|=" << c.dg << " n=" << row.n << " mean " << sci(row.mean) << "/"
                   << sci(row.bound) << "; ";
            }
        }
    }
    const double t = seconds_since(t0);
    os << checked << " non-vacuous configurations, " << failed << " failed, " << sci(t) << " s";
    return {checked >= 6 && failed == 0 && t < 300, os.str()};
}

Verdict op_identities() {
    const auto a = op_swap_trials(100, 6), b = op_transfer_trials(100, 6);
    return {a.worst <= 1e-10 && b.worst <= 1e-10, "swap " + sci(a.worst) + ", transfer " + sci(b.worst)};
}

Verdict min_entropy_bounds() {
    const auto br = min_entropy_bracket_trials(200, 7);
    double sat = 0;
    const MinEntropyOptions opt{4, 1, 3000};
    for (std::size_t d : {2u, 3u}) {
        const double ld = std::log2(static_cast<double>(d));
        sat = std::max(sat, std::abs(min_entropy(maximally_entangled(d).density(), {lbl::B}, opt).value + ld));
        const auto mixed = DensityOperator::maximally_mixed(SubsystemShape({lbl::A, lbl::B}, {d, 3}));
        sat = std::max(sat, std::abs(min_entropy(mixed, {lbl::B}, opt).value - ld));
    }
    return {br.worst <= 1e-9 && sat <= 1e-9, "bracket excess " + sci(br.worst) + ", saturation " + sci(sat)};
}

Verdict csiszar() {
    // With two letters the identity reduces to I(A_2;B_1) on both sides, so
    // three letters are run as well.
    const auto two = csiszar_trials(100, 8, 2), three = csiszar_trials(100, 8, 3);
    return {two.worst <= 1e-9 && three.worst <= 1e-9,
            "residual n=2 " + sci(two.worst) + ", n=3 " + sci(three.worst)};
}

Verdict hadamard_structure() {
    Rng rng(mix_seed(9, 0));
    std::vector<HadamardSpec> specs;
    specs.push_back(random_hadamard_spec(2, 2, 2, 2, 4, rng));
    specs.push_back(random_hadamard_spec(1, 2, 2, 3, 3, rng));
    specs.push_back(random_hadamard_spec(2, 2, 1, 2, 5, rng));
    specs.push_back(dephasing_hadamard_spec(0.2));
    double worst_l = 0, worst_d = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        worst_l = std::max(worst_l, hadamard_L_trials(specs[i], 50, 100 + i).worst);
        worst_d = std::max(worst_d, hadamard_degrader_trials(specs[i], 50, 200 + i).worst);
    }
    const auto id = pure_candidate_identity_trials(50, 9);
    const bool pass = worst_l <= 1e-8 && worst_d <= 1e-9 && id.worst <= 1e-9;
    return {pass, "L-map residual " + sci(worst_l) + " (tol 1e-8), degrader " + sci(worst_d) +
                      ", pure-candidate identity " + sci(id.worst)};
}

Verdict uhlmann() {
    const auto a = uhlmann_trials(50, 10), b = uhlmann_equal_marginal_trials(50, 10);
    return {a.worst <= 1e-9 && b.worst <= 1e-8,
            "worst excess over bound " + sci(a.worst) + ", equal-marginal distance " + sci(b.worst)};
}

Verdict determinism() {
    cli::RunOptions opt;
    opt.write = false;
    std::size_t runs = 0;
    std::string bad;
    for (const auto& e : cli::catalog()) {
        if (!e.manifest.contains("seed")) continue;
        const auto a = cli::run_manifest_json(e.manifest, opt), b = cli::run_manifest_json(e.manifest, opt);
        ++runs;
        if (a.exit_code != cli::kOk || a.csv != b.csv) bad += e.name + " ";
    }
    return {bad.empty() && runs > 0, std::to_string(runs) + " seeded manifests rerun" +
                                         (bad.empty() ? std::string() : ", differing: " + bad)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"dephasing closed-form agreement", dephasing_closed_form_agreement},
        {"controlled-Z region", controlled_z_region},
        {"erasure capacities", erasure_capacities},
        {"maximally entangled baselines", maximally_entangled_baselines},
        {"decoupling Monte Carlo", decoupling_monte_carlo},
        {"op operator identities", op_identities},
        {"min-entropy bounds", min_entropy_bounds},
        {"Csiszar sum identity", csiszar},
        {"Hadamard structure", hadamard_structure},
        {"Uhlmann recovery", uhlmann},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        if (!v.pass) ++failures;
        std::printf("%s %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
