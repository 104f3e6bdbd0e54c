// Experiment driver: estimate active subspaces, run vanilla or
// subspace-accelerated chains, reconstruct full-space samples, and compute
// chain diagnostics. All outputs are CSV/JSON and deterministic given the
// config and seeds. Exit status: 0 success, 2 config error, 3 numerical
// failure.

#include "asmcmc/diagnostics.hpp"
#include "asmcmc/errors.hpp"
#include "asmcmc/io.hpp"
#include "asmcmc/posterior.hpp"
#include "asmcmc/problems.hpp"
#include "asmcmc/quadrature.hpp"
#include "asmcmc/sampler.hpp"
#include "asmcmc/subspace.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace asmcmc;

namespace {

// Config parsing -------------------------------------------------------------

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!obj.is_object()) throw config_error(ctx + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key)) throw config_error(ctx + ": unknown key '" + key + "'");
    }
}

const json& require(const json& obj, const std::string& key, const std::string& ctx) {
    if (!obj.contains(key)) throw config_error(ctx + ": missing field '" + key + "'");
    return obj.at(key);
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    return obj.at(key).get<T>();
}

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config: " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const std::exception& e) {
        throw config_error(std::string("config parse error: ") + e.what());
    }
    check_keys(cfg, {"problem", "subspace", "surrogate", "sampler", "cov_study", "hellinger",
                     "output_dir"},
               "config");
    return cfg;
}

struct ProblemHandle {
    std::unique_ptr<BayesProblem> problem;
    std::string id;
};

ProblemHandle make_problem(const json& cfg) {
    const json& p = require(cfg, "problem", "config");
    const std::string name = require(p, "name", "problem").get<std::string>();
    ProblemHandle h;
    if (name == "quadratic") {
        check_keys(p, {"name", "eps", "data", "noise_var"}, "problem");
        const double eps = require(p, "eps", "problem").get<double>();
        const double d = get_or(p, "data", 0.9);
        const double s2 = get_or(p, "noise_var", 0.1);
        h.problem = std::make_unique<QuadraticProblem>(eps, d, s2);
        h.id = "quadratic(eps=" + format_double(eps) + ",d=" + format_double(d) +
               ",noise_var=" + format_double(s2) + ")";
    } else if (name == "linear_gaussian") {
        check_keys(p, {"name", "rows", "cols", "seed", "noise_var", "matrix_csv", "data_csv"},
                   "problem");
        const double s2 = get_or(p, "noise_var", 0.1);
        Matrix m;
        Vec d;
        std::string stamp;
        if (p.contains("matrix_csv")) {
            m = read_csv_matrix(p.at("matrix_csv").get<std::string>());
            d = read_csv_vector(require(p, "data_csv", "problem").get<std::string>());
            stamp = "file";
        } else {
            const auto rows = require(p, "rows", "problem").get<std::size_t>();
            const auto cols = require(p, "cols", "problem").get<std::size_t>();
            const auto seed = get_or<std::uint64_t>(p, "seed", 0);
            Rng rng(derive_seed(seed, 0x6c696eULL));
            m = Matrix(rows, cols);
            for (auto& v : m.raw()) v = rng.gaussian();
            d = rng.gaussian_vector(rows);
            stamp = "seed=" + std::to_string(seed);
        }
        h.problem = std::make_unique<LinearGaussianProblem>(std::move(m), std::move(d), s2);
        h.id = "linear_gaussian(" + stamp + ")";
    } else if (name == "poisson_kl") {
        check_keys(p, {"name", "grid_n", "m_kl", "beta", "seed", "data_csv", "noise_var"},
                   "problem");
        const auto grid_n = get_or<std::size_t>(p, "grid_n", 32);
        const auto m_kl = get_or<std::size_t>(p, "m_kl", 20);
        const double beta = get_or(p, "beta", 0.02);
        const auto seed = get_or<std::uint64_t>(p, "seed", 0);
        h.problem = std::make_unique<PoissonKLProblem>(grid_n, m_kl, beta, seed);
        if (p.contains("data_csv")) {
            // measured data replaces the synthetic draw
            const Vec d = read_csv_vector(p.at("data_csv").get<std::string>());
            const double nv = get_or(p, "noise_var", h.problem->noise_var());
            h.problem->set_data(d, nv);
        }
        h.id = "poisson_kl(grid_n=" + std::to_string(grid_n) + ",m_kl=" + std::to_string(m_kl) +
               ",beta=" + format_double(beta) + ",seed=" + std::to_string(seed) + ")";
    } else {
        throw config_error("problem: unknown name '" + name + "'");
    }
    return h;
}

struct SubspaceConfig {
    std::string method = "monte_carlo";
    std::size_t n_samples = 300;
    std::uint64_t seed = 0;
    std::size_t points_per_dim = 50;
    std::size_t n = 0; // 0 = use flagged gap
    std::size_t bootstrap = 100;
};

SubspaceConfig parse_subspace(const json& cfg) {
    SubspaceConfig s;
    if (!cfg.contains("subspace")) return s;
    const json& j = cfg.at("subspace");
    check_keys(j, {"method", "n_samples", "seed", "points_per_dim", "n", "bootstrap"},
               "subspace");
    s.method = get_or<std::string>(j, "method", "monte_carlo");
    if (s.method != "monte_carlo" && s.method != "quadrature")
        throw config_error("subspace: method must be monte_carlo or quadrature");
    s.n_samples = get_or<std::size_t>(j, "n_samples", 300);
    s.seed = get_or<std::uint64_t>(j, "seed", 0);
    s.points_per_dim = get_or<std::size_t>(j, "points_per_dim", 50);
    s.n = get_or<std::size_t>(j, "n", 0);
    s.bootstrap = get_or<std::size_t>(j, "bootstrap", 100);
    return s;
}

struct SurrogateConfig {
    std::string rule = "auto"; // auto: gauss_hermite when one inactive variable
    std::size_t inner_m = 10;
    std::size_t points = 10;
};

SurrogateConfig parse_surrogate(const json& cfg) {
    SurrogateConfig s;
    if (!cfg.contains("surrogate")) return s;
    const json& j = cfg.at("surrogate");
    check_keys(j, {"rule", "M", "points"}, "surrogate");
    s.rule = get_or<std::string>(j, "rule", "auto");
    if (s.rule != "auto" && s.rule != "monte_carlo" && s.rule != "gauss_hermite")
        throw config_error("surrogate: rule must be auto, monte_carlo or gauss_hermite");
    s.inner_m = get_or<std::size_t>(j, "M", 10);
    s.points = get_or<std::size_t>(j, "points", 10);
    return s;
}

struct SamplerConfig {
    std::string variant = "vanilla";
    std::size_t steps = 1000;
    double proposal_var = 0.1;
    std::uint64_t seed = 0;
    std::size_t burn_in = 0;
};

SamplerConfig parse_sampler(const json& cfg) {
    SamplerConfig s;
    if (!cfg.contains("sampler")) return s;
    const json& j = cfg.at("sampler");
    check_keys(j, {"variant", "steps", "proposal_var", "seed", "burn_in"}, "sampler");
    s.variant = get_or<std::string>(j, "variant", "vanilla");
    if (s.variant != "vanilla" && s.variant != "as")
        throw config_error("sampler: variant must be vanilla or as");
    s.steps = get_or<std::size_t>(j, "steps", 1000);
    s.proposal_var = get_or(j, "proposal_var", 0.1);
    s.seed = get_or<std::uint64_t>(j, "seed", 0);
    s.burn_in = get_or<std::size_t>(j, "burn_in", 0);
    return s;
}

std::string out_dir(const json& cfg, const std::string& override_dir) {
    std::string dir = override_dir;
    if (dir.empty()) dir = get_or<std::string>(cfg, "output_dir", "");
    if (dir.empty()) throw config_error("config: missing field 'output_dir'");
    fs::create_directories(dir);
    return dir;
}

// estimate-subspace -----------------------------------------------------------

int cmd_estimate_subspace(const std::string& config_path, const std::string& dir_override,
                          bool force, std::size_t lanes) {
    const json cfg = load_config(config_path);
    const ProblemHandle ph = make_problem(cfg);
    const SubspaceConfig sc = parse_subspace(cfg);
    const std::string dir = out_dir(cfg, dir_override);
    const std::size_t m = ph.problem->dim();

    for (const char* f : {"eigenvalues.csv", "W.csv", "C.csv", "subspace.json"})
        refuse_overwrite(dir + "/" + f, force);

    CMatrix c;
    GradientSampleSet samples;
    bool have_samples = false;
    const GradientFn grad = [&](const Vec& x) { return misfit_gradient(*ph.problem, x); };
    if (sc.method == "monte_carlo") {
        Rng rng(sc.seed);
        auto [cm, set] = estimate_c_monte_carlo(
            grad, [m](Rng& r) { return r.gaussian_vector(m); }, sc.n_samples, rng, lanes);
        c = std::move(cm);
        samples = std::move(set);
        have_samples = true;
    } else {
        c = estimate_c_quadrature(grad, m, sc.points_per_dim);
    }

    const ActiveSubspace spectrum = eigendecompose(c);
    const GapReport gaps = gap_report(spectrum.eigenvalues);

    write_csv_matrix(dir + "/C.csv", c.entries);
    write_csv_matrix(dir + "/W.csv", spectrum.eigenvectors);
    write_csv_vector(dir + "/eigenvalues.csv", spectrum.eigenvalues, "lambda");
    {
        Matrix g(gaps.absolute.size(), 3);
        for (std::size_t i = 0; i < gaps.absolute.size(); ++i) {
            g(i, 0) = static_cast<double>(i + 1);
            g(i, 1) = gaps.absolute[i];
            g(i, 2) = gaps.ratio[i];
        }
        write_csv_matrix(dir + "/gaps.csv", g, {"n", "gap", "ratio"});
    }

    json meta;
    meta["problem"] = ph.id;
    meta["subspace"] = json::parse(subspace_to_json(spectrum, c.provenance));
    meta["flagged_n"] = gaps.flagged_n;

    if (have_samples) {
        write_csv_matrix(dir + "/gradients.csv", samples.samples);
        write_csv_matrix(dir + "/prior_points.csv", samples.prior_points);
        std::vector<std::size_t> candidates;
        for (std::size_t n = 1; n < m && n <= 10; ++n) candidates.push_back(n);
        Rng boot_rng(derive_seed(sc.seed, 0x62ULL));
        const SubspaceErrorEstimate est =
            bootstrap_subspace_error(samples, candidates, sc.bootstrap, boot_rng, lanes);
        Matrix rows(candidates.size(), 3);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            rows(i, 0) = static_cast<double>(candidates[i]);
            rows(i, 1) = est.mean[i];
            rows(i, 2) = est.max[i];
        }
        write_csv_matrix(dir + "/bootstrap.csv", rows, {"n", "mean_distance", "max_distance"});
        Matrix reps(est.distances.front().size(), candidates.size());
        for (std::size_t i = 0; i < candidates.size(); ++i)
            for (std::size_t r = 0; r < est.distances[i].size(); ++r)
                reps(r, i) = est.distances[i][r];
        write_csv_matrix(dir + "/bootstrap_replicates.csv", reps);
        meta["bootstrap"] = {{"replicates", sc.bootstrap},
                             {"skipped", est.skipped_replicates},
                             {"candidates", candidates},
                             {"mean_distance", est.mean},
                             {"max_distance", est.max}};
    }
    write_text_file(dir + "/subspace.json", meta.dump(2) + "\n");
    std::cout << "subspace written to " << dir << " (flagged n = " << gaps.flagged_n << ")\n";
    return 0;
}

// run-chain -------------------------------------------------------------------

ActiveSubspace load_subspace(const std::string& dir, std::size_t n) {
    if (fs::exists(dir + "/subspace.json")) {
        json meta = json::parse(read_text_file(dir + "/subspace.json"));
        if (meta.contains("subspace")) meta = meta.at("subspace");
        return partition(subspace_from_json(meta.dump()), n);
    }
    ActiveSubspace s;
    s.eigenvalues = read_csv_vector(dir + "/eigenvalues.csv");
    s.eigenvectors = read_csv_matrix(dir + "/W.csv");
    return partition(s, n);
}

struct ChainPaths {
    std::string csv;
    std::string sidecar;
};

ChainPaths chain_paths(const std::string& dir, const std::string& variant) {
    return {dir + "/chain_" + variant + ".csv", dir + "/chain_" + variant + ".json"};
}

int cmd_run_chain(const std::string& config_path, const std::string& dir_override,
                  const std::string& subspace_dir_flag, bool force, bool resume,
                  std::size_t checkpoint_every) {
    const json cfg = load_config(config_path);
    const ProblemHandle ph = make_problem(cfg);
    const SamplerConfig sa = parse_sampler(cfg);
    const SurrogateConfig su = parse_surrogate(cfg);
    const SubspaceConfig sc = parse_subspace(cfg);
    const std::string dir = out_dir(cfg, dir_override);
    const ChainPaths paths = chain_paths(dir, sa.variant);
    const std::size_t m = ph.problem->dim();

    // Target setup.
    StochasticLogTarget target;
    std::size_t chain_dim = m;
    json surrogate_meta;
    MisfitSurrogate surrogate;
    if (sa.variant == "vanilla") {
        target = [&](const Vec& x, Rng&) {
            return -misfit(*ph.problem, x) + log_standard_gaussian(x);
        };
        surrogate_meta = nullptr;
    } else {
        std::string sdir = subspace_dir_flag.empty() ? dir : subspace_dir_flag;
        if (!fs::exists(sdir + "/W.csv"))
            throw config_error("run-chain: subspace files not found in '" + sdir +
                               "' (run estimate-subspace first)");
        std::size_t n = sc.n;
        if (n == 0) {
            const json meta = json::parse(read_text_file(sdir + "/subspace.json"));
            n = meta.at("flagged_n").get<std::size_t>();
        }
        const ActiveSubspace sub = load_subspace(sdir, n);
        if (sub.dim() != m) throw config_error("run-chain: subspace dimension mismatch");
        InnerRule rule = InnerRule::monte_carlo;
        std::size_t inner = su.inner_m;
        if (su.rule == "gauss_hermite" || (su.rule == "auto" && m - n == 1)) {
            rule = InnerRule::gauss_hermite;
            inner = su.points;
        }
        surrogate = make_surrogate(*ph.problem, sub, inner, rule);
        target = [&surrogate](const Vec& y, Rng& r) {
            return log_approx_posterior(surrogate, y, r);
        };
        chain_dim = n;
        surrogate_meta = {{"rule", rule == InnerRule::gauss_hermite ? "gauss_hermite"
                                                                    : "monte_carlo"},
                          {"M", inner},
                          {"n", n},
                          {"subspace_dir", sdir}};
    }

    // Resume bookkeeping.
    std::size_t steps_done = 0;
    long long forward_base = 0;
    std::string rng_state;
    Vec state;
    double log_density = 0.0;
    bool resuming = false;
    if (resume && fs::exists(paths.sidecar)) {
        const json side = json::parse(read_text_file(paths.sidecar));
        steps_done = side.at("steps_done").get<std::size_t>();
        if (steps_done >= sa.steps) {
            std::cout << "chain already has " << steps_done << " steps\n";
            return 0;
        }
        forward_base = side.at("forward_model_calls").get<long long>();
        rng_state = side.at("rng_state").get<std::string>();
        state = side.at("last_state").get<Vec>();
        log_density = side.at("last_log_density").get<double>();
        resuming = steps_done > 0;
        // Drop any rows past the checkpoint so the resumed file is exact.
        const Chain partial = read_chain_csv(paths.csv);
        if (partial.length() < steps_done)
            throw config_error("run-chain: chain file shorter than its checkpoint; "
                               "rerun with --force");
        std::ofstream out(paths.csv, std::ios::trunc);
        out << chain_csv_header(chain_dim) << '\n';
        for (std::size_t k = 0; k < std::min(steps_done, partial.length()); ++k)
            out << chain_csv_row(k, partial.states[k], partial.log_density[k],
                                 partial.accepted[k] != 0)
                << '\n';
    } else {
        refuse_overwrite(paths.csv, force);
        std::ofstream out(paths.csv, std::ios::trunc);
        out << chain_csv_header(chain_dim) << '\n';
    }

    const auto write_sidecar = [&](bool completed, std::size_t done, const std::string& rstate,
                                   const Vec& last, double last_ld) {
        json side;
        side["problem"] = ph.id;
        side["variant"] = sa.variant;
        side["space_tag"] = sa.variant == "as" ? "active" : "full";
        side["seed"] = sa.seed;
        side["proposal_var"] = sa.proposal_var;
        side["n_steps"] = sa.steps;
        side["burn_in"] = sa.burn_in;
        side["steps_done"] = done;
        side["completed"] = completed;
        side["forward_model_calls"] = forward_base + ph.problem->forward_calls();
        side["surrogate"] = surrogate_meta;
        side["rng_state"] = rstate;
        side["last_state"] = last;
        side["last_log_density"] = last_ld;
        write_text_file(paths.sidecar, side.dump(2) + "\n");
    };

    if (sa.steps == 0) {
        write_sidecar(true, 0, Rng(sa.seed).save_state(), Vec(chain_dim, 0.0), 0.0);
        std::cout << "empty chain written to " << paths.csv << "\n";
        return 0;
    }

    std::ofstream out(paths.csv, std::ios::app);
    if (!out) throw config_error("cannot append to " + paths.csv);

    Rng rng(sa.seed);
    std::unique_ptr<MHStepper> stepper;
    if (resuming) {
        rng.load_state(rng_state);
        stepper = std::make_unique<MHStepper>(MHStepper::resumed(target, state, log_density,
                                                                 sa.proposal_var, rng));
    } else {
        stepper =
            std::make_unique<MHStepper>(target, Vec(chain_dim, 0.0), sa.proposal_var, rng);
        out << chain_csv_row(0, stepper->state(), stepper->log_density(), true) << '\n';
        steps_done = 1;
    }

    for (std::size_t k = steps_done; k < sa.steps; ++k) {
        stepper->step();
        out << chain_csv_row(k, stepper->state(), stepper->log_density(),
                             stepper->last_accepted())
            << '\n';
        if ((k + 1) % checkpoint_every == 0 && k + 1 < sa.steps) {
            out.flush();
            write_sidecar(false, k + 1, stepper->rng().save_state(), stepper->state(),
                          stepper->log_density());
        }
    }
    out.flush();
    write_sidecar(true, sa.steps, stepper->rng().save_state(), stepper->state(),
                  stepper->log_density());
    std::cout << "chain written to " << paths.csv << " (forward model calls: "
              << forward_base + ph.problem->forward_calls() << ")\n";
    return 0;
}

// reconstruct ------------------------------------------------------------------

int cmd_reconstruct(const std::string& chain_path, const std::string& subspace_dir,
                    std::size_t per_step, std::uint64_t seed, const std::string& out_path,
                    bool force) {
    const Chain active = read_chain_csv(chain_path);
    if (active.length() == 0) throw config_error("reconstruct: empty chain");
    const ActiveSubspace sub = load_subspace(subspace_dir, active.dim());
    refuse_overwrite(out_path, force);
    Rng rng(seed);
    const ReconstructedChain rec = reconstruct(active, sub, per_step, rng);

    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw config_error("cannot open for writing: " + out_path);
    out << chain_csv_header(sub.dim()) << '\n';
    for (std::size_t k = 0; k < rec.states.size(); ++k)
        out << chain_csv_row(k, rec.states[k], std::nan(""), true) << '\n';

    json side;
    side["space_tag"] = "reconstructed";
    side["per_step_draws"] = per_step;
    side["seed"] = seed;
    side["source_chain"] = chain_path;
    side["subspace_dir"] = subspace_dir;
    side["forward_model_calls"] = 0;
    side["steps_done"] = rec.states.size();
    side["completed"] = true;
    write_text_file(out_path.substr(0, out_path.rfind('.')) + ".json", side.dump(2) + "\n");
    std::cout << "reconstructed chain written to " << out_path << "\n";
    return 0;
}

// diagnose ----------------------------------------------------------------------

int cmd_diagnose(const std::vector<std::string>& chain_paths_in, const std::string& dir,
                 long long burn_in_flag, const std::string& subspace_w_csv, std::size_t acf_lags,
                 bool force) {
    if (chain_paths_in.empty()) throw config_error("diagnose: need at least one chain file");
    fs::create_directories(dir);
    refuse_overwrite(dir + "/diagnostics.json", force);

    struct Loaded {
        std::string path;
        Chain chain;
        json sidecar;
        DiagnosticsReport report;
    };
    std::vector<Loaded> chains;
    for (const auto& path : chain_paths_in) {
        Loaded l;
        l.path = path;
        l.chain = read_chain_csv(path);
        const std::string side = path.substr(0, path.rfind('.')) + ".json";
        if (fs::exists(side)) l.sidecar = json::parse(read_text_file(side));
        std::size_t burn = 0;
        if (burn_in_flag >= 0)
            burn = static_cast<std::size_t>(burn_in_flag);
        else if (l.sidecar.contains("burn_in"))
            burn = l.sidecar.at("burn_in").get<std::size_t>();
        if (burn >= l.chain.length())
            throw config_error("diagnose: burn-in exceeds chain length for " + path);
        if (burn > 0) {
            l.chain.states.erase(l.chain.states.begin(), l.chain.states.begin() + burn);
            l.chain.log_density.erase(l.chain.log_density.begin(),
                                      l.chain.log_density.begin() + burn);
            l.chain.accepted.erase(l.chain.accepted.begin(), l.chain.accepted.begin() + burn);
        }
        l.report = diagnose_states(l.chain.states, l.chain.accepted, path);
        chains.push_back(std::move(l));
    }

    // Table-style summary.
    std::string table = "chain,steps,dim,acceptance,min_ess,forward_model_calls\n";
    json all;
    for (auto& l : chains) {
        long long fwd = -1;
        if (l.sidecar.contains("forward_model_calls"))
            fwd = l.sidecar.at("forward_model_calls").get<long long>();
        table += l.path + "," + std::to_string(l.report.n_steps) + "," +
                 std::to_string(l.report.dim) + "," + format_double(l.report.acceptance) + "," +
                 format_double(l.report.min_ess) + "," + std::to_string(fwd) + "\n";
        all.push_back(json::parse(l.report.to_json()));
    }
    write_text_file(dir + "/summary.csv", table);
    write_text_file(dir + "/diagnostics.json", all.dump(2) + "\n");

    // ACF curves for the first few coordinates of each chain.
    for (std::size_t ci = 0; ci < chains.size(); ++ci) {
        const Chain& ch = chains[ci].chain;
        const std::size_t lags = std::min(acf_lags, ch.length() - 1);
        const std::size_t ncoord = std::min<std::size_t>(ch.dim(), 4);
        Matrix acf(lags + 1, ncoord + 1);
        Vec series(ch.length());
        for (std::size_t c = 0; c < ncoord; ++c) {
            for (std::size_t t = 0; t < ch.length(); ++t) series[t] = ch.states[t][c];
            const Vec rho = autocorrelation(series, lags);
            for (std::size_t k = 0; k <= lags; ++k) {
                acf(k, 0) = static_cast<double>(k);
                acf(k, c + 1) = rho[k];
            }
        }
        write_csv_matrix(dir + "/acf_chain" + std::to_string(ci) + ".csv", acf);
    }

    // Shifted-interval comparison against the first chain.
    if (chains.size() >= 2) {
        const Loaded& ref = chains.front();
        for (std::size_t ci = 1; ci < chains.size(); ++ci) {
            const Loaded& other = chains[ci];
            if (other.report.dim != ref.report.dim) continue;
            Matrix rows(ref.report.dim, 7);
            for (std::size_t c = 0; c < ref.report.dim; ++c) {
                const auto& rm = ref.report.coords[c].mean_ci;
                const auto& rv = ref.report.coords[c].var_ci;
                const auto& om = other.report.coords[c].mean_ci;
                const auto& ov = other.report.coords[c].var_ci;
                rows(c, 0) = static_cast<double>(c);
                rows(c, 1) = om.center - rm.center;        // shifted mean
                rows(c, 2) = rm.lower - rm.center;         // shifted CI
                rows(c, 3) = rm.upper - rm.center;
                rows(c, 4) = ov.center - rv.center;        // shifted variance
                rows(c, 5) = rv.lower - rv.center;
                rows(c, 6) = rv.upper - rv.center;
            }
            write_csv_matrix(dir + "/shifted_intervals_chain" + std::to_string(ci) + ".csv",
                             rows,
                             {"coord", "mean_delta", "mean_ci_lo", "mean_ci_hi", "var_delta",
                              "var_ci_lo", "var_ci_hi"});
        }
    }

    // Transformed-marginal check: y = W^T x, KDE and KL against the prior.
    if (!subspace_w_csv.empty()) {
        const Matrix w = read_csv_matrix(subspace_w_csv);
        for (std::size_t ci = 0; ci < chains.size(); ++ci) {
            const Chain& ch = chains[ci].chain;
            if (ch.dim() != w.rows()) continue;
            const std::size_t ncoord = std::min<std::size_t>(w.cols(), 6);
            Vec series(ch.length());
            Matrix klrows(ncoord, 2);
            Grid1D grid{-4.0, 4.0, 201};
            Matrix kde_out(grid.count, ncoord + 1);
            for (std::size_t c = 0; c < ncoord; ++c) {
                for (std::size_t t = 0; t < ch.length(); ++t) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < w.rows(); ++i) s += w(i, c) * ch.states[t][i];
                    series[t] = s;
                }
                klrows(c, 0) = static_cast<double>(c + 1);
                klrows(c, 1) = kl_to_standard_gaussian(series);
                const Vec dens = kde1d(series, grid);
                for (std::size_t g = 0; g < grid.count; ++g) {
                    kde_out(g, 0) = grid.point(g);
                    kde_out(g, c + 1) = dens[g];
                }
            }
            write_csv_matrix(dir + "/transformed_kl_chain" + std::to_string(ci) + ".csv", klrows,
                             {"coordinate", "kl_to_prior"});
            write_csv_matrix(dir + "/transformed_kde_chain" + std::to_string(ci) + ".csv",
                             kde_out);
        }
    }

    // Bivariate KDE grid for 2-D chains (posterior contour data).
    for (std::size_t ci = 0; ci < chains.size(); ++ci) {
        const Chain& ch = chains[ci].chain;
        if (ch.dim() != 2 || ch.length() < 30) continue;
        Matrix pts(ch.length(), 2);
        for (std::size_t t = 0; t < ch.length(); ++t) {
            pts(t, 0) = ch.states[t][0];
            pts(t, 1) = ch.states[t][1];
        }
        Grid1D gx{-4.0, 4.0, 101}, gy{-4.0, 4.0, 101};
        const Matrix dens = kde2d(pts, gx, gy);
        Matrix rows(gx.count * gy.count, 3);
        for (std::size_t i = 0; i < gx.count; ++i)
            for (std::size_t j = 0; j < gy.count; ++j) {
                const std::size_t r = i * gy.count + j;
                rows(r, 0) = gx.point(i);
                rows(r, 1) = gy.point(j);
                rows(r, 2) = dens(i, j);
            }
        write_csv_matrix(dir + "/kde2d_chain" + std::to_string(ci) + ".csv", rows,
                         {"x0", "x1", "density"});
    }

    std::cout << table;
    return 0;
}

// cov-study ----------------------------------------------------------------------

int cmd_cov_study(const std::string& config_path, const std::string& dir_override,
                  const std::string& subspace_dir_flag, bool force) {
    const json cfg = load_config(config_path);
    const ProblemHandle ph = make_problem(cfg);
    const SubspaceConfig sc = parse_subspace(cfg);
    const std::string dir = out_dir(cfg, dir_override);

    std::vector<std::size_t> m_list = {1, 5, 10, 20, 50};
    std::size_t n_points = 50;
    std::uint64_t seed = 0;
    if (cfg.contains("cov_study")) {
        const json& j = cfg.at("cov_study");
        check_keys(j, {"m_list", "n_points", "seed"}, "cov_study");
        if (j.contains("m_list")) m_list = j.at("m_list").get<std::vector<std::size_t>>();
        n_points = get_or<std::size_t>(j, "n_points", 50);
        seed = get_or<std::uint64_t>(j, "seed", 0);
    }

    const std::string sdir = subspace_dir_flag.empty() ? dir : subspace_dir_flag;
    if (!fs::exists(sdir + "/W.csv"))
        throw config_error("cov-study: subspace files not found in '" + sdir + "'");
    std::size_t n = sc.n;
    if (n == 0) {
        const json meta = json::parse(read_text_file(sdir + "/subspace.json"));
        n = meta.at("flagged_n").get<std::size_t>();
    }
    const ActiveSubspace sub = load_subspace(sdir, n);

    refuse_overwrite(dir + "/cov_study.csv", force);
    Rng rng(derive_seed(seed, 0x636f76ULL));
    const auto rows = coefficient_of_variation_study(*ph.problem, sub, m_list, n_points, rng);
    Matrix out(rows.size(), 4);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out(i, 0) = static_cast<double>(rows[i].inner_m);
        out(i, 1) = rows[i].avg_cov;
        out(i, 2) = rows[i].median_cov;
        out(i, 3) = static_cast<double>(rows[i].excluded_points);
    }
    write_csv_matrix(dir + "/cov_study.csv", out,
                     {"M", "avg_cov", "median_cov", "excluded_points"});
    std::cout << "cov study written to " << dir << "/cov_study.csv\n";
    return 0;
}

// hellinger ------------------------------------------------------------------------

int cmd_hellinger(const std::string& config_path, const std::string& dir_override, bool force) {
    const json cfg = load_config(config_path);
    const ProblemHandle ph = make_problem(cfg);
    if (ph.problem->dim() != 2)
        throw config_error("hellinger: grid verification is limited to 2-D problems");
    const SubspaceConfig sc = parse_subspace(cfg);
    const std::string dir = out_dir(cfg, dir_override);
    refuse_overwrite(dir + "/hellinger.json", force);

    double lo = -8.0, hi = 8.0;
    std::size_t count = 321, inner_points = 50;
    std::size_t n = sc.n == 0 ? 1 : sc.n;
    if (cfg.contains("hellinger")) {
        const json& j = cfg.at("hellinger");
        check_keys(j, {"grid_lo", "grid_hi", "grid_count", "inner_points"}, "hellinger");
        lo = get_or(j, "grid_lo", lo);
        hi = get_or(j, "grid_hi", hi);
        count = get_or<std::size_t>(j, "grid_count", count);
        inner_points = get_or<std::size_t>(j, "inner_points", inner_points);
    }

    const GradientFn grad = [&](const Vec& x) { return misfit_gradient(*ph.problem, x); };
    const CMatrix c = estimate_c_quadrature(grad, 2, sc.points_per_dim);
    const ActiveSubspace sub = partition(eigendecompose(c), n);

    const Grid2D grid{{lo, hi, count}, {lo, hi, count}};
    const auto f = [&](const Vec& x) { return misfit(*ph.problem, x); };
    const auto g = [&](const Vec& x) {
        const Vec y = matvec_transposed(sub.w1, x);
        return conditional_expectation_reference(*ph.problem, sub, y, inner_points);
    };
    const HellingerResult res =
        hellinger_vs_posterior_2d(f, g, grid, sub.eigenvalues, n, std::nullopt, 0.0);

    json j;
    j["problem"] = ph.id;
    j["n"] = n;
    j["distance"] = res.distance;
    j["bound"] = res.bound;
    j["L"] = res.l_constant;
    j["trailing_eigensum"] = res.trailing_eigensum;
    j["c_pos"] = res.c_pos;
    j["c_pi"] = res.c_pi;
    j["eigenvalues"] = sub.eigenvalues;
    j["holds"] = res.distance <= res.bound;
    write_text_file(dir + "/hellinger.json", j.dump(2) + "\n");
    std::cout << "H = " << res.distance << ", bound = " << res.bound << " ("
              << (res.distance <= res.bound ? "holds" : "violated") << ")\n";
    return 0;
}

// gen-problem -------------------------------------------------------------------------

int cmd_gen_problem(const std::string& config_path, const std::string& dir_override, bool force) {
    const json cfg = load_config(config_path);
    const ProblemHandle ph = make_problem(cfg);
    const std::string dir = out_dir(cfg, dir_override);
    refuse_overwrite(dir + "/problem.json", force);

    json j;
    j["id"] = ph.id;
    j["dim"] = ph.problem->dim();
    j["obs_dim"] = ph.problem->obs_dim();
    j["noise_var"] = ph.problem->noise_var();
    write_csv_vector(dir + "/data.csv", ph.problem->data(), "d");
    if (const auto* pk = dynamic_cast<const PoissonKLProblem*>(ph.problem.get())) {
        write_csv_vector(dir + "/x_true.csv", pk->x_true(), "x_true");
        write_csv_vector(dir + "/kl_eigenvalues.csv", pk->kl_eigenvalues(), "sigma");
        j["grid_n"] = pk->grid_n();
        j["beta"] = pk->beta();
        j["observation_s2"] = pk->observation_s2();
    }
    if (const auto* lg = dynamic_cast<const LinearGaussianProblem*>(ph.problem.get())) {
        write_csv_matrix(dir + "/forward_matrix.csv", lg->forward_matrix());
        j["rank"] = lg->rank();
    }
    write_text_file(dir + "/problem.json", j.dump(2) + "\n");
    std::cout << "problem fixtures written to " << dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"active-subspace accelerated MCMC experiment driver"};
    app.require_subcommand(1);

    std::string config_path, dir_override, subspace_dir, chain_path, out_path, subspace_w;
    std::vector<std::string> chain_files;
    bool force = false, resume = false;
    std::size_t lanes = 1, per_step = 10, acf_lags = 200, checkpoint_every = 10000;
    std::uint64_t seed = 0;
    long long burn_in_flag = -1;

    auto* est = app.add_subcommand("estimate-subspace",
                                   "estimate C, eigenpairs, gaps, and bootstrap error");
    est->add_option("--config", config_path)->required();
    est->add_option("--out", dir_override);
    est->add_flag("--force", force);
    est->add_option("--lanes", lanes);

    auto* run = app.add_subcommand("run-chain", "run a vanilla or active-subspace chain");
    run->add_option("--config", config_path)->required();
    run->add_option("--out", dir_override);
    run->add_option("--subspace-dir", subspace_dir);
    run->add_flag("--force", force);
    run->add_flag("--resume", resume);
    run->add_option("--checkpoint-every", checkpoint_every);

    auto* rec = app.add_subcommand("reconstruct", "lift an active chain to full space");
    rec->add_option("--chain", chain_path)->required();
    rec->add_option("--subspace-dir", subspace_dir)->required();
    rec->add_option("--P", per_step);
    rec->add_option("--seed", seed);
    rec->add_option("--out", out_path)->required();
    rec->add_flag("--force", force);

    auto* dia = app.add_subcommand("diagnose", "ESS/ACF/CBM diagnostics for chain files");
    dia->add_option("--chain", chain_files)->required();
    dia->add_option("--out", dir_override)->required();
    dia->add_option("--burn-in", burn_in_flag);
    dia->add_option("--subspace-w", subspace_w);
    dia->add_option("--acf-lags", acf_lags);
    dia->add_flag("--force", force);

    auto* cov = app.add_subcommand("cov-study", "coefficient-of-variation study over M");
    cov->add_option("--config", config_path)->required();
    cov->add_option("--out", dir_override);
    cov->add_option("--subspace-dir", subspace_dir);
    cov->add_flag("--force", force);

    auto* hel = app.add_subcommand("hellinger", "grid Hellinger distance and theorem bound");
    hel->add_option("--config", config_path)->required();
    hel->add_option("--out", dir_override);
    hel->add_flag("--force", force);

    auto* gen = app.add_subcommand("gen-problem", "write problem fixtures (data, x_true, ...)");
    gen->add_option("--config", config_path)->required();
    gen->add_option("--out", dir_override);
    gen->add_flag("--force", force);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (est->parsed())
            return cmd_estimate_subspace(config_path, dir_override, force, lanes);
        if (run->parsed())
            return cmd_run_chain(config_path, dir_override, subspace_dir, force, resume,
                                 checkpoint_every);
        if (rec->parsed())
            return cmd_reconstruct(chain_path, subspace_dir, per_step, seed, out_path, force);
        if (dia->parsed())
            return cmd_diagnose(chain_files, dir_override, burn_in_flag, subspace_w, acf_lags,
                                force);
        if (cov->parsed())
            return cmd_cov_study(config_path, dir_override, subspace_dir, force);
        if (hel->parsed()) return cmd_hellinger(config_path, dir_override, force);
        if (gen->parsed()) return cmd_gen_problem(config_path, dir_override, force);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
