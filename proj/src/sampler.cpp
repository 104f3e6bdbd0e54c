#include "asmcmc/sampler.hpp"

#include "asmcmc/errors.hpp"
#include "asmcmc/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace asmcmc {

double Chain::acceptance_rate() const {
    if (accepted.empty()) return 0.0;
    double s = 0.0;
    for (unsigned char a : accepted) s += a ? 1.0 : 0.0;
    return s / static_cast<double>(accepted.size());
}

void Chain::validate() const {
    if (states.size() != log_density.size() || states.size() != accepted.size())
        throw numeric_error("chain: inconsistent lengths");
    for (std::size_t k = 1; k < states.size(); ++k)
        if (!accepted[k] && states[k] != states[k - 1])
            throw numeric_error("chain: rejected step " + std::to_string(k) +
                                " does not copy its predecessor");
}

MHStepper::MHStepper(StochasticLogTarget target, Vec x0, double proposal_var, Rng rng)
    : target_(std::move(target)), state_(std::move(x0)), proposal_var_(proposal_var),
      rng_(rng) {
    if (proposal_var <= 0.0) throw config_error("sampler: proposal variance must be positive");
    log_density_ = target_(state_, rng_);
    if (!std::isfinite(log_density_))
        throw numeric_error("sampler: log target not finite at the initial state");
}

MHStepper::MHStepper(ResumeTag, StochasticLogTarget target, Vec state, double log_density,
                     double proposal_var, Rng rng)
    : target_(std::move(target)), state_(std::move(state)), proposal_var_(proposal_var),
      rng_(rng), log_density_(log_density) {
    if (proposal_var <= 0.0) throw config_error("sampler: proposal variance must be positive");
}

MHStepper MHStepper::resumed(StochasticLogTarget target, Vec state, double log_density,
                             double proposal_var, Rng rng) {
    return MHStepper(ResumeTag{}, std::move(target), std::move(state), log_density, proposal_var,
                     rng);
}

void MHStepper::step() {
    ++steps_;
    const double sd = std::sqrt(proposal_var_);
    Vec proposal(state_.size());
    for (std::size_t i = 0; i < proposal.size(); ++i)
        proposal[i] = state_[i] + sd * rng_.gaussian();

    double lp = -std::numeric_limits<double>::infinity();
    try {
        lp = target_(proposal, rng_);
    } catch (const numeric_error& e) {
        throw numeric_error("sampler: step " + std::to_string(steps_) + ": " + e.what());
    }

    bool accept = false;
    if (std::isfinite(lp)) {
        const double log_ratio = lp - log_density_;
        if (log_ratio >= 0.0) {
            accept = true;
            rng_.uniform(); // keep the draw count per step fixed
        } else {
            accept = std::log(rng_.uniform()) < log_ratio;
        }
    } else {
        rng_.uniform();
    }
    if (accept) {
        state_ = std::move(proposal);
        log_density_ = lp;
    }
    last_accepted_ = accept;
}

namespace {

Chain run_chain(StochasticLogTarget target, const Vec& x0, std::size_t n_steps,
                double proposal_var, Rng& rng, std::string tag) {
    Chain chain;
    chain.proposal_var = proposal_var;
    chain.seed = rng.seed();
    chain.space_tag = std::move(tag);
    if (n_steps == 0) return chain;

    MHStepper stepper(std::move(target), x0, proposal_var, rng);
    chain.states.reserve(n_steps);
    chain.log_density.reserve(n_steps);
    chain.accepted.reserve(n_steps);
    chain.states.push_back(stepper.state());
    chain.log_density.push_back(stepper.log_density());
    chain.accepted.push_back(1);
    for (std::size_t k = 1; k < n_steps; ++k) {
        stepper.step();
        chain.states.push_back(stepper.state());
        chain.log_density.push_back(stepper.log_density());
        chain.accepted.push_back(stepper.last_accepted() ? 1 : 0);
    }
    rng = stepper.rng(); // hand the stream back so callers can continue it
    return chain;
}

} // namespace

Chain metropolis_hastings(const std::function<double(const Vec&)>& log_target, const Vec& x0,
                          std::size_t n_steps, double proposal_var, Rng& rng) {
    return run_chain([&log_target](const Vec& x, Rng&) { return log_target(x); }, x0, n_steps,
                     proposal_var, rng, "full");
}

Chain as_mcmc(const MisfitSurrogate& surrogate, const Vec& y0, std::size_t n_steps,
              double proposal_var, Rng& rng) {
    surrogate.validate();
    if (y0.size() != surrogate.active_dim())
        throw config_error("as_mcmc: initial state has wrong active dimension");
    return run_chain(
        [&surrogate](const Vec& y, Rng& r) { return log_approx_posterior(surrogate, y, r); },
        y0, n_steps, proposal_var, rng, "active");
}

ReconstructedChain
reconstruct(const Chain& active_chain, const ActiveSubspace& subspace, std::size_t per_step_draws,
            Rng& rng, const std::function<Vec(Rng&, std::size_t)>& draw_inactive) {
    if (per_step_draws < 1) throw config_error("reconstruct: P must be >= 1");
    if (subspace.split == 0) throw config_error("reconstruct: subspace partition not set");
    if (active_chain.dim() != subspace.split)
        throw config_error("reconstruct: chain dimension does not match subspace split");

    const Matrix& w1 = subspace.w1;
    const Matrix& w2 = subspace.w2;
    const std::size_t m = subspace.dim();
    const std::size_t zdim = m - subspace.split;

    ReconstructedChain out;
    out.per_step_draws = per_step_draws;
    out.seed = rng.seed();
    out.states.reserve(active_chain.length() * per_step_draws);
    for (const Vec& y : active_chain.states) {
        Vec base(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < w1.cols(); ++j) s += w1(i, j) * y[j];
            base[i] = s;
        }
        for (std::size_t l = 0; l < per_step_draws; ++l) {
            const Vec z = draw_inactive ? draw_inactive(rng, zdim) : rng.gaussian_vector(zdim);
            if (z.size() != zdim) throw config_error("reconstruct: bad inactive draw size");
            Vec x = base;
            for (std::size_t i = 0; i < m; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < zdim; ++j) s += w2(i, j) * z[j];
                x[i] += s;
            }
            out.states.push_back(std::move(x));
        }
    }
    return out;
}

std::string chain_csv_header(std::size_t dim) {
    std::string h = "step";
    for (std::size_t j = 0; j < dim; ++j) h += ",x" + std::to_string(j);
    h += ",log_density,accepted";
    return h;
}

std::string chain_csv_row(std::size_t step, const Vec& state, double log_density, bool accepted) {
    std::string row = std::to_string(step);
    for (double v : state) {
        row += ',';
        row += format_double(v);
    }
    row += ',';
    row += format_double(log_density);
    row += accepted ? ",1" : ",0";
    return row;
}

void write_chain_csv(const std::string& path, const Chain& chain) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open for writing: " + path);
    out << chain_csv_header(chain.dim()) << '\n';
    for (std::size_t k = 0; k < chain.length(); ++k)
        out << chain_csv_row(k, chain.states[k], chain.log_density[k], chain.accepted[k] != 0)
            << '\n';
}

Chain read_chain_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open: " + path);
    Chain chain;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1) {
            if (line.rfind("step,", 0) != 0 && line != "step")
                throw config_error(path + ": missing chain header at line 1");
            continue;
        }
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        Vec fields;
        while (std::getline(ss, cell, ',')) {
            try {
                fields.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw config_error(path + ": malformed value at line " + std::to_string(lineno));
            }
        }
        if (fields.size() < 3)
            throw config_error(path + ": too few columns at line " + std::to_string(lineno));
        const std::size_t dim = fields.size() - 3;
        if (!chain.states.empty() && dim != chain.dim())
            throw config_error(path + ": inconsistent row width at line " + std::to_string(lineno));
        chain.states.emplace_back(fields.begin() + 1, fields.begin() + 1 + dim);
        chain.log_density.push_back(fields[1 + dim]);
        chain.accepted.push_back(fields[2 + dim] != 0.0 ? 1 : 0);
    }
    return chain;
}

} // namespace asmcmc
