#pragma once

#include "asmcmc/linalg.hpp"
#include "asmcmc/posterior.hpp"
#include "asmcmc/rng.hpp"
#include "asmcmc/subspace.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace asmcmc {

/// Target log-density that may consume randomness (surrogate misfits do).
using StochasticLogTarget = std::function<double(const Vec&, Rng&)>;

/// Random-walk Metropolis-Hastings chain. A chain of n steps holds n
/// states; the first is the evaluated initial state, so every step costs
/// one target evaluation.
struct Chain {
    std::vector<Vec> states;
    Vec log_density;
    std::vector<unsigned char> accepted;
    double proposal_var = 0.0;
    std::uint64_t seed = 0;
    std::string space_tag = "full"; // full | active | reconstructed

    std::size_t length() const { return states.size(); }
    std::size_t dim() const { return states.empty() ? 0 : states.front().size(); }
    double acceptance_rate() const;
    void validate() const;
};

/// Full-space chain lifted from an active chain by sampling the inactive
/// prior; length = P x active length.
struct ReconstructedChain {
    std::vector<Vec> states;
    std::size_t per_step_draws = 1;
    std::uint64_t seed = 0;
};

/// One-step-at-a-time random walk, used by the samplers and by the CLI's
/// incremental chain writer. Proposals are isotropic gaussian with the
/// given variance; the current log-density is cached so each step costs
/// exactly one target evaluation. A non-finite proposal density counts as
/// a rejection.
class MHStepper {
public:
    MHStepper(StochasticLogTarget target, Vec x0, double proposal_var, Rng rng);

    /// Continue an interrupted chain: state and cached log-density come
    /// from a checkpoint, so nothing is evaluated here.
    static MHStepper resumed(StochasticLogTarget target, Vec state, double log_density,
                             double proposal_var, Rng rng);

    void step();

    const Vec& state() const { return state_; }
    double log_density() const { return log_density_; }
    bool last_accepted() const { return last_accepted_; }
    std::size_t steps_taken() const { return steps_; }
    Rng& rng() { return rng_; }
    const Rng& rng_ref() const { return rng_; }

private:
    struct ResumeTag {};
    MHStepper(ResumeTag, StochasticLogTarget target, Vec state, double log_density,
              double proposal_var, Rng rng);

    StochasticLogTarget target_;
    Vec state_;
    double proposal_var_;
    Rng rng_;
    double log_density_ = 0.0;
    bool last_accepted_ = true;
    std::size_t steps_ = 0;
};

/// Vanilla random walk on a deterministic log target.
Chain metropolis_hastings(const std::function<double(const Vec&)>& log_target, const Vec& x0,
                          std::size_t n_steps, double proposal_var, Rng& rng);

/// Random walk on the active variables with the misfit surrogate target:
/// accept ratio exp(-g(y') ) rho(y') / exp(-g(y_k)) rho(y_k), with the
/// current surrogate value cached from when the state was accepted.
Chain as_mcmc(const MisfitSurrogate& surrogate, const Vec& y0, std::size_t n_steps,
              double proposal_var, Rng& rng);

/// Lift an active chain to full space: x = W1 y_k + W2 z with fresh
/// standard gaussian z per draw. `draw_inactive` is a test hook replacing
/// the gaussian draw; no forward-model evaluations happen here.
ReconstructedChain
reconstruct(const Chain& active_chain, const ActiveSubspace& subspace, std::size_t per_step_draws,
            Rng& rng,
            const std::function<Vec(Rng&, std::size_t)>& draw_inactive = {});

// Chain files ---------------------------------------------------------------

std::string chain_csv_header(std::size_t dim);
std::string chain_csv_row(std::size_t step, const Vec& state, double log_density, bool accepted);

void write_chain_csv(const std::string& path, const Chain& chain);
/// Reads states/log-density/accepted; seed and proposal variance live in
/// the sidecar. Throws config_error with the line number on bad rows.
Chain read_chain_csv(const std::string& path);

} // namespace asmcmc
