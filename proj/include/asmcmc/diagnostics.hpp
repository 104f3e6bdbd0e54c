#pragma once

#include "asmcmc/linalg.hpp"
#include "asmcmc/posterior.hpp"
#include "asmcmc/rng.hpp"
#include "asmcmc/sampler.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace asmcmc {

/// Biased (divide-by-N) autocorrelation estimate, rho_0..rho_max_lag.
Vec autocorrelation(const Vec& series, std::size_t max_lag);

/// N / (1 + 2 sum_{k=1}^{2000} rho_k), the 2000-lag cap matching the
/// effective-sample-size convention used for the chain tables. Shorter
/// series truncate the sum (flagged); a denominator below 1 is floored.
struct EssResult {
    double ess = 0.0;
    double denominator = 1.0;
    bool truncated = false;
    bool floored = false;
};
EssResult effective_sample_size(const Vec& series);

/// Consistent-batch-means confidence interval for the series mean:
/// batch size floor(N^theta), normal-quantile interval.
struct BatchMeansCI {
    double lower = 0.0, upper = 0.0;
    double se = 0.0;
    double center = 0.0;
    std::size_t batch_size = 0, n_batches = 0;
};
BatchMeansCI batch_means_ci(const Vec& series, double theta, double level);

/// Same machinery applied to centered squares: interval for the variance.
BatchMeansCI variance_batch_means_ci(const Vec& series, double theta, double level);

/// Inverse standard normal CDF (Acklam).
double normal_quantile(double p);

// Coefficient of variation study ---------------------------------------------

struct CovStudyRow {
    std::size_t inner_m = 0;
    double avg_cov = 0.0;
    double median_cov = 0.0;
    std::size_t excluded_points = 0;
};
/// For n_points prior draws x, project to the active variables and measure
/// the relative Monte Carlo error of the surrogate for each M: the sample
/// sd of the inner misfit draws over sqrt(M) times the estimate. Points
/// where the estimate is zero are excluded and counted.
std::vector<CovStudyRow> coefficient_of_variation_study(const BayesProblem& problem,
                                                        const ActiveSubspace& subspace,
                                                        const std::vector<std::size_t>& m_list,
                                                        std::size_t n_points, Rng& rng);

// Kernel density estimates ----------------------------------------------------

struct Grid1D {
    double lo = 0.0, hi = 1.0;
    std::size_t count = 2;
    double step() const { return (hi - lo) / static_cast<double>(count - 1); }
    double point(std::size_t i) const { return lo + step() * static_cast<double>(i); }
};

double silverman_bandwidth(double sd, std::size_t n, std::size_t dim);

/// Gaussian-kernel KDE with Silverman bandwidth; needs >= 30 samples and a
/// non-degenerate sample sd.
Vec kde1d(const Vec& samples, const Grid1D& grid);
Matrix kde2d(const Matrix& samples, const Grid1D& grid_x, const Grid1D& grid_y);

/// KDE-based Kullback-Leibler divergence of a sample to the standard
/// gaussian; used for the transformed-marginal prior check.
double kl_to_standard_gaussian(const Vec& series);

// Hellinger -------------------------------------------------------------------

struct Grid2D {
    Grid1D x, y;
};

/// Hellinger distance between two densities given by unnormalized log
/// values on a tensor grid; both are normalized on the grid by trapezoid
/// quadrature. The grid must span at least 6 prior standard deviations and
/// must contain essentially all of each density's mass.
double hellinger_grid(const std::function<double(const Vec&)>& log_p_unnorm,
                      const std::function<double(const Vec&)>& log_q_unnorm,
                      const Grid2D& grid);

struct HellingerResult {
    double distance = 0.0;
    double bound = 0.0;
    double l_constant = 0.0;
    double trailing_eigensum = 0.0;
    double c_pos = 0.0;
    double c_pi = 0.0;
};

/// Posterior-approximation bound: L (from the prior averages of the misfit,
/// computed by the same grid quadrature), the trailing eigenvalue sum, and
/// the bound L * (1 + M^{-1/2}) * (eps sqrt(leading) + sqrt(trailing))
/// with the gaussian Poincare constant 1.
double theorem_bound(double l_constant, const Vec& eigenvalues, std::size_t n,
                     std::optional<std::size_t> inner_m = std::nullopt,
                     double subspace_error = 0.0);

/// Hellinger distance between the true posterior exp(-f) rho_pri and the
/// approximation exp(-g) rho_pri on a 2-D grid, plus the theorem bound.
HellingerResult hellinger_vs_posterior_2d(const std::function<double(const Vec&)>& misfit_fn,
                                          const std::function<double(const Vec&)>& approx_misfit_fn,
                                          const Grid2D& grid, const Vec& eigenvalues,
                                          std::size_t n,
                                          std::optional<std::size_t> inner_m = std::nullopt,
                                          double subspace_error = 0.0);

// Chain reports ----------------------------------------------------------------

struct CoordinateDiagnostics {
    EssResult ess;
    BatchMeansCI mean_ci;
    BatchMeansCI var_ci;
    Vec acf; // leading lags, rho_0..rho_50
};

struct DiagnosticsReport {
    std::string chain_id;
    std::size_t n_steps = 0;
    std::size_t dim = 0;
    double acceptance = 0.0;
    std::vector<CoordinateDiagnostics> coords;
    double min_ess = 0.0;

    std::string to_json() const;
};

DiagnosticsReport diagnose_states(const std::vector<Vec>& states,
                                  const std::vector<unsigned char>& accepted,
                                  const std::string& chain_id, double theta = 2.0 / 3.0,
                                  double level = 0.99);

} // namespace asmcmc
