#pragma once

#include "asmcmc/linalg.hpp"
#include "asmcmc/rng.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace asmcmc {

using GradientFn = std::function<Vec(const Vec&)>;
using PriorSampler = std::function<Vec(Rng&)>;

/// Misfit gradients evaluated at prior draws; the raw material for the
/// gradient outer-product matrix and its bootstrap.
struct GradientSampleSet {
    Matrix samples;      // N x m, one gradient per row
    Matrix prior_points; // N x m, where each gradient was taken
    std::size_t count() const { return samples.rows(); }
    std::size_t dim() const { return samples.cols(); }
    void validate() const;
};

struct Provenance {
    enum class Kind { monte_carlo, quadrature } kind = Kind::monte_carlo;
    std::size_t detail = 0; // N for monte_carlo, points per dim for quadrature
    std::uint64_t seed = 0;
    std::string to_string() const;
};

/// Average outer product of the misfit gradient with itself.
struct CMatrix {
    Matrix entries;
    Provenance provenance;
    std::size_t dim() const { return entries.rows(); }
    /// Symmetry within 1e-12 relative; throws numeric_error otherwise.
    void validate() const;
};

/// Eigendecomposition of C with the active/inactive partition. split == 0
/// means the partition has not been chosen yet.
struct ActiveSubspace {
    Vec eigenvalues;  // descending
    Matrix eigenvectors;
    std::size_t split = 0;
    Matrix w1; // first `split` columns
    Matrix w2; // remaining columns
    double gap = 0.0; // lambda_split - lambda_{split+1}
    bool identifiable = true; // false when the gap is exactly zero

    std::size_t dim() const { return eigenvalues.size(); }
    void validate(const CMatrix* c = nullptr) const;
};

/// Bootstrap replicate distances per candidate split dimension.
struct SubspaceErrorEstimate {
    std::vector<std::size_t> candidates;
    std::vector<Vec> distances; // distances[i] holds replicates for candidates[i]
    Vec mean;
    Vec max;
    std::size_t skipped_replicates = 0;
};

/// Monte Carlo estimate (1/N) sum of grad f_j grad f_j^T from prior draws.
/// Lanes > 1 evaluates gradients in parallel; the reduction is ordered so
/// results are identical for any lane count. Throws numeric_error naming
/// the sample index if a gradient is non-finite.
std::pair<CMatrix, GradientSampleSet>
estimate_c_monte_carlo(const GradientFn& gradient_fn, const PriorSampler& prior_sampler,
                       std::size_t n_samples, Rng& rng, std::size_t lanes = 1);

/// Tensor Gauss-Hermite estimate under the standard gaussian prior;
/// refuses dimensions above 4 (tensor grid growth) pointing to Monte Carlo.
CMatrix estimate_c_quadrature(const GradientFn& gradient_fn, std::size_t dim,
                              std::size_t points_per_dim);

/// Jacobi eigendecomposition with descending eigenvalues and the
/// deterministic sign convention; split left unset.
ActiveSubspace eigendecompose(const CMatrix& c);

/// Choose the split index (1 <= n <= m-1) and materialize W1, W2.
/// A zero gap marks the subspace as not identifiable (warning, not error).
ActiveSubspace partition(const ActiveSubspace& spectrum, std::size_t n);

/// Spectral-norm distance between the spans of two orthonormal column
/// blocks; symmetric, in [0, 1].
double subspace_distance(const Matrix& w1_a, const Matrix& w1_b);

/// Bootstrap the subspace estimate: resample gradients with replacement,
/// re-estimate, and measure distances to the full-sample subspace for each
/// candidate split. Replicates whose resampled C is exactly zero are
/// skipped and counted.
SubspaceErrorEstimate bootstrap_subspace_error(const GradientSampleSet& samples,
                                               const std::vector<std::size_t>& n_candidates,
                                               std::size_t n_boot, Rng& rng,
                                               std::size_t lanes = 1);

/// Relative eigenvalue gaps for every candidate split; flagged_n is the
/// argmax of lambda_n / lambda_{n+1}.
struct GapReport {
    Vec absolute;  // lambda_n - lambda_{n+1}
    Vec ratio;     // lambda_n / lambda_{n+1}
    std::size_t flagged_n = 1;
};
GapReport gap_report(const Vec& eigenvalues);

std::string subspace_to_json(const ActiveSubspace& s, const Provenance& prov);
ActiveSubspace subspace_from_json(const std::string& text);

} // namespace asmcmc
