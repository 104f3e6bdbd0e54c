#include "asmcmc/subspace.hpp"

#include "asmcmc/errors.hpp"
#include "asmcmc/io.hpp"
#include "asmcmc/quadrature.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <thread>

namespace asmcmc {

void GradientSampleSet::validate() const {
    if (count() == 0) throw numeric_error("gradient sample set: empty");
    if (prior_points.rows() != samples.rows() || prior_points.cols() != samples.cols())
        throw numeric_error("gradient sample set: sample/point shape mismatch");
    for (std::size_t i = 0; i < samples.rows(); ++i)
        for (std::size_t j = 0; j < samples.cols(); ++j)
            if (!std::isfinite(samples(i, j)))
                throw numeric_error("gradient sample set: non-finite entry in sample " +
                                    std::to_string(i));
}

std::string Provenance::to_string() const {
    if (kind == Kind::monte_carlo)
        return "monte_carlo(N=" + std::to_string(detail) + ")";
    return "quadrature(points_per_dim=" + std::to_string(detail) + ")";
}

void CMatrix::validate() const {
    const std::size_t m = entries.rows();
    if (entries.cols() != m) throw numeric_error("C matrix: not square");
    const double scale = std::max(max_abs(entries), 1e-300);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            if (std::abs(entries(i, j) - entries(j, i)) > 1e-12 * scale)
                throw numeric_error("C matrix: asymmetric beyond tolerance at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
}

void ActiveSubspace::validate(const CMatrix* c) const {
    const std::size_t m = dim();
    const Matrix gram = matmul_at_b(eigenvectors, eigenvectors);
    const double ortho = max_abs_diff(gram, Matrix::identity(m));
    if (ortho > 1e-10)
        throw numeric_error("active subspace: eigenvectors not orthogonal (" +
                            format_double(ortho) + ")");
    const double lmax = std::max(eigenvalues.front(), 0.0);
    for (std::size_t i = 0; i + 1 < m; ++i)
        if (eigenvalues[i] < eigenvalues[i + 1])
            throw numeric_error("active subspace: eigenvalues not descending");
    if (eigenvalues.back() < -1e-10 * std::max(lmax, 1e-300))
        throw numeric_error("active subspace: negative eigenvalue beyond tolerance");
    if (c != nullptr) {
        for (std::size_t i = 0; i < m; ++i) {
            const Vec wi = eigenvectors.column(i);
            const double rayleigh = dot(wi, matvec(c->entries, wi));
            const double denom = std::max(std::abs(eigenvalues[i]), 1e-12 * std::max(lmax, 1e-300));
            if (std::abs(rayleigh - eigenvalues[i]) > 1e-8 * denom && lmax > 0.0)
                throw numeric_error("active subspace: rayleigh quotient mismatch at " +
                                    std::to_string(i));
        }
    }
    if (split > 0) {
        if (split >= m) throw numeric_error("active subspace: split out of range");
        if (w1.cols() != split || w2.cols() != m - split)
            throw numeric_error("active subspace: partition blocks inconsistent");
    }
}

namespace {

void run_lanes(std::size_t n_items, std::size_t lanes,
               const std::function<void(std::size_t, std::size_t)>& chunk_fn) {
    lanes = std::max<std::size_t>(1, std::min(lanes, n_items == 0 ? 1 : n_items));
    if (lanes == 1) {
        chunk_fn(0, n_items);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t per = (n_items + lanes - 1) / lanes;
    for (std::size_t l = 0; l < lanes; ++l) {
        const std::size_t begin = l * per;
        const std::size_t end = std::min(n_items, begin + per);
        if (begin >= end) break;
        pool.emplace_back(chunk_fn, begin, end);
    }
    for (auto& t : pool) t.join();
}

} // namespace

std::pair<CMatrix, GradientSampleSet>
estimate_c_monte_carlo(const GradientFn& gradient_fn, const PriorSampler& prior_sampler,
                       std::size_t n_samples, Rng& rng, std::size_t lanes) {
    if (n_samples < 1) throw config_error("estimate_c_monte_carlo: N must be >= 1");

    // Prior points come from the master stream so they do not depend on the
    // lane count; gradient evaluation is pure and parallelizes freely.
    std::vector<Vec> points(n_samples);
    for (std::size_t j = 0; j < n_samples; ++j) points[j] = prior_sampler(rng);
    const std::size_t m = points.front().size();

    std::vector<Vec> grads(n_samples);
    std::vector<std::string> failures(n_samples);
    run_lanes(n_samples, lanes, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            Vec g = gradient_fn(points[j]);
            if (g.size() != m || !all_finite(g)) {
                failures[j] = "non-finite or mis-sized gradient at sample " + std::to_string(j);
                g.assign(m, 0.0);
            }
            grads[j] = std::move(g);
        }
    });
    for (const auto& f : failures)
        if (!f.empty()) throw numeric_error("estimate_c_monte_carlo: " + f);

    // Single pass of rank-1 updates, accumulated in sample order.
    Matrix c(m, m);
    for (std::size_t j = 0; j < n_samples; ++j) {
        const Vec& g = grads[j];
        for (std::size_t r = 0; r < m; ++r) {
            const double gr = g[r];
            double* row = c.row_ptr(r);
            for (std::size_t s = 0; s < m; ++s) row[s] += gr * g[s];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n_samples);
    for (double& v : c.raw()) v *= inv_n;
    // Symmetrize roundoff so the invariant holds exactly.
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t s = r + 1; s < m; ++s) {
            const double avg = 0.5 * (c(r, s) + c(s, r));
            c(r, s) = c(s, r) = avg;
        }

    GradientSampleSet set;
    set.samples = Matrix(n_samples, m);
    set.prior_points = Matrix(n_samples, m);
    for (std::size_t j = 0; j < n_samples; ++j)
        for (std::size_t k = 0; k < m; ++k) {
            set.samples(j, k) = grads[j][k];
            set.prior_points(j, k) = points[j][k];
        }

    CMatrix out;
    out.entries = std::move(c);
    out.provenance = {Provenance::Kind::monte_carlo, n_samples, rng.seed()};
    return {std::move(out), std::move(set)};
}

CMatrix estimate_c_quadrature(const GradientFn& gradient_fn, std::size_t dim,
                              std::size_t points_per_dim) {
    if (dim > 4)
        throw config_error("estimate_c_quadrature: tensor grids are limited to dimension 4; "
                           "use estimate_c_monte_carlo for larger problems");
    if (points_per_dim < 2) throw config_error("estimate_c_quadrature: need >= 2 points per dim");

    const GaussHermiteRule rule = gauss_hermite(points_per_dim);
    Matrix c(dim, dim);
    Vec x(dim, 0.0);
    std::vector<std::size_t> idx(dim, 0);
    while (true) {
        double w = 1.0;
        for (std::size_t k = 0; k < dim; ++k) {
            x[k] = rule.nodes[idx[k]];
            w *= rule.weights[idx[k]];
        }
        const Vec g = gradient_fn(x);
        if (!all_finite(g)) throw numeric_error("estimate_c_quadrature: non-finite gradient");
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t s = 0; s < dim; ++s) c(r, s) += w * g[r] * g[s];

        std::size_t k = 0;
        while (k < dim && ++idx[k] == points_per_dim) {
            idx[k] = 0;
            ++k;
        }
        if (k == dim) break;
    }
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t s = r + 1; s < dim; ++s) {
            const double avg = 0.5 * (c(r, s) + c(s, r));
            c(r, s) = c(s, r) = avg;
        }
    CMatrix out;
    out.entries = std::move(c);
    out.provenance = {Provenance::Kind::quadrature, points_per_dim, 0};
    return out;
}

ActiveSubspace eigendecompose(const CMatrix& c) {
    c.validate();
    const SymEig eig = jacobi_eigensolve(c.entries);
    ActiveSubspace s;
    s.eigenvalues = eig.values;
    s.eigenvectors = eig.vectors;
    s.split = 0;
    return s;
}

ActiveSubspace partition(const ActiveSubspace& spectrum, std::size_t n) {
    const std::size_t m = spectrum.dim();
    if (n < 1 || n >= m)
        throw config_error("partition: split must satisfy 1 <= n <= m-1 (got n=" +
                           std::to_string(n) + ", m=" + std::to_string(m) + ")");
    ActiveSubspace s = spectrum;
    s.split = n;
    s.w1 = spectrum.eigenvectors.columns(0, n);
    s.w2 = spectrum.eigenvectors.columns(n, m - n);
    s.gap = spectrum.eigenvalues[n - 1] - spectrum.eigenvalues[n];
    s.identifiable = (s.gap != 0.0);
    return s;
}

double subspace_distance(const Matrix& w1_a, const Matrix& w1_b) {
    if (w1_a.rows() != w1_b.rows() || w1_a.cols() != w1_b.cols())
        throw config_error("subspace_distance: shape mismatch");
    const auto check_orthonormal = [](const Matrix& w, const char* which) {
        const Matrix gram = matmul_at_b(w, w);
        if (max_abs_diff(gram, Matrix::identity(w.cols())) > 1e-8)
            throw numeric_error(std::string("subspace_distance: ") + which +
                                " block is not orthonormal");
    };
    check_orthonormal(w1_a, "first");
    check_orthonormal(w1_b, "second");

    // ||A^T (I - B B^T)|| = sqrt(1 - sigma_min(A^T B)^2), symmetric in A, B.
    const Matrix g = matmul_at_b(w1_a, w1_b);
    const Matrix gram = matmul(g, transpose(g));
    const SymEig eig = jacobi_eigensolve(gram);
    const double smin_sq = std::clamp(eig.values.back(), 0.0, 1.0);
    return std::sqrt(1.0 - smin_sq);
}

SubspaceErrorEstimate bootstrap_subspace_error(const GradientSampleSet& samples,
                                               const std::vector<std::size_t>& n_candidates,
                                               std::size_t n_boot, Rng& rng,
                                               std::size_t lanes) {
    samples.validate();
    const std::size_t n = samples.count();
    const std::size_t m = samples.dim();
    if (n < 10) throw config_error("bootstrap_subspace_error: need at least 10 samples");
    if (n_boot < 2) throw config_error("bootstrap_subspace_error: need at least 2 replicates");
    for (std::size_t cand : n_candidates)
        if (cand < 1 || cand >= m)
            throw config_error("bootstrap_subspace_error: candidate n out of range");

    // Full-sample reference subspaces per candidate.
    Matrix c_full(m, m);
    for (std::size_t j = 0; j < n; ++j) {
        const double* g = samples.samples.row_ptr(j);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t s = 0; s < m; ++s) c_full(r, s) += g[r] * g[s];
    }
    for (double& v : c_full.raw()) v /= static_cast<double>(n);
    CMatrix cref;
    cref.entries = c_full;
    const ActiveSubspace ref = eigendecompose(cref);
    std::vector<Matrix> ref_blocks;
    ref_blocks.reserve(n_candidates.size());
    for (std::size_t cand : n_candidates) ref_blocks.push_back(ref.eigenvectors.columns(0, cand));

    struct Replicate {
        Vec dist;   // one distance per candidate
        bool skipped = false;
    };
    std::vector<Replicate> reps(n_boot);
    const std::uint64_t master = rng.seed();

    run_lanes(n_boot, lanes, [&](std::size_t begin, std::size_t end) {
        for (std::size_t b = begin; b < end; ++b) {
            Rng stream(derive_seed(master, 0x626f6f74ULL + b));
            Matrix c(m, m);
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t pick = stream.uniform_index(n);
                const double* g = samples.samples.row_ptr(pick);
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t s = 0; s < m; ++s) c(r, s) += g[r] * g[s];
            }
            for (double& v : c.raw()) v /= static_cast<double>(n);
            if (max_abs(c) == 0.0) {
                reps[b].skipped = true;
                continue;
            }
            CMatrix cb;
            cb.entries = std::move(c);
            const ActiveSubspace sub = eigendecompose(cb);
            reps[b].dist.resize(n_candidates.size());
            for (std::size_t k = 0; k < n_candidates.size(); ++k) {
                const Matrix blk = sub.eigenvectors.columns(0, n_candidates[k]);
                reps[b].dist[k] = subspace_distance(blk, ref_blocks[k]);
            }
        }
    });

    SubspaceErrorEstimate est;
    est.candidates = n_candidates;
    est.distances.assign(n_candidates.size(), {});
    for (const auto& rep : reps) {
        if (rep.skipped) {
            ++est.skipped_replicates;
            continue;
        }
        for (std::size_t k = 0; k < n_candidates.size(); ++k)
            est.distances[k].push_back(rep.dist[k]);
    }
    est.mean.assign(n_candidates.size(), 0.0);
    est.max.assign(n_candidates.size(), 0.0);
    for (std::size_t k = 0; k < n_candidates.size(); ++k) {
        for (double d : est.distances[k]) {
            est.mean[k] += d;
            est.max[k] = std::max(est.max[k], d);
        }
        if (!est.distances[k].empty()) est.mean[k] /= static_cast<double>(est.distances[k].size());
    }
    return est;
}

GapReport gap_report(const Vec& eigenvalues) {
    GapReport rep;
    const std::size_t m = eigenvalues.size();
    rep.absolute.resize(m > 0 ? m - 1 : 0);
    rep.ratio.resize(rep.absolute.size());
    double best = -1.0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        rep.absolute[i] = eigenvalues[i] - eigenvalues[i + 1];
        const double denom = std::max(eigenvalues[i + 1], 1e-300);
        rep.ratio[i] = eigenvalues[i] / denom;
        if (rep.ratio[i] > best) {
            best = rep.ratio[i];
            rep.flagged_n = i + 1;
        }
    }
    return rep;
}

std::string subspace_to_json(const ActiveSubspace& s, const Provenance& prov) {
    nlohmann::json j;
    j["eigenvalues"] = s.eigenvalues;
    j["dim"] = s.dim();
    j["split"] = s.split;
    j["gap"] = s.gap;
    j["identifiable"] = s.identifiable;
    j["provenance"] = {{"kind", prov.kind == Provenance::Kind::monte_carlo ? "monte_carlo"
                                                                           : "quadrature"},
                       {"detail", prov.detail},
                       {"seed", prov.seed}};
    const GapReport rep = gap_report(s.eigenvalues);
    j["gap_report"] = {{"absolute", rep.absolute}, {"ratio", rep.ratio},
                       {"flagged_n", rep.flagged_n}};
    nlohmann::json w;
    for (std::size_t i = 0; i < s.eigenvectors.rows(); ++i) {
        nlohmann::json row;
        for (std::size_t k = 0; k < s.eigenvectors.cols(); ++k) row.push_back(s.eigenvectors(i, k));
        w.push_back(row);
    }
    j["eigenvectors"] = w;
    return j.dump(2);
}

ActiveSubspace subspace_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ActiveSubspace s;
    s.eigenvalues = j.at("eigenvalues").get<Vec>();
    const auto& w = j.at("eigenvectors");
    const std::size_t m = s.eigenvalues.size();
    if (w.size() != m) throw config_error("subspace json: eigenvector shape mismatch");
    s.eigenvectors = Matrix(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < m; ++k) s.eigenvectors(i, k) = w[i][k].get<double>();
    const std::size_t split = j.value("split", std::size_t{0});
    if (split > 0) return partition(s, split);
    return s;
}

} // namespace asmcmc
