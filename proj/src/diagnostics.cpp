#include "asmcmc/diagnostics.hpp"

#include "asmcmc/errors.hpp"
#include "asmcmc/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace asmcmc {

namespace {

constexpr std::size_t kEssLagCap = 2000;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double mean_of(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

Vec autocorrelation(const Vec& series, std::size_t max_lag) {
    const std::size_t n = series.size();
    if (n <= max_lag)
        throw config_error("autocorrelation: series length must exceed max_lag");
    const double mu = mean_of(series);
    Vec centered(n);
    for (std::size_t t = 0; t < n; ++t) centered[t] = series[t] - mu;
    double c0 = 0.0;
    for (double x : centered) c0 += x * x;
    c0 /= static_cast<double>(n);
    if (c0 == 0.0) throw numeric_error("autocorrelation: zero-variance series");

    Vec rho(max_lag + 1, 0.0);
    rho[0] = 1.0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double ck = 0.0;
        const double* a = centered.data();
        const double* b = centered.data() + k;
        const std::size_t len = n - k;
        for (std::size_t t = 0; t < len; ++t) ck += a[t] * b[t];
        rho[k] = ck / (static_cast<double>(n) * c0);
    }
    return rho;
}

EssResult effective_sample_size(const Vec& series) {
    const std::size_t n = series.size();
    if (n < 2) throw config_error("effective_sample_size: series too short");
    EssResult out;
    std::size_t cap = kEssLagCap;
    if (n < kEssLagCap + 1) {
        cap = n - 1;
        out.truncated = true;
    }
    const Vec rho = autocorrelation(series, cap);
    double s = 0.0;
    for (std::size_t k = 1; k <= cap; ++k) s += rho[k];
    out.denominator = 1.0 + 2.0 * s;
    if (out.denominator < 1.0) {
        out.denominator = 1.0;
        out.floored = true;
    }
    out.ess = static_cast<double>(n) / out.denominator;
    return out;
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw config_error("normal_quantile: p must be in (0,1)");
    // Acklam's rational approximation, refined by one Halley step.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= phigh) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

BatchMeansCI batch_means_ci(const Vec& series, double theta, double level) {
    const std::size_t n = series.size();
    if (n < 100) throw config_error("batch_means_ci: need at least 100 samples");
    if (!(theta > 0.5 && theta < 1.0))
        throw config_error("batch_means_ci: theta must be in (1/2, 1)");
    if (!(level > 0.0 && level < 1.0))
        throw config_error("batch_means_ci: level must be in (0, 1)");

    BatchMeansCI out;
    // nudge before floor so exact powers (e.g. 1e6^(2/3) = 1e4) are not
    // truncated by pow() roundoff
    out.batch_size =
        static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), theta) + 1e-9));
    out.n_batches = n / out.batch_size;
    if (out.n_batches < 2) throw config_error("batch_means_ci: fewer than 2 batches");

    const double mu = mean_of(series);
    out.center = mu;
    double var_bm = 0.0;
    for (std::size_t b = 0; b < out.n_batches; ++b) {
        double bm = 0.0;
        for (std::size_t t = b * out.batch_size; t < (b + 1) * out.batch_size; ++t)
            bm += series[t];
        bm /= static_cast<double>(out.batch_size);
        var_bm += (bm - mu) * (bm - mu);
    }
    // sigma^2_bm = b_n / (a_n - 1) * sum (bm - mu)^2; se of the mean.
    var_bm *= static_cast<double>(out.batch_size) / static_cast<double>(out.n_batches - 1);
    out.se = std::sqrt(var_bm / static_cast<double>(n));
    const double z = normal_quantile(0.5 + level / 2.0);
    out.lower = mu - z * out.se;
    out.upper = mu + z * out.se;
    return out;
}

BatchMeansCI variance_batch_means_ci(const Vec& series, double theta, double level) {
    const double mu = mean_of(series);
    Vec sq(series.size());
    for (std::size_t t = 0; t < series.size(); ++t)
        sq[t] = (series[t] - mu) * (series[t] - mu);
    return batch_means_ci(sq, theta, level);
}

std::vector<CovStudyRow> coefficient_of_variation_study(const BayesProblem& problem,
                                                        const ActiveSubspace& subspace,
                                                        const std::vector<std::size_t>& m_list,
                                                        std::size_t n_points, Rng& rng) {
    if (m_list.empty()) throw config_error("cov study: M list must be nonempty");
    if (subspace.split == 0) throw config_error("cov study: subspace partition not set");
    const std::size_t dim = problem.dim();
    const std::size_t zdim = dim - subspace.split;

    std::vector<CovStudyRow> rows;
    rows.reserve(m_list.size());
    for (std::size_t m : m_list) rows.push_back({m, 0.0, 0.0, 0});

    std::vector<Vec> per_point(m_list.size());
    for (std::size_t p = 0; p < n_points; ++p) {
        const Vec x = rng.gaussian_vector(dim);
        const Vec y = matvec_transposed(subspace.w1, x);
        for (std::size_t mi = 0; mi < m_list.size(); ++mi) {
            const std::size_t m = m_list[mi];
            // The sd needs two draws even when the estimate uses one.
            const std::size_t draws = std::max<std::size_t>(m, 2);
            Vec f(draws);
            for (std::size_t i = 0; i < draws; ++i) {
                const Vec z = rng.gaussian_vector(zdim);
                Vec xi(dim, 0.0);
                for (std::size_t r = 0; r < dim; ++r) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < subspace.w1.cols(); ++j)
                        s += subspace.w1(r, j) * y[j];
                    for (std::size_t j = 0; j < zdim; ++j) s += subspace.w2(r, j) * z[j];
                    xi[r] = s;
                }
                f[i] = misfit(problem, xi);
            }
            double ghat = 0.0;
            for (std::size_t i = 0; i < m; ++i) ghat += f[i];
            ghat /= static_cast<double>(m);
            if (ghat == 0.0) {
                ++rows[mi].excluded_points;
                continue;
            }
            const double fbar = mean_of(f);
            double ss = 0.0;
            for (double v : f) ss += (v - fbar) * (v - fbar);
            const double sd = std::sqrt(ss / static_cast<double>(draws - 1));
            per_point[mi].push_back(sd / (std::sqrt(static_cast<double>(m)) * ghat));
        }
    }
    for (std::size_t mi = 0; mi < m_list.size(); ++mi) {
        Vec& vals = per_point[mi];
        if (vals.empty()) continue;
        for (double v : vals) rows[mi].avg_cov += v;
        rows[mi].avg_cov /= static_cast<double>(vals.size());
        std::sort(vals.begin(), vals.end());
        const std::size_t h = vals.size() / 2;
        rows[mi].median_cov =
            (vals.size() % 2 == 1) ? vals[h] : 0.5 * (vals[h - 1] + vals[h]);
    }
    return rows;
}

double silverman_bandwidth(double sd, std::size_t n, std::size_t dim) {
    const double d = static_cast<double>(dim);
    const double factor = std::pow(4.0 / (d + 2.0), 1.0 / (d + 4.0));
    return sd * factor * std::pow(static_cast<double>(n), -1.0 / (d + 4.0));
}

namespace {

double sample_sd(const Vec& v) {
    const double mu = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mu) * (x - mu);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace

Vec kde1d(const Vec& samples, const Grid1D& grid) {
    if (samples.size() < 30) throw config_error("kde: need at least 30 samples");
    const double sd = sample_sd(samples);
    if (sd == 0.0) throw numeric_error("kde: degenerate (zero-variance) data");
    const double h = silverman_bandwidth(sd, samples.size(), 1);
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * M_PI));
    Vec density(grid.count, 0.0);
    for (std::size_t i = 0; i < grid.count; ++i) {
        const double g = grid.point(i);
        double s = 0.0;
        for (double x : samples) {
            const double u = (g - x) / h;
            s += std::exp(-0.5 * u * u);
        }
        density[i] = norm * s;
    }
    return density;
}

Matrix kde2d(const Matrix& samples, const Grid1D& grid_x, const Grid1D& grid_y) {
    if (samples.cols() != 2) throw config_error("kde2d: samples must have 2 columns");
    if (samples.rows() < 30) throw config_error("kde: need at least 30 samples");
    const std::size_t n = samples.rows();
    Vec col0(n), col1(n);
    for (std::size_t i = 0; i < n; ++i) {
        col0[i] = samples(i, 0);
        col1[i] = samples(i, 1);
    }
    const double sd0 = sample_sd(col0), sd1 = sample_sd(col1);
    if (sd0 == 0.0 || sd1 == 0.0) throw numeric_error("kde: degenerate (zero-variance) data");
    const double hx = silverman_bandwidth(sd0, n, 2);
    const double hy = silverman_bandwidth(sd1, n, 2);
    const double norm = 1.0 / (static_cast<double>(n) * hx * hy * 2.0 * M_PI);

    Matrix density(grid_x.count, grid_y.count);
    for (std::size_t i = 0; i < grid_x.count; ++i) {
        const double gx = grid_x.point(i);
        for (std::size_t j = 0; j < grid_y.count; ++j) {
            const double gy = grid_y.point(j);
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double ux = (gx - col0[k]) / hx;
                const double uy = (gy - col1[k]) / hy;
                s += std::exp(-0.5 * (ux * ux + uy * uy));
            }
            density(i, j) = norm * s;
        }
    }
    return density;
}

double kl_to_standard_gaussian(const Vec& series) {
    const double sd = sample_sd(series);
    const double mu = mean_of(series);
    Grid1D grid;
    grid.lo = std::min(mu - 5.0 * sd, -6.0);
    grid.hi = std::max(mu + 5.0 * sd, 6.0);
    grid.count = 512;
    const Vec p = kde1d(series, grid);
    const double dx = grid.step();
    double mass = 0.0;
    for (std::size_t i = 0; i < grid.count; ++i) {
        const double w = (i == 0 || i + 1 == grid.count) ? 0.5 : 1.0;
        mass += w * p[i] * dx;
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < grid.count; ++i) {
        const double pi = p[i] / mass;
        if (pi <= 0.0) continue;
        const double x = grid.point(i);
        const double log_phi = -0.5 * (kLog2Pi + x * x);
        const double w = (i == 0 || i + 1 == grid.count) ? 0.5 : 1.0;
        kl += w * pi * (std::log(pi) - log_phi) * dx;
    }
    return kl;
}

namespace {

struct GridDensity {
    Matrix values; // normalized on the grid
    double raw_mass = 0.0;
};

double trapezoid_weight(std::size_t i, std::size_t count) {
    return (i == 0 || i + 1 == count) ? 0.5 : 1.0;
}

GridDensity normalize_on_grid(const std::function<double(const Vec&)>& log_unnorm,
                              const Grid2D& grid) {
    Matrix vals(grid.x.count, grid.y.count);
    double max_log = -std::numeric_limits<double>::infinity();
    Vec point(2);
    for (std::size_t i = 0; i < grid.x.count; ++i) {
        point[0] = grid.x.point(i);
        for (std::size_t j = 0; j < grid.y.count; ++j) {
            point[1] = grid.y.point(j);
            const double lp = log_unnorm(point);
            vals(i, j) = lp;
            max_log = std::max(max_log, lp);
        }
    }
    if (!std::isfinite(max_log)) throw numeric_error("hellinger: log density not finite on grid");
    const double cell = grid.x.step() * grid.y.step();
    double mass = 0.0, boundary_mass = 0.0;
    for (std::size_t i = 0; i < grid.x.count; ++i)
        for (std::size_t j = 0; j < grid.y.count; ++j) {
            const double v = std::exp(vals(i, j) - max_log);
            vals(i, j) = v;
            const double w = trapezoid_weight(i, grid.x.count) * trapezoid_weight(j, grid.y.count);
            mass += w * v * cell;
            if (i == 0 || j == 0 || i + 1 == grid.x.count || j + 1 == grid.y.count)
                boundary_mass += w * v * cell;
        }
    if (boundary_mass > 1e-3 * mass)
        throw numeric_error("hellinger: grid too small, boundary carries " +
                            format_double(boundary_mass / mass) + " of the mass");
    GridDensity out;
    out.raw_mass = mass * std::exp(max_log);
    for (double& v : vals.raw()) v /= mass;
    out.values = std::move(vals);
    return out;
}

void check_grid_extent(const Grid2D& grid) {
    if (grid.x.count < 16 || grid.y.count < 16)
        throw config_error("hellinger: grid too coarse");
    if (grid.x.lo > -6.0 || grid.x.hi < 6.0 || grid.y.lo > -6.0 || grid.y.hi < 6.0)
        throw config_error("hellinger: grid must cover at least 6 prior standard deviations");
}

} // namespace

double hellinger_grid(const std::function<double(const Vec&)>& log_p_unnorm,
                      const std::function<double(const Vec&)>& log_q_unnorm,
                      const Grid2D& grid) {
    check_grid_extent(grid);
    const GridDensity p = normalize_on_grid(log_p_unnorm, grid);
    const GridDensity q = normalize_on_grid(log_q_unnorm, grid);
    const double cell = grid.x.step() * grid.y.step();
    double h2 = 0.0;
    for (std::size_t i = 0; i < grid.x.count; ++i)
        for (std::size_t j = 0; j < grid.y.count; ++j) {
            const double w = trapezoid_weight(i, grid.x.count) * trapezoid_weight(j, grid.y.count);
            const double diff = std::sqrt(p.values(i, j)) - std::sqrt(q.values(i, j));
            h2 += 0.5 * w * diff * diff * cell;
        }
    return std::sqrt(std::clamp(h2, 0.0, 1.0));
}

double theorem_bound(double l_constant, const Vec& eigenvalues, std::size_t n,
                     std::optional<std::size_t> inner_m, double subspace_error) {
    if (n < 1 || n >= eigenvalues.size()) throw config_error("theorem_bound: bad split");
    double leading = 0.0, trailing = 0.0;
    for (std::size_t i = 0; i < eigenvalues.size(); ++i)
        (i < n ? leading : trailing) += std::max(eigenvalues[i], 0.0);
    const double m_factor =
        inner_m ? 1.0 + 1.0 / std::sqrt(static_cast<double>(*inner_m)) : 1.0;
    // Poincare constant 1 for the standard gaussian prior.
    return l_constant * m_factor * (subspace_error * std::sqrt(leading) + std::sqrt(trailing));
}

HellingerResult hellinger_vs_posterior_2d(const std::function<double(const Vec&)>& misfit_fn,
                                          const std::function<double(const Vec&)>& approx_misfit_fn,
                                          const Grid2D& grid, const Vec& eigenvalues,
                                          std::size_t n, std::optional<std::size_t> inner_m,
                                          double subspace_error) {
    check_grid_extent(grid);
    const auto log_prior = [](const Vec& x) {
        return -0.5 * (2.0 * kLog2Pi + x[0] * x[0] + x[1] * x[1]);
    };
    HellingerResult out;
    out.distance = hellinger_grid(
        [&](const Vec& x) { return -misfit_fn(x) + log_prior(x); },
        [&](const Vec& x) { return -approx_misfit_fn(x) + log_prior(x); }, grid);

    // c_pos, c_pi and E[f] under the prior by the same trapezoid rule.
    const double cell = grid.x.step() * grid.y.step();
    double c_pos = 0.0, c_pi = 0.0, ef = 0.0;
    Vec point(2);
    for (std::size_t i = 0; i < grid.x.count; ++i) {
        point[0] = grid.x.point(i);
        for (std::size_t j = 0; j < grid.y.count; ++j) {
            point[1] = grid.y.point(j);
            const double w = trapezoid_weight(i, grid.x.count) *
                             trapezoid_weight(j, grid.y.count) * cell;
            const double pri = std::exp(log_prior(point));
            const double f = misfit_fn(point);
            const double g = approx_misfit_fn(point);
            c_pos += w * std::exp(-f) * pri;
            c_pi += w * std::exp(-g) * pri;
            ef += w * f * pri;
        }
    }
    out.c_pos = c_pos;
    out.c_pi = c_pi;
    out.l_constant = std::sqrt(0.125 / std::sqrt(c_pos * std::exp(-ef)));
    for (std::size_t i = n; i < eigenvalues.size(); ++i)
        out.trailing_eigensum += std::max(eigenvalues[i], 0.0);
    out.bound = theorem_bound(out.l_constant, eigenvalues, n, inner_m, subspace_error);
    return out;
}

std::string DiagnosticsReport::to_json() const {
    nlohmann::json j;
    j["chain_id"] = chain_id;
    j["n_steps"] = n_steps;
    j["dim"] = dim;
    j["acceptance"] = acceptance;
    j["min_ess"] = min_ess;
    nlohmann::json per;
    for (const auto& c : coords) {
        nlohmann::json cj;
        cj["ess"] = c.ess.ess;
        cj["ess_truncated"] = c.ess.truncated;
        cj["ess_floored"] = c.ess.floored;
        cj["mean"] = c.mean_ci.center;
        cj["mean_ci"] = {c.mean_ci.lower, c.mean_ci.upper};
        cj["variance"] = c.var_ci.center;
        cj["variance_ci"] = {c.var_ci.lower, c.var_ci.upper};
        cj["acf"] = c.acf;
        per.push_back(cj);
    }
    j["coordinates"] = per;
    return j.dump(2);
}

DiagnosticsReport diagnose_states(const std::vector<Vec>& states,
                                  const std::vector<unsigned char>& accepted,
                                  const std::string& chain_id, double theta, double level) {
    if (states.empty()) throw config_error("diagnose: empty chain");
    DiagnosticsReport rep;
    rep.chain_id = chain_id;
    rep.n_steps = states.size();
    rep.dim = states.front().size();
    if (!accepted.empty()) {
        double s = 0.0;
        for (unsigned char a : accepted) s += a ? 1.0 : 0.0;
        rep.acceptance = s / static_cast<double>(accepted.size());
    }
    rep.min_ess = std::numeric_limits<double>::infinity();
    Vec series(states.size());
    for (std::size_t c = 0; c < rep.dim; ++c) {
        for (std::size_t t = 0; t < states.size(); ++t) series[t] = states[t][c];
        CoordinateDiagnostics cd;
        cd.ess = effective_sample_size(series);
        cd.mean_ci = batch_means_ci(series, theta, level);
        cd.var_ci = variance_batch_means_ci(series, theta, level);
        cd.acf = autocorrelation(series, std::min<std::size_t>(50, states.size() - 1));
        rep.min_ess = std::min(rep.min_ess, cd.ess.ess);
        rep.coords.push_back(cd);
    }
    return rep;
}

} // namespace asmcmc
