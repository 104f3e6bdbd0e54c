#include "asmcmc/sampler.hpp"

#include "asmcmc/errors.hpp"
#include "asmcmc/io.hpp"
#include "asmcmc/problems.hpp"
#include "asmcmc/quadrature.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace asmcmc;

namespace {

ActiveSubspace quadratic_subspace(const QuadraticProblem& problem, std::size_t n) {
    const GradientFn g = [&](const Vec& x) { return misfit_gradient(problem, x); };
    return partition(eigendecompose(estimate_c_quadrature(g, 2, 50)), n);
}

} // namespace

TEST_CASE("flat target accepts every proposal") {
    Rng rng(1);
    const Chain chain =
        metropolis_hastings([](const Vec&) { return 0.0; }, {0.0, 0.0}, 5000, 0.5, rng);
    CHECK(chain.acceptance_rate() == 1.0);
    chain.validate();
}

TEST_CASE("1-d standard gaussian target: sample moments") {
    Rng rng(2);
    const auto target = [](const Vec& x) { return -0.5 * x[0] * x[0]; };
    const Chain chain = metropolis_hastings(target, {0.0}, 100000, 0.5, rng);
    double s = 0.0, s2 = 0.0;
    for (const Vec& x : chain.states) {
        s += x[0];
        s2 += x[0] * x[0];
    }
    const double mean = s / chain.length();
    const double var = s2 / chain.length() - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("rejected steps copy the previous state bitwise") {
    Rng rng(3);
    const auto target = [](const Vec& x) { return -8.0 * x[0] * x[0]; };
    const Chain chain = metropolis_hastings(target, {0.0}, 20000, 4.0, rng);
    CHECK(chain.acceptance_rate() < 0.9);
    bool saw_reject = false;
    for (std::size_t k = 1; k < chain.length(); ++k) {
        if (!chain.accepted[k]) {
            saw_reject = true;
            CHECK(chain.states[k] == chain.states[k - 1]);
            CHECK(chain.log_density[k] == chain.log_density[k - 1]);
        }
    }
    CHECK(saw_reject);
}

TEST_CASE("seed determinism: identical chains from identical seeds") {
    const auto target = [](const Vec& x) { return -0.5 * dot(x, x); };
    Rng r1(77), r2(77);
    const Chain a = metropolis_hastings(target, {1.0, -1.0}, 500, 0.3, r1);
    const Chain b = metropolis_hastings(target, {1.0, -1.0}, 500, 0.3, r2);
    for (std::size_t k = 0; k < a.length(); ++k) {
        CHECK(a.states[k] == b.states[k]);
        CHECK(a.accepted[k] == b.accepted[k]);
    }
}

TEST_CASE("non-finite proposal density counts as a rejection") {
    Rng rng(5);
    const auto target = [](const Vec& x) {
        if (x[0] > 0.2) return -std::numeric_limits<double>::infinity();
        return 0.0;
    };
    const Chain chain = metropolis_hastings(target, {0.0}, 5000, 1.0, rng);
    chain.validate();
    for (const Vec& x : chain.states) CHECK(x[0] <= 0.2);
    CHECK(chain.acceptance_rate() < 1.0);
}

TEST_CASE("reversibility: binned transition counts balance on a gaussian target") {
    Rng rng(11);
    const auto target = [](const Vec& x) { return -0.5 * x[0] * x[0]; };
    const Chain chain = metropolis_hastings(target, {0.0}, 200000, 1.0, rng);

    // discrete-grid view of the chain: 8 bins over [-2, 2]
    const auto bin_of = [](double x) {
        const int b = static_cast<int>(std::floor((x + 2.0) / 0.5));
        return std::clamp(b, -1, 8); // outside bins ignored
    };
    Matrix counts(9, 9);
    for (std::size_t k = 1; k < chain.length(); ++k) {
        const int a = bin_of(chain.states[k - 1][0]);
        const int b = bin_of(chain.states[k][0]);
        if (a < 0 || b < 0 || a > 7 || b > 7 || a == b) continue;
        counts(a, b) += 1.0;
    }
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = i + 1; j < 8; ++j) {
            const double fwd = counts(i, j), bwd = counts(j, i);
            if (fwd + bwd < 50.0) continue;
            const double z = std::abs(fwd - bwd) / std::sqrt(fwd + bwd);
            CHECK(z < 5.0);
        }
}

TEST_CASE("as_mcmc with a zero misfit samples the active prior") {
    Matrix m(1, 3);
    const LinearGaussianProblem flat(m, {0.0}, 1.0);
    ActiveSubspace sub;
    sub.eigenvalues = {1.0, 0.0, 0.0};
    sub.eigenvectors = Matrix::identity(3);
    sub = partition(sub, 1);
    const MisfitSurrogate s = make_surrogate(flat, sub, 3, InnerRule::monte_carlo);
    Rng rng(13);
    const Chain chain = as_mcmc(s, {0.0}, 100000, 0.5, rng);
    double acc = 0.0, acc2 = 0.0;
    for (const Vec& y : chain.states) {
        acc += y[0];
        acc2 += y[0] * y[0];
    }
    const double mean = acc / chain.length();
    const double var = acc2 / chain.length() - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("forward-model call accounting: M evaluations per step") {
    const QuadraticProblem problem(0.01, 0.9, 0.1);
    const ActiveSubspace sub = quadratic_subspace(problem, 1);

    // gauss-hermite rule with 10 nodes: 10 forward calls per step
    const MisfitSurrogate gh = make_surrogate(problem, sub, 10, InnerRule::gauss_hermite);
    problem.reset_forward_calls();
    Rng rng(17);
    const std::size_t n_steps = 500;
    const Chain chain = as_mcmc(gh, {0.0}, n_steps, 0.5, rng);
    CHECK(problem.forward_calls() == static_cast<long long>(10 * n_steps));

    // monte carlo rule with M = 7
    const MisfitSurrogate mc = make_surrogate(problem, sub, 7, InnerRule::monte_carlo);
    problem.reset_forward_calls();
    Rng rng2(18);
    const Chain chain2 = as_mcmc(mc, {0.0}, 200, 0.5, rng2);
    CHECK(problem.forward_calls() == static_cast<long long>(7 * 200));
}

TEST_CASE("reconstruction: lifted states, inactive moments, zero forward calls") {
    const QuadraticProblem problem(0.01, 0.9, 0.1);
    const ActiveSubspace sub = quadratic_subspace(problem, 1);
    const MisfitSurrogate s = make_surrogate(problem, sub, 10, InnerRule::gauss_hermite);
    Rng rng(19);
    const Chain active = as_mcmc(s, {0.0}, 1000, 0.5, rng);

    problem.reset_forward_calls();
    Rng rec_rng(23);
    const ReconstructedChain rec = reconstruct(active, sub, 10, rec_rng);
    CHECK(problem.forward_calls() == 0); // no model evaluations in the lift
    CHECK(rec.states.size() == active.length() * 10);

    // active coordinates reproduce the chain: W1^T x == y
    for (std::size_t k = 0; k < 50; ++k) {
        const Vec& x = rec.states[k * 10 + 3];
        const Vec y = matvec_transposed(sub.w1, x);
        CHECK(std::abs(y[0] - active.states[k][0]) < 1e-12);
    }

    // inactive marginal is a standard gaussian
    double acc = 0.0, acc2 = 0.0;
    for (const Vec& x : rec.states) {
        const Vec z = matvec_transposed(sub.w2, x);
        acc += z[0];
        acc2 += z[0] * z[0];
    }
    const double mean = acc / rec.states.size();
    const double var = acc2 / rec.states.size() - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("reconstruction test hook: forced-zero inactive draws stay in span(W1)") {
    const QuadraticProblem problem(0.01, 0.9, 0.1);
    const ActiveSubspace sub = quadratic_subspace(problem, 1);
    const MisfitSurrogate s = make_surrogate(problem, sub, 10, InnerRule::gauss_hermite);
    Rng rng(29);
    const Chain active = as_mcmc(s, {0.5}, 200, 0.5, rng);
    Rng rec_rng(31);
    const ReconstructedChain rec =
        reconstruct(active, sub, 1, rec_rng,
                    [](Rng&, std::size_t zdim) { return Vec(zdim, 0.0); });
    for (const Vec& x : rec.states) {
        const Vec z = matvec_transposed(sub.w2, x);
        CHECK(std::abs(z[0]) < 1e-14);
    }
}

TEST_CASE("zero-step chains are empty; chain csv round trip") {
    Rng rng(37);
    const Chain empty =
        metropolis_hastings([](const Vec&) { return 0.0; }, {0.0}, 0, 0.5, rng);
    CHECK(empty.length() == 0);

    const auto target = [](const Vec& x) { return -0.5 * dot(x, x); };
    Rng rng2(38);
    const Chain chain = metropolis_hastings(target, {0.2, -0.4}, 100, 0.5, rng2);
    const std::string path = std::filesystem::temp_directory_path() / "asmcmc_chain_test.csv";
    write_chain_csv(path, chain);
    const Chain back = read_chain_csv(path);
    REQUIRE(back.length() == chain.length());
    for (std::size_t k = 0; k < chain.length(); ++k) {
        CHECK(back.states[k] == chain.states[k]);
        CHECK(back.log_density[k] == chain.log_density[k]);
        CHECK(back.accepted[k] == chain.accepted[k]);
    }
    std::remove(path.c_str());
}

TEST_CASE("malformed chain csv reports the line number") {
    const std::string path = std::filesystem::temp_directory_path() / "asmcmc_bad_chain.csv";
    write_text_file(path, "step,x0,log_density,accepted\n0,1.0,-0.5,1\n1,oops,-0.5,1\n");
    CHECK_THROWS_WITH_AS(read_chain_csv(path), doctest::Contains("line 3"), config_error);
    std::remove(path.c_str());
}

TEST_CASE("stepper resume continues the exact stream") {
    const auto target = [](const Vec& x, Rng&) { return -0.5 * dot(x, x); };
    Rng rng(41);
    MHStepper full(target, {0.0, 0.0}, 0.4, rng);
    std::vector<Vec> straight;
    for (int k = 0; k < 200; ++k) {
        full.step();
        straight.push_back(full.state());
    }

    Rng rng2(41);
    MHStepper first(target, {0.0, 0.0}, 0.4, rng2);
    for (int k = 0; k < 90; ++k) first.step();
    const std::string state = first.rng().save_state();
    Rng restored(0);
    restored.load_state(state);
    MHStepper second =
        MHStepper::resumed(target, first.state(), first.log_density(), 0.4, restored);
    for (int k = 90; k < 200; ++k) {
        second.step();
        CHECK(second.state() == straight[k]);
    }
}

TEST_CASE("active chain sustains a larger proposal variance on the pde problem") {
    // The 2-d active chain sustains 3x the vanilla proposal variance with
    // comparable acceptance; the exact rates depend on problem scale.
    const PoissonKLProblem pde(16, 8, 0.02, 3);
    Rng rs(7);
    auto [c, samples] = estimate_c_monte_carlo(
        [&](const Vec& x) { return misfit_gradient(pde, x); },
        [&](Rng& r) { return r.gaussian_vector(pde.dim()); }, 150, rs);
    const ActiveSubspace sub = partition(eigendecompose(c), 2);

    Rng rv(8);
    const auto vt = [&](const Vec& x) { return -misfit(pde, x) + log_standard_gaussian(x); };
    const Chain vanilla = metropolis_hastings(vt, Vec(pde.dim(), 0.0), 4000, 0.1, rv);

    const MisfitSurrogate s = make_surrogate(pde, sub, 10, InnerRule::monte_carlo);
    Rng ra(9);
    const Chain active = as_mcmc(s, Vec(2, 0.0), 1000, 0.3, ra);

    CHECK(active.acceptance_rate() > 0.3 * vanilla.acceptance_rate());
    CHECK(active.acceptance_rate() > 0.05);
    CHECK(active.acceptance_rate() < 0.95);
}

TEST_CASE("invalid sampler inputs") {
    Rng rng(1);
    CHECK_THROWS_AS(
        metropolis_hastings([](const Vec&) { return 0.0; }, {0.0}, 10, 0.0, rng),
        config_error);
    CHECK_THROWS_AS(metropolis_hastings(
                        [](const Vec&) { return std::numeric_limits<double>::quiet_NaN(); },
                        {0.0}, 10, 0.5, rng),
                    numeric_error);
}
