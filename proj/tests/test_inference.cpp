#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "medgmm/inference.hpp"
#include "medgmm/mestimation.hpp"
#include "medgmm/rng.hpp"
#include "medgmm/simulation.hpp"
#include "test_support.hpp"

using namespace medgmm;

namespace {

struct FullFit {
    FirstStepFit first;
    ThetaFit theta;
    StackedFit stacked;
};

FullFit full_fit(const Dataset& ds) {
    FullFit out;
    out.first = fit_first_step(ds);
    out.theta = solve_theta(assemble_moment_system(ds, out.first));
    out.stacked = stacked_sandwich(ds, out.first, out.theta);
    return out;
}

}  // namespace

TEST_CASE("vcov is symmetric with nonnegative diagonal") {
    RngStream rng(51, 0, RngStream::kGeneric);
    const Dataset ds = testsupport::random_dataset(rng, 250, 2, 2);
    const FullFit fit = full_fit(ds);
    CHECK((fit.stacked.vcov - fit.stacked.vcov.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(fit.stacked.vcov.diagonal().minCoeff() >= 0.0);
    CHECK(fit.stacked.fd_max_rel_err <= 1e-4);
}

TEST_CASE("duplicating every row exactly halves the covariance") {
    RngStream rng(52, 0, RngStream::kGeneric);
    const Dataset ds = testsupport::random_dataset(rng, 100, 2, 1);
    const FullFit base = full_fit(ds);
    const FullFit dup = full_fit(testsupport::duplicate_rows(ds));

    // Identical parameter estimates, bitwise, because every empirical mean
    // reduces through the same midpoint-splitting tree.
    CHECK((base.stacked.varphi - dup.stacked.varphi).cwiseAbs().maxCoeff() == 0.0);
    CHECK((2.0 * dup.stacked.vcov - base.stacked.vcov).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic bread matches a test-side finite difference") {
    RngStream rng(53, 0, RngStream::kGeneric);
    for (int trial = 0; trial < 3; ++trial) {
        const Dataset ds = testsupport::random_dataset(rng, 150, 2, 1);
        const FirstStepFit first = fit_first_step(ds);
        const ThetaFit theta = solve_theta(assemble_moment_system(ds, first));

        const GmmStack stack(ds, first.exposure_binary);
        const Eigen::VectorXd phi = stack.pack(first, theta);
        const Eigen::MatrixXd analytic = moment_jacobian_mean(stack, phi);
        const Eigen::MatrixXd fd = moment_jacobian_fd(stack, phi, 1e-6);
        const double scale = 1.0 + analytic.cwiseAbs().maxCoeff();
        CHECK((analytic - fd).cwiseAbs().maxCoeff() / scale < 1e-4);
    }
}

TEST_CASE("delta method: K=1 closed form matches the general path") {
    RngStream rng(54, 0, RngStream::kGeneric);
    const Dataset ds = testsupport::random_dataset(rng, 200, 1, 1);
    const FullFit fit = full_fit(ds);
    const EffectReport report =
        delta_effects(fit.first, fit.theta, fit.stacked, ds.mediator_names);

    const StackedLayout& L = fit.stacked.layout;
    const double b = fit.first.beta1(0);
    const double t = fit.theta.theta2(0);
    const double vb = fit.stacked.vcov(L.beta1_begin(), L.beta1_begin());
    const double vt = fit.stacked.vcov(L.theta2_begin(), L.theta2_begin());
    const double cbt = fit.stacked.vcov(L.beta1_begin(), L.theta2_begin());
    const double closed = t * t * vb + b * b * vt + 2.0 * b * t * cbt;
    CHECK(report.se_nie * report.se_nie == doctest::Approx(closed).epsilon(1e-12));
    CHECK(report.nie == doctest::Approx(b * t));
    CHECK(report.se_nde ==
          doctest::Approx(std::sqrt(fit.stacked.vcov(L.theta1_index(), L.theta1_index()))));
    CHECK(report.ci_nde.first == report.nde - kZ95 * report.se_nde);
    CHECK(report.ci_nde.second == report.nde + kZ95 * report.se_nde);
}

TEST_CASE("delta method: zero beta1 reduces the NIE gradient") {
    RngStream rng(55, 0, RngStream::kGeneric);
    const Dataset ds = testsupport::random_dataset(rng, 150, 2, 1);
    FullFit fit = full_fit(ds);
    fit.first.beta1.setZero();
    fit.stacked.varphi.segment(fit.stacked.layout.beta1_begin(), 2).setZero();
    const EffectReport report =
        delta_effects(fit.first, fit.theta, fit.stacked, ds.mediator_names);
    CHECK(report.nie == 0.0);

    const StackedLayout& L = fit.stacked.layout;
    const Eigen::MatrixXd vbb = fit.stacked.vcov.block(L.beta1_begin(), L.beta1_begin(), 2, 2);
    const double expected = fit.theta.theta2.dot(vbb * fit.theta.theta2);
    CHECK(report.se_nie * report.se_nie == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bootstrap determinism and replicate demands") {
    SimConfig config;
    config.n = 150;
    config.eta = 0.5;
    config.delta = 2.0;
    config.seed = 8;
    const Dataset ds = generate_dataset(config, 0);

    ModelSpec spec;
    spec.bootstrap_reps = 60;
    spec.seed = 17;

    spec.bootstrap_reps = 1;
    CHECK_THROWS_AS(bootstrap_effects(ds, spec, Method::gmm), EstimationError);

    spec.bootstrap_reps = 60;
    const EffectReport a = bootstrap_effects(ds, spec, Method::gmm);
    const EffectReport b = bootstrap_effects(ds, spec, Method::gmm);
    CHECK(a.nde == b.nde);
    CHECK(a.se_nde == b.se_nde);
    CHECK(a.se_nie == b.se_nie);
    CHECK(a.ci_nie.first == b.ci_nie.first);

    spec.threads = 4;
    const EffectReport c = bootstrap_effects(ds, spec, Method::gmm);
    CHECK(a.se_nde == c.se_nde);
    CHECK(a.se_nie == c.se_nie);

    spec.threads = 1;
    spec.seed = 18;
    const EffectReport d = bootstrap_effects(ds, spec, Method::gmm);
    CHECK(a.se_nde != d.se_nde);
}

TEST_CASE("bootstrap excludes failed replicates and errors past 10%") {
    // Five zeros and one one: about a third of resamples draw a constant
    // exposure and fail, far past the 10% gate.
    Dataset ds;
    ds.n = 6;
    ds.k = 1;
    ds.p = 0;
    ds.exposure_binary = true;
    ds.a.resize(6);
    ds.a << 0, 0, 0, 0, 0, 1;
    ds.y.resize(6);
    ds.y << 0.3, 1.2, -0.4, 0.9, 0.1, 2.0;
    ds.m.resize(6, 1);
    ds.m << 0.2, 1.0, -0.1, 0.8, 0.4, 1.9;
    ds.x.resize(6, 0);

    ModelSpec spec;
    spec.bootstrap_reps = 100;
    spec.seed = 3;
    CHECK_THROWS_WITH_AS(bootstrap_effects(ds, spec, Method::gmm),
                         doctest::Contains("fragile"), EstimationError);
}

TEST_CASE("percentile intervals are ordered and differ from Wald") {
    SimConfig config;
    config.n = 200;
    config.eta = 0.0;
    config.delta = 5.0;
    config.seed = 5;
    const Dataset ds = generate_dataset(config, 2);

    ModelSpec spec;
    spec.bootstrap_reps = 80;
    spec.seed = 4;
    spec.bootstrap_ci = BootstrapCi::percentile;
    const EffectReport report = bootstrap_effects(ds, spec, Method::regression);
    CHECK(report.ci_nde.first < report.ci_nde.second);
    CHECK(report.ci_nie.first < report.ci_nie.second);
    CHECK(report.bootstrap_reps_used + report.bootstrap_failures == 80);
}

TEST_CASE("sandwich and bootstrap standard errors agree loosely at moderate n") {
    SimConfig config;
    config.n = 1500;
    config.eta = 0.5;
    config.delta = 5.0;
    config.seed = 31;
    const Dataset ds = generate_dataset(config, 0);

    const FullFit fit = full_fit(ds);
    const EffectReport sandwich =
        delta_effects(fit.first, fit.theta, fit.stacked, ds.mediator_names);

    ModelSpec spec;
    spec.bootstrap_reps = 300;
    spec.seed = 7;
    spec.threads = 4;
    const EffectReport boot = bootstrap_effects(ds, spec, Method::gmm);

    CHECK(std::abs(boot.se_nde - sandwich.se_nde) / sandwich.se_nde < 0.25);
    CHECK(std::abs(boot.se_nie - sandwich.se_nie) / sandwich.se_nie < 0.25);
}
