#include "medgmm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "medgmm/baseline.hpp"
#include "medgmm/linalg.hpp"
#include "medgmm/parallel.hpp"
#include "medgmm/rng.hpp"

namespace medgmm {

GmmStack::GmmStack(const Dataset& ds, bool exposure_binary)
    : ds_(&ds), binary_(exposure_binary) {
    layout_.p = ds.p;
    layout_.k = ds.k;
}

void GmmStack::row_moment(Eigen::Index i, const Eigen::VectorXd& phi, Eigen::VectorXd& out) const {
    const Dataset& ds = *ds_;
    const StackedLayout& L = layout_;

    double eta = phi(0);
    for (Eigen::Index q = 0; q < L.p; ++q) eta += phi(1 + q) * ds.x(i, q);
    const double pi = binary_ ? expit(eta) : eta;
    const double w = ds.a(i) - pi;

    const double theta1 = phi(L.theta1_index());
    double q_resid = ds.y(i);  // y - theta2' m
    for (Eigen::Index j = 0; j < L.k; ++j) q_resid -= phi(L.theta2_begin() + j) * ds.m(i, j);
    const double u_resid = q_resid - theta1 * ds.a(i);

    // exposure-model score: (1, x)' (a - pi)
    out(0) = w;
    for (Eigen::Index q = 0; q < L.p; ++q) out(1 + q) = w * ds.x(i, q);

    for (Eigen::Index j = 0; j < L.k; ++j) {
        double r = ds.m(i, j) - phi(L.beta1_begin() + j) * ds.a(i) - phi(L.alpha_begin(j));
        for (Eigen::Index q = 0; q < L.p; ++q) r -= phi(L.alpha_begin(j) + 1 + q) * ds.x(i, q);
        // mediator regression score, covariate part then exposure part
        out(L.alpha_begin(j)) = r;
        for (Eigen::Index q = 0; q < L.p; ++q) out(L.alpha_begin(j) + 1 + q) = r * ds.x(i, q);
        out(L.beta1_begin() + j) = ds.a(i) * r;
        // exposure-residual-weighted outcome moment, mediator row
        out(L.theta2_begin() + j) = w * r * q_resid;
    }
    out(L.theta1_index()) = w * u_resid;
}

void GmmStack::add_row_jacobian(Eigen::Index i, const Eigen::VectorXd& phi,
                                Eigen::MatrixXd& acc) const {
    const Dataset& ds = *ds_;
    const StackedLayout& L = layout_;
    const Eigen::Index d1 = L.gamma_size();
    const double a = ds.a(i);

    Eigen::VectorXd xt(d1);
    xt(0) = 1.0;
    for (Eigen::Index q = 0; q < L.p; ++q) xt(1 + q) = ds.x(i, q);

    const double eta = xt.dot(phi.head(d1));
    const double pi = binary_ ? expit(eta) : eta;
    const double s = binary_ ? pi * (1.0 - pi) : 1.0;  // d pi / d eta
    const double w = a - pi;

    const double theta1 = phi(L.theta1_index());
    double q_resid = ds.y(i);
    for (Eigen::Index j = 0; j < L.k; ++j) q_resid -= phi(L.theta2_begin() + j) * ds.m(i, j);
    const double u_resid = q_resid - theta1 * a;

    const Eigen::MatrixXd xxt = xt * xt.transpose();
    acc.block(0, 0, d1, d1) -= s * xxt;

    for (Eigen::Index j = 0; j < L.k; ++j) {
        const Eigen::Index aj = L.alpha_begin(j);
        const Eigen::Index bj = L.beta1_begin() + j;
        double r = ds.m(i, j) - phi(bj) * a - xt.dot(phi.segment(aj, d1));

        acc.block(aj, aj, d1, d1) -= xxt;
        acc.block(aj, bj, d1, 1) -= a * xt;
        acc.block(bj, aj, 1, d1) -= a * xt.transpose();
        acc(bj, bj) -= a * a;

        const Eigen::Index tj = L.theta2_begin() + j;
        acc.block(tj, 0, 1, d1) -= (s * r * q_resid) * xt.transpose();
        acc.block(tj, aj, 1, d1) -= (w * q_resid) * xt.transpose();
        acc(tj, bj) -= w * q_resid * a;
        for (Eigen::Index q = 0; q < L.k; ++q) acc(tj, L.theta2_begin() + q) -= w * r * ds.m(i, q);
    }

    const Eigen::Index t1 = L.theta1_index();
    acc.block(t1, 0, 1, d1) -= (s * u_resid) * xt.transpose();
    for (Eigen::Index q = 0; q < L.k; ++q) acc(t1, L.theta2_begin() + q) -= w * ds.m(i, q);
    acc(t1, t1) -= w * a;
}

std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> GmmStack::blocks()
    const {
    const StackedLayout& L = layout_;
    return {
        {"propensity score", {0, L.gamma_size()}},
        {"mediator regressions", {L.alpha_begin(0), L.theta2_begin()}},
        {"outcome moments", {L.theta2_begin(), L.dim()}},
    };
}

Eigen::VectorXd GmmStack::pack(const FirstStepFit& first, const ThetaFit& theta) const {
    const StackedLayout& L = layout_;
    Eigen::VectorXd phi(L.dim());
    phi.head(L.gamma_size()) = first.gamma;
    for (Eigen::Index j = 0; j < L.k; ++j) {
        phi.segment(L.alpha_begin(j), L.alpha_size()) = first.alpha.row(j).transpose();
    }
    phi.segment(L.beta1_begin(), L.k) = first.beta1;
    phi.segment(L.theta2_begin(), L.k) = theta.theta2;
    phi(L.theta1_index()) = theta.theta1;
    return phi;
}

StackedFit stacked_sandwich(const Dataset& ds, const FirstStepFit& first, const ThetaFit& theta,
                            const Tolerances& tol, bool df_correction) {
    GmmStack stack(ds, first.exposure_binary);
    const Eigen::VectorXd phi = stack.pack(first, theta);

    SandwichOptions opt;
    opt.fd_check = true;
    opt.fd_step = tol.fd_step;
    opt.fd_rel_tol = tol.fd_rel_tol;
    opt.df_correction = df_correction;
    const SandwichResult s = sandwich_estimate(stack, phi, opt);

    StackedFit fit;
    fit.varphi = phi;
    fit.vcov = s.vcov;
    fit.layout = stack.layout();
    fit.fd_max_rel_err = s.fd_max_rel_err;
    return fit;
}

namespace {

double quadratic_form(const Eigen::MatrixXd& v, const Eigen::VectorXd& grad) {
    return grad.dot(v * grad);
}

std::pair<double, double> wald_interval(double est, double se) {
    return {est - kZ95 * se, est + kZ95 * se};
}

double checked_sqrt_variance(double var, const char* what) {
    if (!(var >= 0.0) || !std::isfinite(var)) {
        throw EstimationError(std::string("negative or non-finite variance computed for ") + what);
    }
    return std::sqrt(var);
}

}  // namespace

EffectReport delta_effects(const FirstStepFit& first, const ThetaFit& theta,
                           const StackedFit& stacked,
                           const std::vector<std::string>& mediator_names) {
    const StackedLayout& L = stacked.layout;
    const Eigen::Index k = L.k;

    EffectReport report;
    report.method = "gmm";
    report.se_method = "sandwich";
    report.nde = theta.theta1;
    report.nie = first.beta1.dot(theta.theta2);

    report.se_nde = checked_sqrt_variance(
        stacked.vcov(L.theta1_index(), L.theta1_index()), "the direct effect");

    // NIE = beta1' theta2: gradient theta2 on the beta1 block, beta1 on the
    // theta2 block, including cross-covariances.
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(L.dim());
    grad.segment(L.beta1_begin(), k) = theta.theta2;
    grad.segment(L.theta2_begin(), k) = first.beta1;
    report.se_nie = checked_sqrt_variance(quadratic_form(stacked.vcov, grad),
                                          "the indirect effect");

    report.ci_nde = wald_interval(report.nde, report.se_nde);
    report.ci_nie = wald_interval(report.nie, report.se_nie);

    for (Eigen::Index j = 0; j < k; ++j) {
        MediatorEffect me;
        me.name = j < static_cast<Eigen::Index>(mediator_names.size())
                      ? mediator_names[j]
                      : "M" + std::to_string(j + 1);
        me.beta1 = first.beta1(j);
        me.theta2 = theta.theta2(j);
        me.product = me.beta1 * me.theta2;
        const Eigen::Index bj = L.beta1_begin() + j;
        const Eigen::Index tj = L.theta2_begin() + j;
        const double var = me.theta2 * me.theta2 * stacked.vcov(bj, bj) +
                           2.0 * me.theta2 * me.beta1 * stacked.vcov(bj, tj) +
                           me.beta1 * me.beta1 * stacked.vcov(tj, tj);
        me.se = checked_sqrt_variance(var, "a mediator contribution");
        report.per_mediator.push_back(std::move(me));
    }
    return report;
}

namespace {

struct PointEffects {
    double nde = 0.0;
    double nie = 0.0;
    Eigen::VectorXd beta1;
    Eigen::VectorXd theta2;
    Eigen::VectorXd products;
};

PointEffects point_effects_gmm(const Dataset& ds, const Tolerances& tol) {
    const FirstStepFit first = fit_first_step(ds, tol);
    const ThetaFit theta = solve_theta(assemble_moment_system(ds, first), tol);
    PointEffects pe;
    pe.nde = theta.theta1;
    pe.nie = first.beta1.dot(theta.theta2);
    pe.beta1 = first.beta1;
    pe.theta2 = theta.theta2;
    pe.products = first.beta1.cwiseProduct(theta.theta2);
    return pe;
}

PointEffects point_effects_regression(const Dataset& ds, const Tolerances& tol) {
    const Eigen::MatrixXd W = build_design(ds, true, true).values;  // [1, A, M, X]
    const Eigen::VectorXd coef = ols_solve(W, ds.y);
    const MediatorFit med = fit_mediator_regressions(ds, tol);
    PointEffects pe;
    pe.nde = coef(1);
    pe.nie = med.beta1.dot(coef.segment(2, ds.k));
    pe.beta1 = med.beta1;
    pe.theta2 = coef.segment(2, ds.k);
    pe.products = med.beta1.cwiseProduct(coef.segment(2, ds.k));
    return pe;
}

Dataset resample_rows(const Dataset& ds, RngStream& rng) {
    Dataset out = ds;
    out.dropped_rows = 0;
    for (Eigen::Index r = 0; r < ds.n; ++r) {
        const Eigen::Index i = rng.next_index(ds.n);
        out.y(r) = ds.y(i);
        out.a(r) = ds.a(i);
        out.m.row(r) = ds.m.row(i);
        out.x.row(r) = ds.x.row(i);
    }
    return out;
}

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

double sample_sd(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (n - 1.0));
}

}  // namespace

EffectReport bootstrap_effects(const Dataset& ds, const ModelSpec& spec, Method method) {
    if (method == Method::both) {
        throw EstimationError("bootstrap_effects expects a single estimator per call");
    }
    const int reps = spec.bootstrap_reps;
    if (reps < 2) {
        throw EstimationError(
            "bootstrap standard errors are undefined for fewer than 2 replicates");
    }

    const bool gmm = method == Method::gmm;
    const PointEffects full = gmm ? point_effects_gmm(ds, spec.tol)
                                  : point_effects_regression(ds, spec.tol);

    std::vector<std::optional<PointEffects>> draws(reps);
    parallel_for_indexed(reps, spec.threads, [&](Eigen::Index r) {
        RngStream rng(spec.seed, static_cast<std::uint64_t>(r), RngStream::kBootstrap);
        const Dataset boot = resample_rows(ds, rng);
        try {
            draws[r] = gmm ? point_effects_gmm(boot, spec.tol)
                           : point_effects_regression(boot, spec.tol);
        } catch (const std::runtime_error&) {
            draws[r] = std::nullopt;  // recorded and excluded
        }
    });

    std::vector<double> nde_draws, nie_draws;
    std::vector<std::vector<double>> product_draws(ds.k);
    for (int r = 0; r < reps; ++r) {
        if (!draws[r]) continue;
        nde_draws.push_back(draws[r]->nde);
        nie_draws.push_back(draws[r]->nie);
        for (Eigen::Index j = 0; j < ds.k; ++j) {
            product_draws[j].push_back(draws[r]->products(j));
        }
    }
    const int used = static_cast<int>(nde_draws.size());
    const int failures = reps - used;
    if (failures > reps / 10) {
        throw EstimationError("bootstrap failed on " + std::to_string(failures) + " of " +
                              std::to_string(reps) +
                              " replicates; the data are too fragile for bootstrap inference");
    }
    if (used < 2) {
        throw EstimationError("fewer than 2 successful bootstrap replicates");
    }

    EffectReport report;
    report.method = gmm ? "gmm" : "regression";
    report.se_method = "bootstrap";
    report.bootstrap_reps_used = used;
    report.bootstrap_failures = failures;
    report.nde = full.nde;
    report.nie = full.nie;
    report.se_nde = sample_sd(nde_draws);
    report.se_nie = sample_sd(nie_draws);
    if (spec.bootstrap_ci == BootstrapCi::wald) {
        report.ci_nde = wald_interval(report.nde, report.se_nde);
        report.ci_nie = wald_interval(report.nie, report.se_nie);
    } else {
        report.ci_nde = {percentile(nde_draws, 0.025), percentile(nde_draws, 0.975)};
        report.ci_nie = {percentile(nie_draws, 0.025), percentile(nie_draws, 0.975)};
    }

    for (Eigen::Index j = 0; j < ds.k; ++j) {
        MediatorEffect me;
        me.name = j < static_cast<Eigen::Index>(ds.mediator_names.size())
                      ? ds.mediator_names[j]
                      : "M" + std::to_string(j + 1);
        me.beta1 = full.beta1(j);
        me.theta2 = full.theta2(j);
        me.product = full.products(j);
        me.se = sample_sd(product_draws[j]);
        report.per_mediator.push_back(std::move(me));
    }
    return report;
}

}  // namespace medgmm
