#include "medgmm/first_step.hpp"

#include <cmath>

#include "medgmm/linalg.hpp"
#include "medgmm/reduce.hpp"

namespace medgmm {

namespace {

double mean_log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& a,
                           const Eigen::VectorXd& gamma) {
    return pairwise_mean<double>(X.rows(), 0.0, [&](Eigen::Index i, double& acc) {
        const double eta = X.row(i).dot(gamma);
        acc += a(i) * eta - log1pexp(eta);
    });
}

Eigen::VectorXd mean_score(const Eigen::MatrixXd& X, const Eigen::VectorXd& a,
                           const Eigen::VectorXd& gamma) {
    const Eigen::Index d = X.cols();
    return pairwise_mean<Eigen::VectorXd>(
        X.rows(), Eigen::VectorXd::Zero(d).eval(), [&](Eigen::Index i, Eigen::VectorXd& acc) {
            acc += X.row(i).transpose() * (a(i) - expit(X.row(i).dot(gamma)));
        });
}

Eigen::MatrixXd mean_information(const Eigen::MatrixXd& X, const Eigen::VectorXd& gamma) {
    const Eigen::Index d = X.cols();
    return pairwise_mean<Eigen::MatrixXd>(
        X.rows(), Eigen::MatrixXd::Zero(d, d).eval(), [&](Eigen::Index i, Eigen::MatrixXd& acc) {
            const double pi = expit(X.row(i).dot(gamma));
            acc.noalias() += (pi * (1.0 - pi)) * (X.row(i).transpose() * X.row(i));
        });
}

// Every observation predicted at the boundary: the likelihood has no interior
// maximum, so the coefficient path diverges without the score ever stalling.
bool perfectly_classified(const Eigen::VectorXd& a, const Eigen::VectorXd& pi, double margin) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i) == 1.0 ? pi(i) < 1.0 - margin : pi(i) > margin) return false;
    }
    return true;
}

}  // namespace

Eigen::VectorXd FirstStepFit::g_hat_row(const Dataset& ds, Eigen::Index i) const {
    Eigen::VectorXd g(ds.k);
    for (Eigen::Index j = 0; j < ds.k; ++j) {
        g(j) = alpha(j, 0);
        for (Eigen::Index q = 0; q < ds.p; ++q) g(j) += alpha(j, 1 + q) * ds.x(i, q);
    }
    return g;
}

PropensityFit fit_propensity(const Dataset& ds, const Tolerances& tol) {
    if (!ds.exposure_binary) {
        throw EstimationError(
            "continuous exposure supplied to the logistic propensity fit; "
            "use the linear exposure-mean model instead");
    }
    if ((ds.a.array() == ds.a(0)).all()) {
        throw ConstantExposureError("constant exposure: the propensity model is degenerate");
    }

    const Eigen::MatrixXd X = build_design(ds, false, false).values;  // [1, X]
    const Eigen::Index d = X.cols();

    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(d);
    double ll = mean_log_likelihood(X, ds.a, gamma);
    Eigen::VectorXd score = mean_score(X, ds.a, gamma);

    PropensityFit fit;
    for (int iter = 0; iter < tol.max_iterations; ++iter) {
        fit.iterations = iter;
        fit.score_norm = score.cwiseAbs().maxCoeff();
        if (fit.score_norm <= tol.tol_score) break;
        if (gamma.norm() > tol.separation_norm) {
            throw EstimationError(
                "complete or quasi-complete separation detected: the propensity "
                "coefficients diverge while the score stays away from zero");
        }

        Eigen::LDLT<Eigen::MatrixXd> info(mean_information(X, gamma));
        if (info.info() != Eigen::Success) {
            throw EstimationError("singular information matrix in the propensity fit");
        }
        const Eigen::VectorXd direction = info.solve(score);

        double step = 1.0;
        Eigen::VectorXd proposal = gamma + direction;
        double ll_new = mean_log_likelihood(X, ds.a, proposal);
        int halvings = 0;
        while (!(ll_new >= ll) && halvings < 40) {
            step /= 2.0;
            proposal = gamma + step * direction;
            ll_new = mean_log_likelihood(X, ds.a, proposal);
            ++halvings;
        }
        gamma = proposal;
        ll = ll_new;
        score = mean_score(X, ds.a, gamma);
    }
    fit.score_norm = score.cwiseAbs().maxCoeff();

    fit.pi_hat.resize(ds.n);
    for (Eigen::Index i = 0; i < ds.n; ++i) fit.pi_hat(i) = expit(X.row(i).dot(gamma));

    if (perfectly_classified(ds.a, fit.pi_hat, 1e-4)) {
        throw EstimationError(
            "complete separation detected: every observation is classified at the "
            "boundary, so the propensity coefficients are not finite");
    }
    if (fit.score_norm > tol.tol_score) {
        throw EstimationError("propensity fit did not converge within " +
                              std::to_string(tol.max_iterations) + " iterations");
    }
    for (Eigen::Index i = 0; i < ds.n; ++i) {
        if (!(fit.pi_hat(i) > 0.0 && fit.pi_hat(i) < 1.0)) {
            throw EstimationError("fitted propensity reached the boundary of (0, 1)");
        }
    }
    fit.gamma = gamma;
    return fit;
}

PropensityFit fit_exposure_mean(const Dataset& ds, const Tolerances&) {
    const Eigen::MatrixXd X = build_design(ds, false, false).values;  // [1, X]
    PropensityFit fit;
    fit.gamma = ols_solve(X, ds.a);
    fit.pi_hat = X * fit.gamma;
    fit.iterations = 1;
    fit.score_norm = (X.transpose() * (ds.a - fit.pi_hat) / static_cast<double>(ds.n))
                         .cwiseAbs()
                         .maxCoeff();
    return fit;
}

MediatorFit fit_mediator_regressions(const Dataset& ds, const Tolerances&) {
    const Eigen::MatrixXd Z = build_design(ds, true, false).values;  // [1, A, X]
    MediatorFit fit;
    fit.alpha.resize(ds.k, 1 + ds.p);
    fit.beta1.resize(ds.k);
    fit.residuals.resize(ds.n, ds.k);
    for (Eigen::Index j = 0; j < ds.k; ++j) {
        const Eigen::VectorXd coef = ols_solve(Z, ds.m.col(j));
        fit.beta1(j) = coef(1);
        fit.alpha(j, 0) = coef(0);
        for (Eigen::Index q = 0; q < ds.p; ++q) fit.alpha(j, 1 + q) = coef(2 + q);
        fit.residuals.col(j) = ds.m.col(j) - Z * coef;
    }
    return fit;
}

FirstStepFit fit_first_step(const Dataset& ds, const Tolerances& tol) {
    const PropensityFit prop =
        ds.exposure_binary ? fit_propensity(ds, tol) : fit_exposure_mean(ds, tol);
    const MediatorFit med = fit_mediator_regressions(ds, tol);

    FirstStepFit fit;
    fit.gamma = prop.gamma;
    fit.pi_hat = prop.pi_hat;
    fit.iterations = prop.iterations;
    fit.score_norm = prop.score_norm;
    fit.alpha = med.alpha;
    fit.beta1 = med.beta1;
    fit.residuals = med.residuals;
    fit.exposure_residual = ds.a - prop.pi_hat;
    fit.exposure_binary = ds.exposure_binary;
    return fit;
}

}  // namespace medgmm
