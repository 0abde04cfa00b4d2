#pragma once

#include <Eigen/Dense>

#include "medgmm/dataset.hpp"

namespace medgmm {

struct PropensityFit {
    Eigen::VectorXd gamma;   // 1+p coefficients, intercept first
    Eigen::VectorXd pi_hat;  // fitted E(A | X), length n
    int iterations = 0;
    double score_norm = 0.0;
};

struct MediatorFit {
    Eigen::MatrixXd alpha;      // K x (1+p) covariate coefficients, intercept first
    Eigen::VectorXd beta1;      // K exposure coefficients
    Eigen::MatrixXd residuals;  // n x K, R_ij = M_ij - beta1_j A_i - alpha_j' (1, X_i)
};

// Joint first-step fit: exposure mean model plus the K mediator regressions.
// Each block solves its own estimating equations; the stacked score is zero
// at the solution up to tol_score.
struct FirstStepFit {
    Eigen::VectorXd gamma;
    Eigen::MatrixXd alpha;
    Eigen::VectorXd beta1;
    Eigen::VectorXd pi_hat;
    Eigen::MatrixXd residuals;
    Eigen::VectorXd exposure_residual;  // A_i - pi_hat_i
    bool exposure_binary = true;
    int iterations = 0;
    double score_norm = 0.0;

    // Fitted covariate part of the mediator means: alpha_j' (1, X_i).
    Eigen::VectorXd g_hat_row(const Dataset& ds, Eigen::Index i) const;
};

// Logistic maximum likelihood by iteratively reweighted least squares with
// step-halving. Requires a binary {0,1} exposure. Errors on non-convergence
// and on detected complete/quasi-complete separation.
PropensityFit fit_propensity(const Dataset& ds, const Tolerances& tol = {});

// Linear-mean fallback for continuous exposures: least squares of A on (1, X).
PropensityFit fit_exposure_mean(const Dataset& ds, const Tolerances& tol = {});

// Per-mediator least squares of M_j on (1, A, X).
MediatorFit fit_mediator_regressions(const Dataset& ds, const Tolerances& tol = {});

// Dispatches on exposure type and bundles the blocks.
FirstStepFit fit_first_step(const Dataset& ds, const Tolerances& tol = {});

}  // namespace medgmm
