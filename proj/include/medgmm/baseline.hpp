#pragma once

#include <Eigen/Dense>

#include "medgmm/dataset.hpp"
#include "medgmm/first_step.hpp"
#include "medgmm/inference.hpp"

namespace medgmm {

// Regression-based estimator that assumes no unmeasured mediator-outcome
// confounding: least squares of Y on (1, A, M, X) combined with the mediator
// regressions, with a stacked sandwich covariance over both blocks.
struct RegressionFit {
    Eigen::VectorXd outcome_coef;  // [intercept, A, M_1..M_K, X_1..X_p]
    MediatorFit mediators;
    Eigen::MatrixXd vcov;  // stacked over (outcome coefs, alpha, beta1)
    Eigen::Index k = 0;
    Eigen::Index p = 0;
    double fd_max_rel_err = 0.0;
    std::vector<std::string> mediator_names;

    // Index map into outcome_coef / vcov.
    Eigen::Index a_index() const { return 1; }
    Eigen::Index m_index(Eigen::Index j) const { return 2 + j; }
    Eigen::Index outcome_dim() const { return 2 + k + p; }
    Eigen::Index alpha_begin(Eigen::Index j) const { return outcome_dim() + j * (p + 1); }
    Eigen::Index beta1_begin() const { return outcome_dim() + k * (p + 1); }
    Eigen::Index dim() const { return beta1_begin() + k; }
};

RegressionFit fit_outcome_regression(const Dataset& ds, const Tolerances& tol = {},
                                     bool df_correction = false);

// NDE_reg = coefficient of A in the outcome regression; NIE_reg = beta1'
// theta2 over the mediator coefficients. Standard errors by the delta method
// on the stacked covariance; effects are per unit change in the exposure.
EffectReport regression_effects(const RegressionFit& fit);

}  // namespace medgmm
