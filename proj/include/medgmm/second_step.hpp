#pragma once

#include <Eigen/Dense>

#include "medgmm/dataset.hpp"
#include "medgmm/first_step.hpp"

namespace medgmm {

// The empirical moment condition is affine in theta = (theta2_1..theta2_K,
// theta1): mean Psi(theta) = c - B theta. Rows 1..K are the
// residual-product moments (which do not involve theta1, so B[j, K+1] = 0);
// row K+1 is the outcome-mean moment.
struct MomentSystem {
    Eigen::MatrixXd B;  // (K+1) x (K+1)
    Eigen::VectorXd c;  // K+1

    Eigen::Index k() const { return c.size() - 1; }
};

struct ThetaFit {
    Eigen::VectorXd theta2;     // K mediator coefficients
    double theta1 = 0.0;        // exposure coefficient
    MomentSystem system;
    double residual_norm = 0.0;       // |c - B theta|_inf after the solve
    double condition_estimate = 0.0;  // condition number of B

    Eigen::VectorXd theta() const;  // (theta2', theta1)'
};

// One observation's moment vector:
//   psi_j   = (m_j - beta1_j a - g_j)(y - theta2' m)   for j = 1..K
//   psi_K+1 = y - theta1 a - theta2' m
// where g is the fitted covariate part of the mediator means.
Eigen::VectorXd evaluate_psi(double y, double a, const Eigen::VectorXd& m,
                             const Eigen::VectorXd& beta1, const Eigen::VectorXd& g,
                             const Eigen::VectorXd& theta2, double theta1);

// Empirical means of the exposure-residual-weighted moments:
//   B[j,k]     = mean (a - pi) R_j m_k        c_j     = mean (a - pi) R_j y
//   B[K+1,k]   = mean (a - pi) m_k            c_{K+1} = mean (a - pi) y
//   B[K+1,K+1] = mean (a - pi) a              B[j,K+1] = 0
MomentSystem assemble_moment_system(const Dataset& ds, const FirstStepFit& first);

// Solves B theta = c with one step of iterative refinement. Errors when B is
// singular or its condition number exceeds cond_max: the identification rank
// condition fails when the exposure carries no conditional variance or the
// mediator conditional variances do not depend on the exposure.
ThetaFit solve_theta(const MomentSystem& system, const Tolerances& tol = {});

}  // namespace medgmm
