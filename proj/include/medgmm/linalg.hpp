#pragma once

#include <Eigen/Dense>

namespace medgmm {

// Numerically stable logistic function.
inline double expit(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double log1pexp(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Two-sided normal p-value for a z statistic.
double normal_two_sided_p(double z);

// Least squares of y on X through the normal equations, solved by a
// column-pivoted (rank-revealing) QR of the Gram matrix. Rank deficiency is
// an error; downstream moments require identified coefficients.
Eigen::VectorXd ols_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// Condition number from the singular values of a small square matrix;
// +infinity when singular.
double condition_number(const Eigen::MatrixXd& A);

}  // namespace medgmm
