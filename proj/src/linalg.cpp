#include "medgmm/linalg.hpp"

#include <cmath>
#include <limits>

#include "medgmm/errors.hpp"
#include "medgmm/reduce.hpp"

namespace medgmm {

double normal_two_sided_p(double z) {
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

Eigen::VectorXd ols_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const Eigen::Index d = X.cols();
    const Eigen::Index n = X.rows();
    if (n == 0 || y.size() != n) {
        throw EstimationError("least squares: empty design or mismatched response length");
    }

    Eigen::MatrixXd gram = pairwise_mean<Eigen::MatrixXd>(
        n, Eigen::MatrixXd::Zero(d, d).eval(), [&](Eigen::Index i, Eigen::MatrixXd& acc) {
            acc.noalias() += X.row(i).transpose() * X.row(i);
        });
    Eigen::VectorXd rhs = pairwise_mean<Eigen::VectorXd>(
        n, Eigen::VectorXd::Zero(d).eval(),
        [&](Eigen::Index i, Eigen::VectorXd& acc) { acc += X.row(i).transpose() * y(i); });

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
    if (qr.rank() < d) {
        throw EstimationError("rank-deficient design: some regressors are collinear");
    }
    Eigen::VectorXd coef = qr.solve(rhs);
    coef += qr.solve(rhs - gram * coef);  // one refinement step
    return coef;
}

double condition_number(const Eigen::MatrixXd& A) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return std::numeric_limits<double>::infinity();
    const double smin = s(s.size() - 1);
    if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

}  // namespace medgmm
