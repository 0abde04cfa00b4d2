#include "medgmm/second_step.hpp"

#include <cmath>
#include <sstream>

#include "medgmm/linalg.hpp"
#include "medgmm/reduce.hpp"

namespace medgmm {

Eigen::VectorXd ThetaFit::theta() const {
    Eigen::VectorXd t(theta2.size() + 1);
    t.head(theta2.size()) = theta2;
    t(theta2.size()) = theta1;
    return t;
}

Eigen::VectorXd evaluate_psi(double y, double a, const Eigen::VectorXd& m,
                             const Eigen::VectorXd& beta1, const Eigen::VectorXd& g,
                             const Eigen::VectorXd& theta2, double theta1) {
    const Eigen::Index k = m.size();
    if (beta1.size() != k || g.size() != k || theta2.size() != k) {
        throw EstimationError("evaluate_psi: dimension mismatch across mediator inputs");
    }
    const double outcome_resid = y - theta2.dot(m);
    Eigen::VectorXd psi(k + 1);
    for (Eigen::Index j = 0; j < k; ++j) {
        psi(j) = (m(j) - beta1(j) * a - g(j)) * outcome_resid;
    }
    psi(k) = y - theta1 * a - theta2.dot(m);
    return psi;
}

MomentSystem assemble_moment_system(const Dataset& ds, const FirstStepFit& first) {
    const Eigen::Index k = ds.k;
    // Accumulate [B | c] jointly so both see the same reduction tree.
    const Eigen::MatrixXd bc = pairwise_mean<Eigen::MatrixXd>(
        ds.n, Eigen::MatrixXd::Zero(k + 1, k + 2).eval(),
        [&](Eigen::Index i, Eigen::MatrixXd& acc) {
            const double w = ds.a(i) - first.pi_hat(i);
            for (Eigen::Index j = 0; j < k; ++j) {
                const double wr = w * first.residuals(i, j);
                for (Eigen::Index q = 0; q < k; ++q) acc(j, q) += wr * ds.m(i, q);
                acc(j, k + 1) += wr * ds.y(i);
            }
            for (Eigen::Index q = 0; q < k; ++q) acc(k, q) += w * ds.m(i, q);
            acc(k, k) += w * ds.a(i);
            acc(k, k + 1) += w * ds.y(i);
        });

    MomentSystem system;
    system.B = bc.leftCols(k + 1);
    system.B.col(k).head(k).setZero();  // rows 1..K do not involve theta1
    system.c = bc.col(k + 1);
    return system;
}

ThetaFit solve_theta(const MomentSystem& system, const Tolerances& tol) {
    const Eigen::Index k = system.k();
    if (!system.B.allFinite() || !system.c.allFinite()) {
        throw EstimationError("moment system contains non-finite entries");
    }

    const double cond = condition_number(system.B);
    if (!(cond <= tol.cond_max)) {
        std::ostringstream msg;
        msg << "identification rank condition fails: the moment matrix has condition number ";
        if (std::isfinite(cond)) {
            msg << cond;
        } else {
            msg << "infinity (singular)";
        }
        msg << " (limit " << tol.cond_max
            << "). The determinant factors through E[Var(A|X)] and the dependence of "
               "Var(M|A,X) on A, so either the exposure carries no conditional variance "
               "or the mediator variances do not change with the exposure.";
        throw IdentificationError(msg.str());
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(system.B);
    Eigen::VectorXd theta = qr.solve(system.c);
    theta += qr.solve(system.c - system.B * theta);  // one refinement step

    ThetaFit fit;
    fit.theta2 = theta.head(k);
    fit.theta1 = theta(k);
    fit.system = system;
    fit.residual_norm = (system.c - system.B * theta).cwiseAbs().maxCoeff();
    fit.condition_estimate = cond;

    const double bound = tol.tol_solve * (1.0 + system.c.cwiseAbs().maxCoeff());
    if (!(fit.residual_norm <= bound)) {
        throw EstimationError("moment solve residual " + std::to_string(fit.residual_norm) +
                              " exceeds tolerance; the system is too ill-conditioned");
    }
    return fit;
}

}  // namespace medgmm
