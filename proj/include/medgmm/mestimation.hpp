#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "medgmm/errors.hpp"
#include "medgmm/reduce.hpp"

namespace medgmm {

// Generic sandwich covariance for a stacked, exactly identified system of
// estimating equations. A Stack provides:
//   Eigen::Index dim() const;
//   Eigen::Index rows() const;
//   void row_moment(i, phi, out&) const;        // overwrite out with Phi_i(phi)
//   void add_row_jacobian(i, phi, acc&) const;  // acc += dPhi_i/dphi'
//   std::vector<std::pair<std::string, std::pair<Index, Index>>> blocks() const;

struct SandwichOptions {
    bool fd_check = true;
    double fd_step = 1e-6;
    double fd_rel_tol = 1e-4;
    bool df_correction = false;
};

struct SandwichResult {
    Eigen::MatrixXd bread;  // mean Jacobian of the stacked moments
    Eigen::MatrixXd meat;   // mean outer product of the stacked moments
    Eigen::MatrixXd vcov;   // bread^-1 meat bread^-T / n
    double fd_max_rel_err = 0.0;
};

template <class Stack>
Eigen::VectorXd moment_mean(const Stack& st, const Eigen::VectorXd& phi) {
    Eigen::VectorXd scratch(st.dim());
    return pairwise_mean<Eigen::VectorXd>(
        st.rows(), Eigen::VectorXd::Zero(st.dim()).eval(),
        [&](Eigen::Index i, Eigen::VectorXd& acc) {
            st.row_moment(i, phi, scratch);
            acc += scratch;
        });
}

template <class Stack>
Eigen::MatrixXd moment_jacobian_mean(const Stack& st, const Eigen::VectorXd& phi) {
    const Eigen::Index d = st.dim();
    return pairwise_mean<Eigen::MatrixXd>(
        st.rows(), Eigen::MatrixXd::Zero(d, d).eval(),
        [&](Eigen::Index i, Eigen::MatrixXd& acc) { st.add_row_jacobian(i, phi, acc); });
}

template <class Stack>
Eigen::MatrixXd moment_outer_mean(const Stack& st, const Eigen::VectorXd& phi) {
    const Eigen::Index d = st.dim();
    Eigen::VectorXd scratch(d);
    return pairwise_mean<Eigen::MatrixXd>(
        st.rows(), Eigen::MatrixXd::Zero(d, d).eval(),
        [&](Eigen::Index i, Eigen::MatrixXd& acc) {
            st.row_moment(i, phi, scratch);
            acc.noalias() += scratch * scratch.transpose();
        });
}

// Central finite differences of phi -> mean Phi(phi), column per parameter.
template <class Stack>
Eigen::MatrixXd moment_jacobian_fd(const Stack& st, const Eigen::VectorXd& phi, double step) {
    const Eigen::Index d = st.dim();
    Eigen::MatrixXd jac(d, d);
    Eigen::VectorXd shifted = phi;
    for (Eigen::Index q = 0; q < d; ++q) {
        shifted(q) = phi(q) + step;
        const Eigen::VectorXd up = moment_mean(st, shifted);
        shifted(q) = phi(q) - step;
        const Eigen::VectorXd down = moment_mean(st, shifted);
        shifted(q) = phi(q);
        jac.col(q) = (up - down) / (2.0 * step);
    }
    return jac;
}

template <class Stack>
SandwichResult sandwich_estimate(const Stack& st, const Eigen::VectorXd& phi,
                                 const SandwichOptions& opt = {}) {
    const Eigen::Index d = st.dim();
    const Eigen::Index n = st.rows();

    SandwichResult out;
    out.bread = moment_jacobian_mean(st, phi);
    out.meat = moment_outer_mean(st, phi);

    if (opt.fd_check) {
        const Eigen::MatrixXd fd = moment_jacobian_fd(st, phi, opt.fd_step);
        const double scale = 1.0 + out.bread.cwiseAbs().maxCoeff();
        out.fd_max_rel_err = (out.bread - fd).cwiseAbs().maxCoeff() / scale;
        if (!(out.fd_max_rel_err <= opt.fd_rel_tol)) {
            throw EstimationError(
                "sandwich bread failed the finite-difference self-check (relative error " +
                std::to_string(out.fd_max_rel_err) + ")");
        }
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(out.bread);
    if (qr.rank() < d) {
        std::string offenders;
        for (const auto& [name, range] : st.blocks()) {
            const auto sub = out.bread.block(range.first, range.first,
                                             range.second - range.first,
                                             range.second - range.first);
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> bqr(sub);
            if (bqr.rank() < sub.rows()) {
                if (!offenders.empty()) offenders += ", ";
                offenders += name;
            }
        }
        throw EstimationError("singular bread matrix in sandwich covariance (block: " +
                              (offenders.empty() ? std::string("unknown") : offenders) + ")");
    }

    Eigen::MatrixXd v = qr.solve(out.meat);
    v = qr.solve(v.transpose()).transpose();
    v = ((v + v.transpose()) / 2.0).eval();
    v /= static_cast<double>(n);
    if (opt.df_correction && n > d) {
        v *= static_cast<double>(n) / static_cast<double>(n - d);
    }
    // Rounding can leave a zero variance infinitesimally negative; anything
    // beyond rounding level is a genuine failure.
    const double rounding = 1e-12 * (1.0 + v.diagonal().cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!std::isfinite(v(i, i)) || v(i, i) < -rounding) {
            throw EstimationError("negative or non-finite variance on the sandwich diagonal");
        }
        if (v(i, i) < 0.0) v(i, i) = 0.0;
    }
    out.vcov = std::move(v);
    return out;
}

}  // namespace medgmm
