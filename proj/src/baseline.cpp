#include "medgmm/baseline.hpp"

#include <cmath>

#include "medgmm/linalg.hpp"
#include "medgmm/mestimation.hpp"

namespace medgmm {

namespace {

// Stacked least-squares scores for the outcome regression on (1, A, M, X)
// and the K mediator regressions on (1, A, X). Both blocks are plain OLS, so
// the bread is block diagonal; the meat couples them, which is what the
// indirect-effect delta method needs.
class RegressionStack {
public:
    RegressionStack(const Dataset& ds, const RegressionFit& fit) : ds_(&ds), fit_(&fit) {}

    Eigen::Index dim() const { return fit_->dim(); }
    Eigen::Index rows() const { return ds_->n; }

    void row_moment(Eigen::Index i, const Eigen::VectorXd& phi, Eigen::VectorXd& out) const {
        const Dataset& ds = *ds_;

        double e = ds.y(i) - phi(0) - phi(1) * ds.a(i);
        for (Eigen::Index j = 0; j < ds.k; ++j) e -= phi(2 + j) * ds.m(i, j);
        for (Eigen::Index q = 0; q < ds.p; ++q) e -= phi(2 + ds.k + q) * ds.x(i, q);

        out(0) = e;
        out(1) = e * ds.a(i);
        for (Eigen::Index j = 0; j < ds.k; ++j) out(2 + j) = e * ds.m(i, j);
        for (Eigen::Index q = 0; q < ds.p; ++q) out(2 + ds.k + q) = e * ds.x(i, q);

        for (Eigen::Index j = 0; j < ds.k; ++j) {
            const Eigen::Index aj = fit_->alpha_begin(j);
            const Eigen::Index bj = fit_->beta1_begin() + j;
            double r = ds.m(i, j) - phi(bj) * ds.a(i) - phi(aj);
            for (Eigen::Index q = 0; q < ds.p; ++q) r -= phi(aj + 1 + q) * ds.x(i, q);
            out(aj) = r;
            for (Eigen::Index q = 0; q < ds.p; ++q) out(aj + 1 + q) = r * ds.x(i, q);
            out(bj) = ds.a(i) * r;
        }
    }

    void add_row_jacobian(Eigen::Index i, const Eigen::VectorXd&, Eigen::MatrixXd& acc) const {
        const Dataset& ds = *ds_;
        const Eigen::Index od = fit_->outcome_dim();

        Eigen::VectorXd w(od);
        w(0) = 1.0;
        w(1) = ds.a(i);
        for (Eigen::Index j = 0; j < ds.k; ++j) w(2 + j) = ds.m(i, j);
        for (Eigen::Index q = 0; q < ds.p; ++q) w(2 + ds.k + q) = ds.x(i, q);
        acc.block(0, 0, od, od) -= w * w.transpose();

        Eigen::VectorXd xt(1 + ds.p);
        xt(0) = 1.0;
        for (Eigen::Index q = 0; q < ds.p; ++q) xt(1 + q) = ds.x(i, q);
        const Eigen::MatrixXd xxt = xt * xt.transpose();
        const double a = ds.a(i);
        for (Eigen::Index j = 0; j < ds.k; ++j) {
            const Eigen::Index aj = fit_->alpha_begin(j);
            const Eigen::Index bj = fit_->beta1_begin() + j;
            acc.block(aj, aj, 1 + ds.p, 1 + ds.p) -= xxt;
            acc.block(aj, bj, 1 + ds.p, 1) -= a * xt;
            acc.block(bj, aj, 1, 1 + ds.p) -= a * xt.transpose();
            acc(bj, bj) -= a * a;
        }
    }

    std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> blocks() const {
        return {
            {"outcome regression", {0, fit_->outcome_dim()}},
            {"mediator regressions", {fit_->outcome_dim(), fit_->dim()}},
        };
    }

private:
    const Dataset* ds_;
    const RegressionFit* fit_;
};

}  // namespace

RegressionFit fit_outcome_regression(const Dataset& ds, const Tolerances& tol,
                                     bool df_correction) {
    RegressionFit fit;
    fit.k = ds.k;
    fit.p = ds.p;
    fit.mediator_names = ds.mediator_names;

    const Eigen::MatrixXd W = build_design(ds, true, true).values;  // [1, A, M, X]
    fit.outcome_coef = ols_solve(W, ds.y);
    fit.mediators = fit_mediator_regressions(ds, tol);

    Eigen::VectorXd phi(fit.dim());
    phi.head(fit.outcome_dim()) = fit.outcome_coef;
    for (Eigen::Index j = 0; j < ds.k; ++j) {
        phi.segment(fit.alpha_begin(j), 1 + ds.p) = fit.mediators.alpha.row(j).transpose();
    }
    phi.segment(fit.beta1_begin(), ds.k) = fit.mediators.beta1;

    RegressionStack stack(ds, fit);
    SandwichOptions opt;
    opt.fd_step = tol.fd_step;
    opt.fd_rel_tol = tol.fd_rel_tol;
    opt.df_correction = df_correction;
    const SandwichResult s = sandwich_estimate(stack, phi, opt);
    fit.vcov = s.vcov;
    fit.fd_max_rel_err = s.fd_max_rel_err;
    return fit;
}

EffectReport regression_effects(const RegressionFit& fit) {
    EffectReport report;
    report.method = "regression";
    report.se_method = "sandwich";

    const Eigen::Index k = fit.k;
    const Eigen::VectorXd theta2 = fit.outcome_coef.segment(2, k);
    const Eigen::VectorXd& beta1 = fit.mediators.beta1;

    report.nde = fit.outcome_coef(fit.a_index());
    report.nie = beta1.dot(theta2);

    const double var_nde = fit.vcov(fit.a_index(), fit.a_index());
    if (!(var_nde >= 0.0) || !std::isfinite(var_nde)) {
        throw EstimationError("negative or non-finite variance computed for the direct effect");
    }
    report.se_nde = std::sqrt(var_nde);

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(fit.dim());
    for (Eigen::Index j = 0; j < k; ++j) {
        grad(fit.m_index(j)) = beta1(j);
        grad(fit.beta1_begin() + j) = theta2(j);
    }
    const double var_nie = grad.dot(fit.vcov * grad);
    if (!(var_nie >= 0.0) || !std::isfinite(var_nie)) {
        throw EstimationError("negative or non-finite variance computed for the indirect effect");
    }
    report.se_nie = std::sqrt(var_nie);

    report.ci_nde = {report.nde - kZ95 * report.se_nde, report.nde + kZ95 * report.se_nde};
    report.ci_nie = {report.nie - kZ95 * report.se_nie, report.nie + kZ95 * report.se_nie};

    for (Eigen::Index j = 0; j < k; ++j) {
        MediatorEffect me;
        me.name = j < static_cast<Eigen::Index>(fit.mediator_names.size())
                      ? fit.mediator_names[j]
                      : "M" + std::to_string(j + 1);
        me.beta1 = beta1(j);
        me.theta2 = theta2(j);
        me.product = me.beta1 * me.theta2;
        const Eigen::Index mj = fit.m_index(j);
        const Eigen::Index bj = fit.beta1_begin() + j;
        const double var = me.theta2 * me.theta2 * fit.vcov(bj, bj) +
                           2.0 * me.theta2 * me.beta1 * fit.vcov(bj, mj) +
                           me.beta1 * me.beta1 * fit.vcov(mj, mj);
        if (!(var >= 0.0) || !std::isfinite(var)) {
            throw EstimationError("negative or non-finite variance for a mediator contribution");
        }
        me.se = std::sqrt(var);
        report.per_mediator.push_back(std::move(me));
    }
    return report;
}

}  // namespace medgmm
