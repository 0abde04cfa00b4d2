#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "medgmm/dataset.hpp"
#include "medgmm/first_step.hpp"
#include "medgmm/mestimation.hpp"
#include "medgmm/second_step.hpp"

namespace medgmm {

// Index map for the stacked parameter vector
//   varphi = (gamma, alpha_1, ..., alpha_K, beta1, theta2, theta1),
// where gamma and each alpha_j have 1+p entries (intercept first). The
// moment rows follow the same ordering, so the stacked system is square.
struct StackedLayout {
    Eigen::Index p = 0;
    Eigen::Index k = 0;

    Eigen::Index gamma_begin() const { return 0; }
    Eigen::Index gamma_size() const { return p + 1; }
    Eigen::Index alpha_begin(Eigen::Index j) const { return gamma_size() + j * (p + 1); }
    Eigen::Index alpha_size() const { return p + 1; }
    Eigen::Index beta1_begin() const { return gamma_size() + k * (p + 1); }
    Eigen::Index theta2_begin() const { return beta1_begin() + k; }
    Eigen::Index theta1_index() const { return theta2_begin() + k; }
    Eigen::Index dim() const { return theta1_index() + 1; }
};

struct StackedFit {
    Eigen::VectorXd varphi;
    Eigen::MatrixXd vcov;  // finite-sample covariance estimate of varphi-hat
    StackedLayout layout;
    double fd_max_rel_err = 0.0;
};

struct MediatorEffect {
    std::string name;
    double beta1 = 0.0;
    double theta2 = 0.0;
    double product = 0.0;  // contribution beta1_j * theta2_j
    double se = 0.0;
};

struct EffectReport {
    double nde = 0.0;
    double nie = 0.0;
    double se_nde = 0.0;
    double se_nie = 0.0;
    std::pair<double, double> ci_nde{0.0, 0.0};
    std::pair<double, double> ci_nie{0.0, 0.0};
    std::string method;     // "gmm" or "regression"
    std::string se_method;  // "sandwich" or "bootstrap"
    std::vector<MediatorEffect> per_mediator;
    int bootstrap_reps_used = 0;
    int bootstrap_failures = 0;
};

inline constexpr double kZ95 = 1.96;  // Wald interval half-width multiplier

// Stacked moment system for the two-step estimator: exposure-model score,
// mediator regression scores, then the exposure-residual-weighted outcome
// moments. Used for the sandwich covariance and its finite-difference check.
class GmmStack {
public:
    GmmStack(const Dataset& ds, bool exposure_binary);

    Eigen::Index dim() const { return layout_.dim(); }
    Eigen::Index rows() const { return ds_->n; }
    const StackedLayout& layout() const { return layout_; }

    void row_moment(Eigen::Index i, const Eigen::VectorXd& phi, Eigen::VectorXd& out) const;
    void add_row_jacobian(Eigen::Index i, const Eigen::VectorXd& phi, Eigen::MatrixXd& acc) const;
    std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> blocks() const;

    Eigen::VectorXd pack(const FirstStepFit& first, const ThetaFit& theta) const;

private:
    const Dataset* ds_;
    bool binary_;
    StackedLayout layout_;
};

// Sandwich covariance of all parameters with the first-step variability
// propagated into the outcome moments. The analytic bread is verified
// against central finite differences at fit time.
StackedFit stacked_sandwich(const Dataset& ds, const FirstStepFit& first, const ThetaFit& theta,
                            const Tolerances& tol = {}, bool df_correction = false);

// Point effects with delta-method standard errors and Wald intervals:
// NDE = theta1, NIE = beta1' theta2.
EffectReport delta_effects(const FirstStepFit& first, const ThetaFit& theta,
                           const StackedFit& stacked,
                           const std::vector<std::string>& mediator_names = {});

// Nonparametric bootstrap: resamples rows with replacement, reruns both
// steps per resample, and reports the replicate standard deviation. Failed
// replicates are excluded and counted; more than 10% failures is an error.
EffectReport bootstrap_effects(const Dataset& ds, const ModelSpec& spec,
                               Method method = Method::gmm);

}  // namespace medgmm
