#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "medgmm/errors.hpp"

namespace medgmm {

// Numerical controls shared by the estimators. Defaults are relative to
// unit-scaled data.
struct Tolerances {
    double tol_score = 1e-8;      // max |score component| at first-step convergence
    double tol_solve = 1e-10;     // linear-solve residual, relative to 1 + |rhs|
    double cond_max = 1e8;        // refuse estimates beyond this condition number
    double overlap_fail = 1e-4;   // exposure-variance statistic at or below: fail
    double overlap_warn = 1e-3;   // warn band, one order of magnitude earlier
    double hetero_p_warn = 0.10;  // warn when no mediator shows heteroscedasticity
    int max_iterations = 100;     // IRLS iteration cap
    double separation_norm = 1e3; // coefficient norm treated as divergence
    double fd_step = 1e-6;        // finite-difference step for the bread self-check
    double fd_rel_tol = 1e-4;     // allowed relative mismatch in that check
};

enum class Method { gmm, regression, both };
enum class SeMethod { sandwich, bootstrap, both };
enum class MissingPolicy { error, drop };
enum class BootstrapCi { wald, percentile };

// Which columns play which role, plus estimator and inference options.
struct ModelSpec {
    std::string outcome;
    std::string exposure;
    std::vector<std::string> mediators;
    std::vector<std::string> covariates;

    Method method = Method::both;
    SeMethod se_method = SeMethod::sandwich;
    int bootstrap_reps = 500;
    std::uint64_t seed = 0;
    MissingPolicy missing = MissingPolicy::error;
    BootstrapCi bootstrap_ci = BootstrapCi::wald;
    bool df_correction = false;  // finite-sample n/(n - dim) multiplier, off by default
    int threads = 1;
    Tolerances tol;
};

// A parsed table of named numeric columns; NaN marks a missing cell.
struct Table {
    std::vector<std::string> names;
    std::vector<Eigen::VectorXd> columns;

    Eigen::Index rows() const { return columns.empty() ? 0 : columns.front().size(); }
    const Eigen::VectorXd* find(const std::string& name) const;
};

// Immutable after construction; safe to share across concurrent readers.
struct Dataset {
    Eigen::VectorXd y;  // outcome, length n
    Eigen::VectorXd a;  // exposure, length n; {0,1} when binary
    Eigen::MatrixXd m;  // mediators, n x k
    Eigen::MatrixXd x;  // baseline covariates, n x p (no intercept column)
    Eigen::Index n = 0;
    Eigen::Index k = 0;
    Eigen::Index p = 0;
    bool exposure_binary = false;
    Eigen::Index dropped_rows = 0;

    std::string outcome_name;
    std::string exposure_name;
    std::vector<std::string> mediator_names;
    std::vector<std::string> covariate_names;
};

// Intercept-first regressor matrix; column order is part of the contract:
// [1, A (if requested), M_1..M_K (if requested), X_1..X_p].
struct DesignMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> labels;
};

Dataset validate_dataset(const Table& raw, const ModelSpec& spec);
DesignMatrix build_design(const Dataset& ds, bool include_exposure, bool include_mediators);

}  // namespace medgmm
