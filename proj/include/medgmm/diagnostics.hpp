#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "medgmm/dataset.hpp"
#include "medgmm/first_step.hpp"
#include "medgmm/second_step.hpp"

namespace medgmm {

enum class Verdict { ok, warn, fail };

const char* verdict_name(Verdict v);

// Operational checks for the identification requirements: the exposure must
// vary conditionally on the covariates, and the mediator conditional
// variances must depend on the exposure. A rank failure of the assembled
// moment matrix traces back to one of these two conditions.
struct IdentificationReport {
    double overlap_stat = 0.0;       // min pi(1-pi) for binary A, else residual variance
    double g1_hat = 0.0;             // plug-in estimate of E[Var(A|X)]
    Eigen::VectorXd hetero_pvalues;  // per-mediator heteroscedasticity p-values
    double condition_number = 0.0;   // of the assembled moment matrix B
    Verdict verdict = Verdict::ok;
    std::vector<std::string> reasons;
    bool exposure_binary = true;
    std::string summary;
};

// Exposure-variance statistic: min_i pi(1-pi) for binary exposures, sample
// variance of the exposure residual otherwise.
double check_overlap(const FirstStepFit& first);

// Plug-in E[Var(A|X)]: mean of pi(1-pi), or mean squared exposure residual.
double estimate_g1(const FirstStepFit& first);

// Per-mediator auxiliary regression of the squared residual on (1, A, X);
// returns the two-sided p-value for the exposure coefficient, computed with a
// heteroscedasticity-robust standard error. Small p-values support
// exposure-dependent mediator variance.
Eigen::VectorXd check_heteroscedasticity(const Dataset& ds, const FirstStepFit& first);

// Bundles overlap, heteroscedasticity, and conditioning into a verdict.
// Read-only over its inputs; failure is a verdict, never an exception.
IdentificationReport decompose_rank_condition(const Dataset& ds, const FirstStepFit& first,
                                              const MomentSystem& system,
                                              const Tolerances& tol = {});

}  // namespace medgmm
