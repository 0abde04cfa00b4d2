#include "medgmm/analysis.hpp"

#include <cmath>

namespace medgmm {

namespace {

bool wants_gmm(Method m) { return m == Method::gmm || m == Method::both; }
bool wants_regression(Method m) { return m == Method::regression || m == Method::both; }
bool wants_sandwich(SeMethod s) { return s == SeMethod::sandwich || s == SeMethod::both; }
bool wants_bootstrap(SeMethod s) { return s == SeMethod::bootstrap || s == SeMethod::both; }

}  // namespace

AnalysisOutput run_analysis(const Dataset& ds, const ModelSpec& spec) {
    AnalysisOutput out;
    out.first = fit_first_step(ds, spec.tol);
    const MomentSystem system = assemble_moment_system(ds, out.first);
    out.diagnostics = decompose_rank_condition(ds, out.first, system, spec.tol);

    bool run_gmm = wants_gmm(spec.method);
    if (run_gmm && out.diagnostics.verdict == Verdict::fail) {
        std::string why;
        for (const auto& reason : out.diagnostics.reasons) {
            if (!why.empty()) why += "; ";
            why += reason;
        }
        out.identification_failure = "identification diagnostics failed: " + why;
        run_gmm = false;
    }
    if (run_gmm) {
        const ThetaFit theta = solve_theta(system, spec.tol);
        out.theta = theta;
        if (wants_sandwich(spec.se_method)) {
            const StackedFit stacked =
                stacked_sandwich(ds, out.first, theta, spec.tol, spec.df_correction);
            out.reports.push_back(
                delta_effects(out.first, theta, stacked, ds.mediator_names));
        }
        if (wants_bootstrap(spec.se_method)) {
            out.reports.push_back(bootstrap_effects(ds, spec, Method::gmm));
        }
    }

    if (wants_regression(spec.method)) {
        if (wants_sandwich(spec.se_method)) {
            const RegressionFit fit =
                fit_outcome_regression(ds, spec.tol, spec.df_correction);
            out.reports.push_back(regression_effects(fit));
        }
        if (wants_bootstrap(spec.se_method)) {
            out.reports.push_back(bootstrap_effects(ds, spec, Method::regression));
        }
    }
    return out;
}

IdentificationReport run_diagnosis(const Dataset& ds, const ModelSpec& spec) {
    try {
        const FirstStepFit first = fit_first_step(ds, spec.tol);
        const MomentSystem system = assemble_moment_system(ds, first);
        return decompose_rank_condition(ds, first, system, spec.tol);
    } catch (const std::runtime_error& e) {
        // Diagnosis never throws on estimation problems: a first step that
        // cannot be fit is itself a fail verdict.
        IdentificationReport report;
        report.exposure_binary = ds.exposure_binary;
        report.overlap_stat = 0.0;
        report.g1_hat = 0.0;
        report.condition_number = 0.0;
        report.hetero_pvalues = Eigen::VectorXd();
        report.verdict = Verdict::fail;
        report.reasons.push_back(std::string("first-step estimation failed: ") + e.what());
        report.summary = "Diagnostics could not be completed; see reasons.";
        return report;
    }
}

IdentificationReport run_diagnosis(const Table& raw, const ModelSpec& spec) {
    try {
        const Dataset ds = validate_dataset(raw, spec);
        return run_diagnosis(ds, spec);
    } catch (const ConstantExposureError& e) {
        IdentificationReport report;
        report.overlap_stat = 0.0;
        report.g1_hat = 0.0;
        report.condition_number = 0.0;
        report.verdict = Verdict::fail;
        report.reasons.push_back(std::string(e.what()));
        report.summary =
            "The exposure column is constant, so Var(A|X) = 0 everywhere and the "
            "exposure-variance necessary condition (condition (1)) fails.";
        return report;
    }
}

}  // namespace medgmm
