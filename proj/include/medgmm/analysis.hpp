#pragma once

#include <optional>
#include <vector>

#include "medgmm/baseline.hpp"
#include "medgmm/dataset.hpp"
#include "medgmm/diagnostics.hpp"
#include "medgmm/first_step.hpp"
#include "medgmm/inference.hpp"
#include "medgmm/second_step.hpp"

namespace medgmm {

// End-to-end analysis of one dataset. Identification diagnostics are always
// computed before any moment-based estimate; a fail verdict refuses the
// moment-based path and records why, so callers can still show the
// diagnostics (and any regression results) before reporting the failure.
struct AnalysisOutput {
    IdentificationReport diagnostics;
    std::vector<EffectReport> reports;
    FirstStepFit first;
    std::optional<ThetaFit> theta;
    std::optional<std::string> identification_failure;
};

AnalysisOutput run_analysis(const Dataset& ds, const ModelSpec& spec);

// Diagnosis only: never reports effect estimates, and estimation problems
// surface as a fail verdict rather than an exception.
IdentificationReport run_diagnosis(const Dataset& ds, const ModelSpec& spec);

// Table-level entry point for the diagnose path: a constant exposure column
// becomes a fail verdict instead of a validation error.
IdentificationReport run_diagnosis(const Table& raw, const ModelSpec& spec);

}  // namespace medgmm
