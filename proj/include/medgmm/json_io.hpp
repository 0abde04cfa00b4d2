#pragma once

#include <json.hpp>
#include <string>

#include "medgmm/baseline.hpp"
#include "medgmm/diagnostics.hpp"
#include "medgmm/first_step.hpp"
#include "medgmm/inference.hpp"
#include "medgmm/second_step.hpp"
#include "medgmm/simulation.hpp"

namespace medgmm {

using Json = nlohmann::ordered_json;

// Every emitted document carries this version; the machine-readable layout is
// described by schemas/output.schema.json.
inline constexpr const char* kSchemaVersion = "1.0";

Json to_json(const Dataset& ds);          // shape summary only
Json to_json(const FirstStepFit& fit, const Dataset& ds);
Json to_json(const MomentSystem& system);
Json to_json(const ThetaFit& fit);
Json to_json(const StackedFit& fit);
Json to_json(const IdentificationReport& report);
Json to_json(const EffectReport& report);
Json to_json(const MetricRow& row);
Json to_json(const McResult& result);

// Top-level documents with schema_version and a document tag.
Json analyze_document(std::uint64_t seed, const Dataset& ds, const IdentificationReport& diag,
                      const std::vector<EffectReport>& reports);
Json diagnose_document(const Dataset& ds, const IdentificationReport& diag);
Json simulate_document(const McResult& result);
Json error_document(int exit_code, const std::string& category, const std::string& message);

}  // namespace medgmm
