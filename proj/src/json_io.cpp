#include "medgmm/json_io.hpp"

namespace medgmm {

namespace {

Json vector_json(const Eigen::VectorXd& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Json matrix_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json labeled_coefficients(const Eigen::VectorXd& values, const std::vector<std::string>& labels) {
    Json out = Json::object();
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const std::string key = i < static_cast<Eigen::Index>(labels.size())
                                    ? labels[i]
                                    : "c" + std::to_string(i);
        out[key] = values(i);
    }
    return out;
}

}  // namespace

Json to_json(const Dataset& ds) {
    return Json{{"n", ds.n},
                {"mediators", ds.k},
                {"covariates", ds.p},
                {"exposure_binary", ds.exposure_binary},
                {"dropped_rows", ds.dropped_rows},
                {"outcome", ds.outcome_name},
                {"exposure", ds.exposure_name},
                {"mediator_names", ds.mediator_names},
                {"covariate_names", ds.covariate_names}};
}

Json to_json(const FirstStepFit& fit, const Dataset& ds) {
    std::vector<std::string> xt_labels{"(intercept)"};
    for (const auto& name : ds.covariate_names) xt_labels.push_back(name);

    Json mediators = Json::array();
    for (Eigen::Index j = 0; j < fit.beta1.size(); ++j) {
        Json block;
        block["mediator"] = j < static_cast<Eigen::Index>(ds.mediator_names.size())
                                ? ds.mediator_names[j]
                                : "M" + std::to_string(j + 1);
        block["exposure_coefficient"] = fit.beta1(j);
        block["covariate_coefficients"] =
            labeled_coefficients(fit.alpha.row(j).transpose(), xt_labels);
        mediators.push_back(std::move(block));
    }
    return Json{{"propensity_model", fit.exposure_binary ? "logistic" : "linear"},
                {"propensity_coefficients", labeled_coefficients(fit.gamma, xt_labels)},
                {"mediator_models", std::move(mediators)},
                {"iterations", fit.iterations},
                {"score_norm", fit.score_norm}};
}

Json to_json(const MomentSystem& system) {
    return Json{{"B", matrix_json(system.B)}, {"c", vector_json(system.c)}};
}

Json to_json(const ThetaFit& fit) {
    return Json{{"theta2", vector_json(fit.theta2)},
                {"theta1", fit.theta1},
                {"residual_norm", fit.residual_norm},
                {"condition_estimate", fit.condition_estimate},
                {"system", to_json(fit.system)}};
}

Json to_json(const StackedFit& fit) {
    Json layout;
    layout["gamma"] = Json::array({fit.layout.gamma_begin(), fit.layout.alpha_begin(0)});
    layout["alpha"] = Json::array({fit.layout.alpha_begin(0), fit.layout.beta1_begin()});
    layout["beta1"] = Json::array({fit.layout.beta1_begin(), fit.layout.theta2_begin()});
    layout["theta2"] = Json::array({fit.layout.theta2_begin(), fit.layout.theta1_index()});
    layout["theta1"] = Json::array({fit.layout.theta1_index(), fit.layout.dim()});
    return Json{{"varphi", vector_json(fit.varphi)},
                {"layout", std::move(layout)},
                {"vcov", matrix_json(fit.vcov)},
                {"fd_max_rel_err", fit.fd_max_rel_err}};
}

Json to_json(const IdentificationReport& report) {
    return Json{{"verdict", verdict_name(report.verdict)},
                {"reasons", report.reasons},
                {"overlap_stat", report.overlap_stat},
                {"g1_hat", report.g1_hat},
                {"hetero_pvalues", vector_json(report.hetero_pvalues)},
                {"condition_number", report.condition_number},
                {"exposure_binary", report.exposure_binary},
                {"summary", report.summary}};
}

Json to_json(const EffectReport& report) {
    Json mediators = Json::array();
    for (const auto& me : report.per_mediator) {
        mediators.push_back(Json{{"mediator", me.name},
                                 {"beta1", me.beta1},
                                 {"theta2", me.theta2},
                                 {"product", me.product},
                                 {"se", me.se}});
    }
    Json out{{"method", report.method},
             {"se_method", report.se_method},
             {"nde", report.nde},
             {"se_nde", report.se_nde},
             {"ci_nde", Json::array({report.ci_nde.first, report.ci_nde.second})},
             {"nie", report.nie},
             {"se_nie", report.se_nie},
             {"ci_nie", Json::array({report.ci_nie.first, report.ci_nie.second})},
             {"per_mediator", std::move(mediators)}};
    if (report.se_method == "bootstrap") {
        out["bootstrap_reps_used"] = report.bootstrap_reps_used;
        out["bootstrap_failures"] = report.bootstrap_failures;
    }
    return out;
}

Json to_json(const MetricRow& row) {
    return Json{{"estimator", row.estimator},
                {"effect", row.effect},
                {"abs_bias", row.abs_bias},
                {"mc_sd", row.mc_sd},
                {"mean_se", row.mean_se},
                {"cov95", row.cov95},
                {"used", row.used}};
}

Json to_json(const McResult& result) {
    Json rows = Json::array();
    for (const auto& row : result.rows) rows.push_back(to_json(row));
    return Json{{"config",
                 Json{{"n", result.config.n},
                      {"eta", result.config.eta},
                      {"delta", result.config.delta},
                      {"reps", result.config.reps},
                      {"seed", result.config.seed},
                      {"nde_true", SimConfig::nde_true},
                      {"nie_true", SimConfig::nie_true}}},
                {"rows", std::move(rows)},
                {"failed_gmm", result.failed_gmm},
                {"failed_regression", result.failed_regression},
                {"unreliable", result.unreliable}};
}

Json analyze_document(std::uint64_t seed, const Dataset& ds, const IdentificationReport& diag,
                      const std::vector<EffectReport>& reports) {
    Json report_array = Json::array();
    for (const auto& r : reports) report_array.push_back(to_json(r));
    return Json{{"schema_version", kSchemaVersion},
                {"document", "analyze"},
                {"seed", seed},
                {"data", to_json(ds)},
                {"diagnostics", to_json(diag)},
                {"reports", std::move(report_array)}};
}

Json diagnose_document(const Dataset& ds, const IdentificationReport& diag) {
    return Json{{"schema_version", kSchemaVersion},
                {"document", "diagnose"},
                {"data", to_json(ds)},
                {"diagnostics", to_json(diag)}};
}

Json simulate_document(const McResult& result) {
    Json doc = to_json(result);
    Json out{{"schema_version", kSchemaVersion}, {"document", "simulate"}};
    for (auto& [key, value] : doc.items()) out[key] = std::move(value);
    return out;
}

Json error_document(int exit_code, const std::string& category, const std::string& message) {
    return Json{{"schema_version", kSchemaVersion},
                {"document", "error"},
                {"error", Json{{"exit_code", exit_code},
                               {"category", category},
                               {"message", message}}}};
}

}  // namespace medgmm
