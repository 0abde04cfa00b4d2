#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "medgmm/analysis.hpp"
#include "medgmm/csv.hpp"
#include "medgmm/json_io.hpp"
#include "medgmm/simulation.hpp"

namespace {

using medgmm::Json;

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitIdentification = 3;
constexpr int kExitEstimation = 4;

struct RunConfig {
    std::string data_path;
    std::string outcome = "Y";
    std::string exposure = "A";
    std::vector<std::string> mediators;
    std::vector<std::string> covariates;
    std::string method = "both";
    std::string se = "sandwich";
    int bootstrap_reps = 500;
    std::string missing = "error";
    std::string boot_ci = "wald";
    bool df_correction = false;

    long long n = 800;
    double eta = 0.0;
    double delta = 2.0;
    int reps = 1000;

    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 1;
    std::string out_path;
    std::string format = "json";
    int verbosity = 0;
};

medgmm::ModelSpec to_model_spec(const RunConfig& cfg) {
    medgmm::ModelSpec spec;
    spec.outcome = cfg.outcome;
    spec.exposure = cfg.exposure;
    spec.mediators = cfg.mediators;
    spec.covariates = cfg.covariates;
    spec.method = cfg.method == "gmm"          ? medgmm::Method::gmm
                  : cfg.method == "regression" ? medgmm::Method::regression
                                               : medgmm::Method::both;
    spec.se_method = cfg.se == "sandwich"    ? medgmm::SeMethod::sandwich
                     : cfg.se == "bootstrap" ? medgmm::SeMethod::bootstrap
                                             : medgmm::SeMethod::both;
    spec.bootstrap_reps = cfg.bootstrap_reps;
    spec.seed = cfg.seed;
    spec.missing = cfg.missing == "drop" ? medgmm::MissingPolicy::drop
                                         : medgmm::MissingPolicy::error;
    spec.bootstrap_ci = cfg.boot_ci == "percentile" ? medgmm::BootstrapCi::percentile
                                                    : medgmm::BootstrapCi::wald;
    spec.df_correction = cfg.df_correction;
    spec.threads = cfg.threads;
    return spec;
}

std::uint64_t resolve_seed(RunConfig& cfg) {
    if (!cfg.seed_given) {
        std::random_device entropy;
        cfg.seed = (static_cast<std::uint64_t>(entropy()) << 32) ^ entropy();
    }
    return cfg.seed;
}

void write_output(const RunConfig& cfg, const Json& doc, const std::string& text) {
    if (cfg.out_path.empty()) return;
    std::ofstream out(cfg.out_path, std::ios::binary);
    if (!out) {
        throw medgmm::ParseError("cannot open output file '" + cfg.out_path + "'");
    }
    if (cfg.format == "text") {
        out << text;
    } else {
        out << doc.dump(2) << "\n";
    }
}

int emit_error(const RunConfig& cfg, int code, const std::string& category,
               const std::string& message) {
    const Json doc = medgmm::error_document(code, category, message);
    std::cout << doc.dump(2) << "\n";
    std::cerr << "error: " << message << "\n";
    if (!cfg.out_path.empty()) {
        std::ofstream out(cfg.out_path, std::ios::binary);
        if (out) out << doc.dump(2) << "\n";
    }
    return code;
}

std::string diagnostics_text(const medgmm::IdentificationReport& diag) {
    std::ostringstream out;
    out << "identification diagnostics\n";
    out << "  verdict:          " << medgmm::verdict_name(diag.verdict) << "\n";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "  overlap stat:     %.6g\n", diag.overlap_stat);
    out << buf;
    std::snprintf(buf, sizeof(buf), "  E[Var(A|X)] est:  %.6g\n", diag.g1_hat);
    out << buf;
    std::snprintf(buf, sizeof(buf), "  cond(B):          %.6g\n", diag.condition_number);
    out << buf;
    out << "  hetero p-values: ";
    for (Eigen::Index j = 0; j < diag.hetero_pvalues.size(); ++j) {
        std::snprintf(buf, sizeof(buf), " %.3g", diag.hetero_pvalues(j));
        out << buf;
    }
    out << "\n";
    for (const auto& reason : diag.reasons) out << "  note: " << reason << "\n";
    return out.str();
}

std::string effects_text(const medgmm::EffectReport& report, int verbosity) {
    std::ostringstream out;
    char buf[160];
    const double half_nde = medgmm::kZ95 * report.se_nde;
    const double half_nie = medgmm::kZ95 * report.se_nie;
    std::snprintf(buf, sizeof(buf), "NDE (%s, %s): %.3f +/- %.3f  [%.3f, %.3f]\n",
                  report.method.c_str(), report.se_method.c_str(), report.nde, half_nde,
                  report.ci_nde.first, report.ci_nde.second);
    out << buf;
    std::snprintf(buf, sizeof(buf), "NIE (%s, %s): %.3f +/- %.3f  [%.3f, %.3f]\n",
                  report.method.c_str(), report.se_method.c_str(), report.nie, half_nie,
                  report.ci_nie.first, report.ci_nie.second);
    out << buf;
    if (verbosity > 0) {
        for (const auto& me : report.per_mediator) {
            std::snprintf(buf, sizeof(buf), "  via %s: %.3f +/- %.3f\n", me.name.c_str(),
                          me.product, medgmm::kZ95 * me.se);
            out << buf;
        }
    }
    if (report.se_method == "bootstrap" && report.bootstrap_failures > 0) {
        std::snprintf(buf, sizeof(buf), "  bootstrap: %d of %d replicates failed and were excluded\n",
                      report.bootstrap_failures,
                      report.bootstrap_failures + report.bootstrap_reps_used);
        out << buf;
    }
    return out.str();
}

int cmd_analyze(RunConfig& cfg) {
    const std::uint64_t seed = resolve_seed(cfg);
    try {
        const medgmm::Table table = medgmm::read_csv_file(cfg.data_path);
        const medgmm::ModelSpec spec = to_model_spec(cfg);
        const medgmm::Dataset ds = medgmm::validate_dataset(table, spec);

        const medgmm::AnalysisOutput result = medgmm::run_analysis(ds, spec);

        std::ostringstream text;
        text << "seed: " << seed << "\n";
        if (ds.dropped_rows > 0) {
            text << "dropped " << ds.dropped_rows << " incomplete rows; n = " << ds.n << "\n";
        }
        text << diagnostics_text(result.diagnostics);
        for (const auto& report : result.reports) text << effects_text(report, cfg.verbosity);
        if (result.identification_failure) {
            text << "gmm estimates withheld: " << *result.identification_failure << "\n";
        }
        std::cout << text.str();

        const Json doc = medgmm::analyze_document(seed, ds, result.diagnostics, result.reports);
        write_output(cfg, doc, text.str());

        if (result.identification_failure) {
            return emit_error(cfg, kExitIdentification, "identification",
                              *result.identification_failure);
        }
        return kExitOk;
    } catch (const medgmm::ConstantExposureError& e) {
        return emit_error(cfg, kExitIdentification, "identification", e.what());
    } catch (const medgmm::IdentificationError& e) {
        return emit_error(cfg, kExitIdentification, "identification", e.what());
    } catch (const medgmm::ParseError& e) {
        return emit_error(cfg, kExitParse, "parse", e.what());
    } catch (const std::exception& e) {
        return emit_error(cfg, kExitEstimation, "estimation", e.what());
    }
}

int cmd_diagnose(RunConfig& cfg) {
    try {
        const medgmm::Table table = medgmm::read_csv_file(cfg.data_path);
        const medgmm::ModelSpec spec = to_model_spec(cfg);
        const medgmm::IdentificationReport diag = medgmm::run_diagnosis(table, spec);

        // Shape summary; tolerate the constant-exposure case where no Dataset
        // can be constructed.
        medgmm::Dataset summary;
        try {
            summary = medgmm::validate_dataset(table, spec);
        } catch (const medgmm::ConstantExposureError&) {
            summary.n = table.rows();
            summary.k = static_cast<Eigen::Index>(spec.mediators.size());
            summary.p = static_cast<Eigen::Index>(spec.covariates.size());
            summary.outcome_name = spec.outcome;
            summary.exposure_name = spec.exposure;
            summary.mediator_names = spec.mediators;
            summary.covariate_names = spec.covariates;
        }

        const std::string text = diagnostics_text(diag);
        std::cout << text;
        const Json doc = medgmm::diagnose_document(summary, diag);
        write_output(cfg, doc, text);
        return kExitOk;  // a completed diagnosis is success even when verdict=fail
    } catch (const medgmm::ParseError& e) {
        return emit_error(cfg, kExitParse, "parse", e.what());
    } catch (const std::exception& e) {
        return emit_error(cfg, kExitParse, "parse", e.what());
    }
}

int cmd_simulate(RunConfig& cfg) {
    const std::uint64_t seed = resolve_seed(cfg);
    try {
        if (cfg.reps < 1 || cfg.n < 1) {
            throw medgmm::ParseError("simulate requires --reps >= 1 and --n >= 1");
        }
        medgmm::SimConfig sim;
        sim.n = static_cast<Eigen::Index>(cfg.n);
        sim.eta = cfg.eta;
        sim.delta = cfg.delta;
        sim.reps = cfg.reps;
        sim.seed = seed;
        sim.threads = cfg.threads;

        const medgmm::McResult result = medgmm::run_monte_carlo(sim);

        std::ostringstream text;
        text << "seed: " << seed << "\n";
        text << "n = " << sim.n << ", eta = " << sim.eta << ", delta = " << sim.delta
             << ", reps = " << sim.reps << "\n";
        text << medgmm::format_table(result.rows);
        if (result.failed_gmm > 0 || result.failed_regression > 0) {
            text << "failed replicates: gmm " << result.failed_gmm << ", regression "
                 << result.failed_regression << " (excluded from aggregates)\n";
        }
        if (result.unreliable) {
            text << "warning: more than 5% of replicates failed; results are unreliable\n";
        }
        std::cout << text.str();

        const Json doc = medgmm::simulate_document(result);
        write_output(cfg, doc, text.str());
        return kExitOk;
    } catch (const medgmm::ParseError& e) {
        return emit_error(cfg, kExitParse, "parse", e.what());
    } catch (const std::exception& e) {
        return emit_error(cfg, kExitEstimation, "estimation", e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Natural direct/indirect effect estimation with multiple mediators"};
    app.set_config("--config", "", "Read options from a TOML/INI config file");
    app.fallthrough();  // app-level flags remain valid after the subcommand
    app.require_subcommand(1);

    RunConfig cfg;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", cfg.seed, "Seed for all randomness; omitted -> entropy seed")
            ->check(CLI::NonNegativeNumber)
            ->each([&](const std::string&) { cfg.seed_given = true; });
        sub->add_option("--threads", cfg.threads, "Worker threads (output is thread-count invariant)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--out", cfg.out_path, "Output file path");
        sub->add_option("--format", cfg.format, "Output file format")
            ->check(CLI::IsMember({"json", "text"}));
        sub->add_flag("-v,--verbose", cfg.verbosity, "More detail in text output");
    };

    auto add_roles = [&](CLI::App* sub) {
        sub->add_option("--data", cfg.data_path, "Input CSV file")->required();
        sub->add_option("--outcome", cfg.outcome, "Outcome column");
        sub->add_option("--exposure", cfg.exposure, "Exposure column ({0,1} or continuous)");
        sub->add_option("--mediators", cfg.mediators, "Mediator columns (comma separated)")
            ->required()
            ->delimiter(',');
        sub->add_option("--covariates", cfg.covariates, "Covariate columns (comma separated)")
            ->delimiter(',');
        sub->add_option("--missing", cfg.missing, "Missing-value policy")
            ->check(CLI::IsMember({"error", "drop"}));
    };

    CLI::App* analyze = app.add_subcommand("analyze", "Estimate effects from a CSV dataset");
    add_roles(analyze);
    analyze->add_option("--method", cfg.method, "Estimator(s) to run")
        ->check(CLI::IsMember({"gmm", "regression", "both"}));
    analyze->add_option("--se", cfg.se, "Standard error method(s)")
        ->check(CLI::IsMember({"sandwich", "bootstrap", "both"}));
    analyze->add_option("--bootstrap-reps", cfg.bootstrap_reps, "Bootstrap replicates")
        ->check(CLI::PositiveNumber);
    analyze->add_option("--boot-ci", cfg.boot_ci, "Bootstrap interval style")
        ->check(CLI::IsMember({"wald", "percentile"}));
    analyze->add_flag("--df-correction", cfg.df_correction,
                      "Apply the finite-sample n/(n-dim) variance multiplier");
    add_common(analyze);

    CLI::App* simulate = app.add_subcommand("simulate", "Run the Monte Carlo replicate grid");
    simulate->add_option("--n", cfg.n, "Sample size per replicate");
    simulate->add_option("--eta", cfg.eta, "Unmeasured-confounding strength");
    simulate->add_option("--delta", cfg.delta, "Heteroscedasticity magnitude");
    simulate->add_option("--reps", cfg.reps, "Number of replicates");
    add_common(simulate);

    CLI::App* diagnose = app.add_subcommand("diagnose", "Identification diagnostics only");
    add_roles(diagnose);
    add_common(diagnose);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitParse;
    }

    if (analyze->parsed()) return cmd_analyze(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (diagnose->parsed()) return cmd_diagnose(cfg);
    return kExitParse;
}
