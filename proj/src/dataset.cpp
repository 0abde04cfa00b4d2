#include "medgmm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace medgmm {

const Eigen::VectorXd* Table::find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return &columns[i];
    }
    return nullptr;
}

namespace {

const Eigen::VectorXd& require_column(const Table& raw, const std::string& name,
                                      const std::string& role) {
    const Eigen::VectorXd* col = raw.find(name);
    if (col == nullptr) {
        throw ParseError("missing " + role + " column '" + name + "'");
    }
    return *col;
}

bool is_binary01(const Eigen::VectorXd& a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

}  // namespace

Dataset validate_dataset(const Table& raw, const ModelSpec& spec) {
    if (spec.mediators.empty()) {
        throw ParseError("mediator list must be nonempty");
    }
    std::set<std::string> seen{spec.outcome, spec.exposure};
    for (const auto& c : spec.covariates) seen.insert(c);
    for (const auto& m : spec.mediators) {
        if (seen.count(m) != 0) {
            throw ParseError("mediator column '" + m +
                             "' also plays another role; roles must be distinct");
        }
    }

    const Eigen::VectorXd& y = require_column(raw, spec.outcome, "outcome");
    const Eigen::VectorXd& a = require_column(raw, spec.exposure, "exposure");
    std::vector<const Eigen::VectorXd*> m_cols, x_cols;
    for (const auto& name : spec.mediators) m_cols.push_back(&require_column(raw, name, "mediator"));
    for (const auto& name : spec.covariates) x_cols.push_back(&require_column(raw, name, "covariate"));

    const Eigen::Index n_raw = raw.rows();
    std::vector<Eigen::Index> keep;
    keep.reserve(n_raw);
    for (Eigen::Index i = 0; i < n_raw; ++i) {
        bool complete = std::isfinite(y(i)) && std::isfinite(a(i));
        for (const auto* c : m_cols) complete = complete && std::isfinite((*c)(i));
        for (const auto* c : x_cols) complete = complete && std::isfinite((*c)(i));
        if (complete) {
            keep.push_back(i);
        } else if (spec.missing == MissingPolicy::error) {
            throw ParseError("missing value in row " + std::to_string(i + 1) +
                             " (use the drop policy to exclude incomplete rows)");
        }
    }
    if (keep.empty()) {
        throw ParseError("zero rows remain after filtering missing values");
    }

    Dataset ds;
    ds.n = static_cast<Eigen::Index>(keep.size());
    ds.k = static_cast<Eigen::Index>(m_cols.size());
    ds.p = static_cast<Eigen::Index>(x_cols.size());
    ds.dropped_rows = n_raw - ds.n;
    ds.y.resize(ds.n);
    ds.a.resize(ds.n);
    ds.m.resize(ds.n, ds.k);
    ds.x.resize(ds.n, ds.p);
    for (Eigen::Index r = 0; r < ds.n; ++r) {
        const Eigen::Index i = keep[r];
        ds.y(r) = y(i);
        ds.a(r) = a(i);
        for (Eigen::Index j = 0; j < ds.k; ++j) ds.m(r, j) = (*m_cols[j])(i);
        for (Eigen::Index j = 0; j < ds.p; ++j) ds.x(r, j) = (*x_cols[j])(i);
    }

    if ((ds.a.array() == ds.a(0)).all()) {
        throw ConstantExposureError(
            "constant exposure: Var(A|X) is identically zero, so the exposure-variance "
            "necessary condition for identification fails");
    }
    ds.exposure_binary = is_binary01(ds.a);

    ds.outcome_name = spec.outcome;
    ds.exposure_name = spec.exposure;
    ds.mediator_names = spec.mediators;
    ds.covariate_names = spec.covariates;
    return ds;
}

DesignMatrix build_design(const Dataset& ds, bool include_exposure, bool include_mediators) {
    const Eigen::Index cols = 1 + (include_exposure ? 1 : 0) +
                              (include_mediators ? ds.k : 0) + ds.p;
    DesignMatrix design;
    design.values.resize(ds.n, cols);
    design.labels.reserve(cols);

    Eigen::Index c = 0;
    design.values.col(c++).setOnes();
    design.labels.push_back("(intercept)");
    if (include_exposure) {
        design.values.col(c++) = ds.a;
        design.labels.push_back(ds.exposure_name.empty() ? "A" : ds.exposure_name);
    }
    if (include_mediators) {
        for (Eigen::Index j = 0; j < ds.k; ++j) {
            design.values.col(c++) = ds.m.col(j);
            design.labels.push_back(j < static_cast<Eigen::Index>(ds.mediator_names.size())
                                        ? ds.mediator_names[j]
                                        : "M" + std::to_string(j + 1));
        }
    }
    for (Eigen::Index j = 0; j < ds.p; ++j) {
        design.values.col(c++) = ds.x.col(j);
        design.labels.push_back(j < static_cast<Eigen::Index>(ds.covariate_names.size())
                                    ? ds.covariate_names[j]
                                    : "X" + std::to_string(j + 1));
    }
    return design;
}

}  // namespace medgmm
