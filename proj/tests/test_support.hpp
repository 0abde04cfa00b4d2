#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "medgmm/dataset.hpp"
#include "medgmm/linalg.hpp"
#include "medgmm/rng.hpp"

namespace testsupport {

// Random dataset with linear mediator/outcome structure and exposure-scaled
// mediator noise, so the moment system is identified.
inline medgmm::Dataset random_dataset(medgmm::RngStream& rng, Eigen::Index n, Eigen::Index k,
                                      Eigen::Index p, bool binary_exposure = true) {
    medgmm::Dataset ds;
    ds.n = n;
    ds.k = k;
    ds.p = p;
    ds.exposure_binary = binary_exposure;
    ds.y.resize(n);
    ds.a.resize(n);
    ds.m.resize(n, k);
    ds.x.resize(n, p);
    ds.outcome_name = "Y";
    ds.exposure_name = "A";
    for (Eigen::Index j = 0; j < k; ++j) ds.mediator_names.push_back("M" + std::to_string(j + 1));
    for (Eigen::Index j = 0; j < p; ++j) ds.covariate_names.push_back("X" + std::to_string(j + 1));

    Eigen::VectorXd beta1(k), theta2(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        beta1(j) = 0.5 + rng.next_uniform();
        theta2(j) = 0.5 + rng.next_uniform();
    }
    const double theta1 = 1.0 + rng.next_uniform();

    for (Eigen::Index i = 0; i < n; ++i) {
        double xsum = 0.0;
        for (Eigen::Index q = 0; q < p; ++q) {
            ds.x(i, q) = rng.next_normal();
            xsum += ds.x(i, q);
        }
        const double lin = 0.3 + 0.6 * (p > 0 ? xsum / static_cast<double>(p) : 0.0);
        ds.a(i) = binary_exposure ? rng.next_bernoulli(medgmm::expit(lin))
                                  : lin + rng.next_normal();
        const double scale = std::sqrt(1.0 + 2.0 * std::abs(ds.a(i)));
        double y = 0.4 + theta1 * ds.a(i) + 0.5 * xsum;
        for (Eigen::Index j = 0; j < k; ++j) {
            ds.m(i, j) = 0.2 * static_cast<double>(j) + beta1(j) * ds.a(i) + 0.4 * xsum +
                         scale * rng.next_normal();
            y += theta2(j) * ds.m(i, j);
        }
        ds.y(i) = y + rng.next_normal();
    }
    return ds;
}

// E[f(Z)] for Z ~ N(0,1) by Simpson's rule on [-10, 10].
inline double normal_expectation(const std::function<double(double)>& f, int intervals = 20000) {
    const double lo = -10.0, hi = 10.0;
    const double h = (hi - lo) / intervals;
    auto g = [&](double x) {
        return f(x) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    };
    double acc = g(lo) + g(hi);
    for (int i = 1; i < intervals; ++i) {
        acc += g(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

// Generic multivariate root finder on f: R^d -> R^d using Newton steps with
// a central finite-difference Jacobian. Independent of any analytic algebra
// in the implementation under test.
inline Eigen::VectorXd fd_newton_root(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
    int max_iter = 60, double tol = 1e-13, double h = 1e-6) {
    const Eigen::Index d = x.size();
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd fx = f(x);
        if (fx.cwiseAbs().maxCoeff() < tol) break;
        Eigen::MatrixXd jac(d, d);
        Eigen::VectorXd shifted = x;
        for (Eigen::Index q = 0; q < d; ++q) {
            shifted(q) = x(q) + h;
            const Eigen::VectorXd up = f(shifted);
            shifted(q) = x(q) - h;
            const Eigen::VectorXd down = f(shifted);
            shifted(q) = x(q);
            jac.col(q) = (up - down) / (2.0 * h);
        }
        x -= jac.colPivHouseholderQr().solve(fx);
    }
    return x;
}

// Derivative-free coordinate search maximizer with shrinking steps; used as
// an independent check on likelihood-based fits.
inline Eigen::VectorXd coordinate_search_max(
    const std::function<double(const Eigen::VectorXd&)>& objective, Eigen::VectorXd x,
    double step = 0.5, double min_step = 1e-10) {
    double best = objective(x);
    while (step > min_step) {
        bool improved = false;
        for (Eigen::Index q = 0; q < x.size(); ++q) {
            for (const double sign : {1.0, -1.0}) {
                Eigen::VectorXd trial = x;
                trial(q) += sign * step;
                const double value = objective(trial);
                if (value > best) {
                    best = value;
                    x = trial;
                    improved = true;
                }
            }
        }
        if (!improved) step /= 2.0;
    }
    return x;
}

inline void write_csv(const std::string& path, const medgmm::Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    out << ds.outcome_name << "," << ds.exposure_name;
    for (const auto& name : ds.mediator_names) out << "," << name;
    for (const auto& name : ds.covariate_names) out << "," << name;
    out << "\n";
    char buf[64];
    auto put = [&](double v, bool lead_comma) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        if (lead_comma) out << ",";
        out << buf;
    };
    for (Eigen::Index i = 0; i < ds.n; ++i) {
        put(ds.y(i), false);
        put(ds.a(i), true);
        for (Eigen::Index j = 0; j < ds.k; ++j) put(ds.m(i, j), true);
        for (Eigen::Index q = 0; q < ds.p; ++q) put(ds.x(i, q), true);
        out << "\n";
    }
}

// Block-duplicates a dataset: all rows once, then all rows again.
inline medgmm::Dataset duplicate_rows(const medgmm::Dataset& ds) {
    medgmm::Dataset out = ds;
    out.n = 2 * ds.n;
    out.y.resize(out.n);
    out.a.resize(out.n);
    out.m.resize(out.n, ds.k);
    out.x.resize(out.n, ds.p);
    out.y << ds.y, ds.y;
    out.a << ds.a, ds.a;
    out.m << ds.m, ds.m;
    out.x << ds.x, ds.x;
    return out;
}

}  // namespace testsupport
