#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "medgmm/csv.hpp"
#include "medgmm/dataset.hpp"
#include "medgmm/rng.hpp"
#include "test_support.hpp"

using namespace medgmm;

namespace {

ModelSpec basic_spec() {
    ModelSpec spec;
    spec.outcome = "Y";
    spec.exposure = "A";
    spec.mediators = {"M1", "M2", "M3"};
    spec.covariates = {"X1"};
    return spec;
}

Table table_from_dataset(const Dataset& ds) {
    Table t;
    t.names.push_back(ds.outcome_name);
    t.columns.push_back(ds.y);
    t.names.push_back(ds.exposure_name);
    t.columns.push_back(ds.a);
    for (Eigen::Index j = 0; j < ds.k; ++j) {
        t.names.push_back(ds.mediator_names[j]);
        t.columns.push_back(ds.m.col(j));
    }
    for (Eigen::Index q = 0; q < ds.p; ++q) {
        t.names.push_back(ds.covariate_names[q]);
        t.columns.push_back(ds.x.col(q));
    }
    return t;
}

}  // namespace

TEST_CASE("validate_dataset passes shapes through") {
    RngStream rng(11, 0, RngStream::kGeneric);
    const Dataset src = testsupport::random_dataset(rng, 527, 3, 1);
    const Dataset ds = validate_dataset(table_from_dataset(src), basic_spec());
    CHECK(ds.n == 527);
    CHECK(ds.k == 3);
    CHECK(ds.p == 1);
    CHECK(ds.dropped_rows == 0);
    CHECK(ds.exposure_binary);
}

TEST_CASE("constant exposure is rejected with a dedicated error") {
    RngStream rng(12, 0, RngStream::kGeneric);
    Dataset src = testsupport::random_dataset(rng, 40, 3, 1);
    src.a.setOnes();
    CHECK_THROWS_AS(validate_dataset(table_from_dataset(src), basic_spec()),
                    ConstantExposureError);
}

TEST_CASE("drop policy removes incomplete rows and counts them") {
    RngStream rng(13, 0, RngStream::kGeneric);
    Dataset src = testsupport::random_dataset(rng, 60, 3, 1);
    Table t = table_from_dataset(src);
    t.columns[3](17) = std::numeric_limits<double>::quiet_NaN();  // one missing M2 cell

    ModelSpec spec = basic_spec();
    CHECK_THROWS_AS(validate_dataset(t, spec), ParseError);  // default policy errors

    spec.missing = MissingPolicy::drop;
    const Dataset ds = validate_dataset(t, spec);
    CHECK(ds.n == 59);
    CHECK(ds.dropped_rows == 1);
}

TEST_CASE("missing column and zero-row errors") {
    RngStream rng(14, 0, RngStream::kGeneric);
    const Dataset src = testsupport::random_dataset(rng, 20, 3, 1);
    Table t = table_from_dataset(src);

    ModelSpec spec = basic_spec();
    spec.mediators = {"M1", "M2", "M9"};
    CHECK_THROWS_WITH_AS(validate_dataset(t, spec), doctest::Contains("M9"), ParseError);

    ModelSpec spec2 = basic_spec();
    spec2.missing = MissingPolicy::drop;
    for (auto& col : t.columns) col.setConstant(std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(validate_dataset(t, spec2), ParseError);
}

TEST_CASE("mediator role must be distinct and nonempty") {
    RngStream rng(15, 0, RngStream::kGeneric);
    const Dataset src = testsupport::random_dataset(rng, 20, 3, 1);
    const Table t = table_from_dataset(src);

    ModelSpec spec = basic_spec();
    spec.mediators = {};
    CHECK_THROWS_AS(validate_dataset(t, spec), ParseError);

    spec = basic_spec();
    spec.mediators = {"M1", "X1"};
    CHECK_THROWS_AS(validate_dataset(t, spec), ParseError);
}

TEST_CASE("round-trip: extracting and rebuilding is bitwise identical") {
    RngStream rng(16, 0, RngStream::kGeneric);
    const Dataset src = testsupport::random_dataset(rng, 83, 2, 2);
    ModelSpec spec = basic_spec();
    spec.mediators = {"M1", "M2"};
    spec.covariates = {"X1", "X2"};
    const Dataset first = validate_dataset(table_from_dataset(src), spec);
    const Dataset second = validate_dataset(table_from_dataset(first), spec);
    CHECK((first.y - second.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((first.a - second.a).cwiseAbs().maxCoeff() == 0.0);
    CHECK((first.m - second.m).cwiseAbs().maxCoeff() == 0.0);
    CHECK((first.x - second.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_design column layout") {
    Dataset ds;
    ds.n = 2;
    ds.k = 0;
    ds.p = 0;
    ds.y = Eigen::Vector2d(0.0, 0.0);
    ds.a = Eigen::Vector2d(0.0, 1.0);
    ds.m.resize(2, 0);
    ds.x.resize(2, 0);
    const DesignMatrix d = build_design(ds, true, false);
    CHECK(d.values.rows() == 2);
    CHECK(d.values.cols() == 2);
    CHECK(d.values(0, 0) == 1.0);
    CHECK(d.values(1, 0) == 1.0);
    CHECK(d.values(0, 1) == 0.0);
    CHECK(d.values(1, 1) == 1.0);

    Dataset one;
    one.n = 1;
    one.k = 2;
    one.p = 1;
    one.y = Eigen::VectorXd::Constant(1, 2.0);
    one.a = Eigen::VectorXd::Constant(1, 2.0);
    one.m = Eigen::MatrixXd::Constant(1, 2, 2.0);
    one.x = Eigen::MatrixXd::Constant(1, 1, 2.0);
    const DesignMatrix full = build_design(one, true, true);
    CHECK(full.values.cols() == 5);
    CHECK(full.values(0, 0) == 1.0);
    for (int c = 1; c < 5; ++c) CHECK(full.values(0, c) == 2.0);
}

TEST_CASE("build_design column count property") {
    RngStream rng(17, 0, RngStream::kGeneric);
    for (int trial = 0; trial < 20; ++trial) {
        const auto k = static_cast<Eigen::Index>(1 + rng.next_index(3));
        const auto p = static_cast<Eigen::Index>(rng.next_index(4));
        const Dataset ds = testsupport::random_dataset(rng, 10, k, p);
        for (const bool ia : {false, true}) {
            for (const bool im : {false, true}) {
                const DesignMatrix d = build_design(ds, ia, im);
                CHECK(d.values.cols() == 1 + (ia ? 1 : 0) + (im ? k : 0) + p);
                CHECK((d.values.col(0).array() == 1.0).all());
            }
        }
    }
}

TEST_CASE("csv parsing: header, quoting, missing tokens, bad cells") {
    std::istringstream good(
        "Y,A,\"M,1\",X1\n"
        "1.5,0,2.25,0.5\n"
        "2.5,1,\"3.5\",-0.25\n"
        "NA,1,nan,\n");
    const Table t = read_csv(good);
    REQUIRE(t.names.size() == 4);
    CHECK(t.names[2] == "M,1");
    CHECK(t.rows() == 3);
    CHECK(t.columns[0](0) == 1.5);
    CHECK(t.columns[2](1) == 3.5);
    CHECK(std::isnan(t.columns[0](2)));
    CHECK(std::isnan(t.columns[2](2)));
    CHECK(std::isnan(t.columns[3](2)));

    std::istringstream bad("Y,A\n1.0,zebra\n");
    CHECK_THROWS_WITH_AS(read_csv(bad), doctest::Contains("zebra"), ParseError);

    std::istringstream ragged("Y,A\n1.0\n");
    CHECK_THROWS_AS(read_csv(ragged), ParseError);

    std::istringstream empty("");
    CHECK_THROWS_AS(read_csv(empty), ParseError);
}
