#pragma once

#include <stdexcept>
#include <string>

namespace medgmm {

// Bad input files, unknown columns, malformed cells, invalid options.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The data cannot identify the target parameters: the moment Jacobian is
// singular/ill-conditioned or the exposure carries no conditional variance.
class IdentificationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Constant exposure is a distinct identification failure: the exposure
// residual factor of the moment system is identically zero.
class ConstantExposureError : public IdentificationError {
public:
    using IdentificationError::IdentificationError;
};

// Numerical estimation failures: non-convergence, separation, rank-deficient
// designs, fragile bootstrap, negative computed variances.
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace medgmm
