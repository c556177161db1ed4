#pragma once

#include <stdexcept>

namespace pdyn {

// Base class for contract and numerical failures raised by this library.
// CLI maps these to exit code 2; plain std::invalid_argument and I/O
// failures map to exit code 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// spectrum
struct NonUnitFractions : Error { using Error::Error; };
struct NegativeEigenvalue : Error { using Error::Error; };
struct TooSmallN : Error { using Error::Error; };
struct DegenerateData : Error { using Error::Error; };

// gauss
struct NonPSD : Error { using Error::Error; };
struct SingularDenominator : Error { using Error::Error; };
struct CollinearZ1Z3 : Error { using Error::Error; };

// macro
struct NonFinite : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };

// plateau
struct TooShort : Error { using Error::Error; };

// cli
struct InvalidDelta : Error { using Error::Error; };

}  // namespace pdyn
