#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace edgeflow {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr cplx kI{0.0, 1.0};

// Execution policy for the hot loops. The serial path is the reference
// implementation kept for testing and benchmarking.
enum class Exec { serial, parallel };

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct AssumptionViolation : Error {
  using Error::Error;
};
struct NotInSequence : Error {
  using Error::Error;
};
struct BoundViolation : Error {
  using Error::Error;
};
struct ExtractionAmbiguous : Error {
  using Error::Error;
};
struct NoContraction : Error {
  using Error::Error;
};
struct NoLimit : Error {
  using Error::Error;
};
struct ConstructionBug : Error {
  using Error::Error;
};
struct NumericalFailure : Error {
  using Error::Error;
};

// Distance to the nearest multiple of 2*pi.
double torus_dist(double k);

// Wrap into [0, 2*pi).
double wrap_2pi(double k);

// Fermi function 1/(1+exp(beta*e)), evaluated without overflow.
double fermi(double beta, double e);

// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace edgeflow
