#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace e11 {

using Index = Eigen::Index;

using MatrixD = Eigen::MatrixXd;
using VectorD = Eigen::VectorXd;
// Row-major float storage so matrix rows map directly onto on-disk records.
using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorF = Eigen::VectorXf;

// Error categories map onto CLI exit codes: config=2, dependency=3, data=4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Missing or fingerprint-mismatched upstream artifact.
struct DependencyError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

}  // namespace e11
