#ifndef CFVAE_TYPES_HPP_
#define CFVAE_TYPES_HPP_

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace cfvae {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVecX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using ArrXX = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Matrix = MatX<double>;
using Vector = VecX<double>;
using RowVector = RowVecX<double>;
using Array2d = ArrXX<double>;
using Index = Eigen::Index;

// Thrown on malformed schemas: missing columns, bad role assignments.
struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string &msg) : std::runtime_error(msg) {}
};

// Thrown when raw input cannot be parsed into the declared schema.
struct IngestError : std::runtime_error {
    explicit IngestError(const std::string &msg) : std::runtime_error(msg) {}
};

// Thrown on graph violations (cycles, unknown nodes, bad files).
struct GraphError : std::runtime_error {
    explicit GraphError(const std::string &msg) : std::runtime_error(msg) {}
};

// Thrown on invalid configuration before any compute starts.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string &msg) : std::runtime_error(msg) {}
};

// Thrown when a computation produces non-finite values or is handed
// inputs outside an operation's numeric domain.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string &msg) : std::runtime_error(msg) {}
};

// Thrown on checkpoint / archive / report I/O failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string &msg) : std::runtime_error(msg) {}
};

} // namespace cfvae

#endif
