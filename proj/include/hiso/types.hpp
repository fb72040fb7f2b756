#ifndef HISO_TYPES_HPP
#define HISO_TYPES_HPP

#include <cstdint>

#include <Eigen/Dense>

namespace hiso {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Row-major so that a (local step, perturbation) grid is laid out in the
// same order it is produced, consumed, and serialized.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// The iterate x. All simulation arithmetic is 64-bit.
using ModelVector = Vector<double>;

/// tau x P grid of gradient scalars for one round.
using ScalarGrid = RowMatrix<double>;

using ClientId = std::uint32_t;
using Round = std::uint64_t;

}  // namespace hiso

#endif  // HISO_TYPES_HPP
