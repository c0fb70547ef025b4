#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <vector>

namespace aoimix {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Complex = std::complex<double>;

/// Slot index on the discrete simulation clock.
using Slot = std::int64_t;

/// 0/1 decision flags (sampling s_{m,t}, selection u_{m,t}).
using BitVector = std::vector<std::uint8_t>;

}  // namespace aoimix
