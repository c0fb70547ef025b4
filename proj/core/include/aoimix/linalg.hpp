#pragma once

#include "aoimix/types.hpp"

#include <cstdint>
#include <vector>

namespace aoimix {

/// All eigenvalues of a real square matrix, complex pairs adjacent.
///
/// Balances the matrix, reduces it to upper Hessenberg form with Householder
/// reflections and runs the Francis double-shift QR iteration. 1x1 and 2x2
/// inputs are solved in closed form. The total QR sweep count is capped at
/// 100*n^2; exceeding it raises NumericalError.
std::vector<Complex> eigenvalues(const Matrix& m);

/// Reduces `m` to upper Hessenberg form by an orthogonal similarity.
/// Entries below the first subdiagonal are exactly zero on return.
Matrix hessenberg(const Matrix& m);

/// Eigenvalues of [[a, b], [c, d]].
std::pair<Complex, Complex> eigenvalues_2x2(double a, double b, double c, double d);

/// m^power by repeated squaring. Throws DivergenceError on a non-finite result.
Matrix matrix_power(const Matrix& m, std::int64_t power);

}  // namespace aoimix
