#include "aoimix/linalg.hpp"

#include "aoimix/error.hpp"

#include <cmath>
#include <string>

namespace aoimix {
namespace {

double sign_of(double magnitude, double sign_source) {
  return sign_source >= 0.0 ? std::fabs(magnitude) : -std::fabs(magnitude);
}

// Scales rows and columns by powers of two so their norms are comparable.
// Exact in floating point, so the spectrum is untouched.
void balance(Matrix& a) {
  constexpr double kRadix = 2.0;
  constexpr double kRadixSq = kRadix * kRadix;
  const Eigen::Index n = a.rows();
  bool done = false;
  while (!done) {
    done = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double r = 0.0;
      double c = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::fabs(a(j, i));
        r += std::fabs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / kRadix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= kRadix;
        c *= kRadixSq;
      }
      g = r * kRadix;
      while (c > g) {
        f /= kRadix;
        c /= kRadixSq;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        a.row(i) *= 1.0 / f;
        a.col(i) *= f;
      }
    }
  }
}

// Francis double-shift QR on an upper Hessenberg matrix. Uses 1-based
// indexing internally (h is (n+1)x(n+1), row/col 0 unused) so the deflation
// bookkeeping stays readable.
std::vector<Complex> hessenberg_qr(const Matrix& hess) {
  const int n = static_cast<int>(hess.rows());
  Matrix a = Matrix::Zero(n + 1, n + 1);
  a.block(1, 1, n, n) = hess;

  std::vector<double> wr(n + 1, 0.0);
  std::vector<double> wi(n + 1, 0.0);

  double anorm = 0.0;
  for (int i = 1; i <= n; ++i)
    for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::fabs(a(i, j));

  const long budget = 100L * n * n;
  long sweeps = 0;
  int nn = n;
  double t = 0.0;
  double p = 0.0, q = 0.0, r = 0.0, s = 0.0, w = 0.0, x = 0.0, y = 0.0, z = 0.0;
  while (nn >= 1) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l >= 2; --l) {
        s = std::fabs(a(l - 1, l - 1)) + std::fabs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::fabs(a(l, l - 1)) + s == s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      x = a(nn, nn);
      if (l == nn) {
        // One root isolated.
        wr[nn] = x + t;
        wi[nn] = 0.0;
        --nn;
      } else {
        y = a(nn - 1, nn - 1);
        w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          // Two roots isolated.
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::fabs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            wr[nn - 1] = wr[nn] = x + z;
            if (z != 0.0) wr[nn] = x - w / z;
            wi[nn - 1] = wi[nn] = 0.0;
          } else {
            wr[nn - 1] = wr[nn] = x + p;
            wi[nn - 1] = -z;
            wi[nn] = z;
          }
          nn -= 2;
        } else {
          if (++sweeps > budget) {
            throw NumericalError("eigenvalues: QR iteration did not converge within " +
                                 std::to_string(budget) + " sweeps");
          }
          if (its > 0 && its % 10 == 0) {
            // Exceptional shift.
            t += x;
            for (int i = 1; i <= nn; ++i) a(i, i) -= x;
            s = std::fabs(a(nn, nn - 1)) + std::fabs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          for (; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s;
            r = a(m + 2, m + 1);
            s = std::fabs(p) + std::fabs(q) + std::fabs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::fabs(a(m, m - 1)) * (std::fabs(q) + std::fabs(r));
            const double v =
                std::fabs(p) * (std::fabs(a(m - 1, m - 1)) + std::fabs(z) + std::fabs(a(m + 1, m + 1)));
            if (u + v == v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = a(k + 2, k - 1);
              x = std::fabs(p) + std::fabs(q) + std::fabs(r);
              if (x != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            s = sign_of(std::sqrt(p * p + q * q + r * r), p);
            if (s == 0.0) continue;
            if (k == m) {
              if (l != m) a(k, k - 1) = -a(k, k - 1);
            } else {
              a(k, k - 1) = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            z = r / s;
            q /= p;
            r /= p;
            for (int j = k; j <= nn; ++j) {
              p = a(k, j) + q * a(k + 1, j);
              if (k != nn - 1) {
                p += r * a(k + 2, j);
                a(k + 2, j) -= p * z;
              }
              a(k + 1, j) -= p * y;
              a(k, j) -= p * x;
            }
            const int mmin = nn < k + 3 ? nn : k + 3;
            for (int i = l; i <= mmin; ++i) {
              p = x * a(i, k) + y * a(i, k + 1);
              if (k != nn - 1) {
                p += z * a(i, k + 2);
                a(i, k + 2) -= p * r;
              }
              a(i, k + 1) -= p * q;
              a(i, k) -= p;
            }
          }
        }
      }
    } while (l < nn - 1);
  }

  std::vector<Complex> out;
  out.reserve(n);
  for (int i = 1; i <= n; ++i) out.emplace_back(wr[i], wi[i]);
  return out;
}

}  // namespace

std::pair<Complex, Complex> eigenvalues_2x2(double a, double b, double c, double d) {
  const double half_trace = 0.5 * (a + d);
  const double half_diff = 0.5 * (a - d);
  const double disc = half_diff * half_diff + b * c;
  if (disc >= 0.0) {
    const double root = std::sqrt(disc);
    // Larger-magnitude root first, the other through the determinant to
    // avoid cancellation.
    const double big = half_trace + sign_of(root, half_trace);
    const double det = a * d - b * c;
    const double small = big != 0.0 ? det / big : half_trace - sign_of(root, half_trace);
    return {Complex(big, 0.0), Complex(small, 0.0)};
  }
  const double im = std::sqrt(-disc);
  return {Complex(half_trace, im), Complex(half_trace, -im)};
}

Matrix hessenberg(const Matrix& m) {
  if (m.rows() != m.cols()) throw ContractViolation("hessenberg: matrix is not square");
  Matrix h = m;
  const Eigen::Index n = h.rows();
  for (Eigen::Index k = 0; k + 2 < n; ++k) {
    const Eigen::Index len = n - k - 1;
    Vector v = h.block(k + 1, k, len, 1);
    const double alpha = -sign_of(v.norm(), v[0]);
    if (alpha == 0.0) continue;
    v[0] -= alpha;
    const double vnorm = v.norm();
    if (vnorm == 0.0) continue;
    v /= vnorm;
    // H <- (I - 2vv^T) H (I - 2vv^T) on the trailing block.
    h.block(k + 1, k, len, n - k) -= 2.0 * v * (v.transpose() * h.block(k + 1, k, len, n - k));
    h.block(0, k + 1, n, len) -= 2.0 * (h.block(0, k + 1, n, len) * v) * v.transpose();
    h.block(k + 2, k, len - 1, 1).setZero();
    h(k + 1, k) = alpha;
  }
  return h;
}

std::vector<Complex> eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols()) throw ContractViolation("eigenvalues: matrix is not square");
  if (!m.allFinite()) throw ContractViolation("eigenvalues: matrix has non-finite entries");
  const Eigen::Index n = m.rows();
  if (n == 0) return {};
  if (n == 1) return {Complex(m(0, 0), 0.0)};
  if (n == 2) {
    auto [a, b] = eigenvalues_2x2(m(0, 0), m(0, 1), m(1, 0), m(1, 1));
    return {a, b};
  }
  Matrix work = m;
  balance(work);
  return hessenberg_qr(hessenberg(work));
}

Matrix matrix_power(const Matrix& m, std::int64_t power) {
  if (m.rows() != m.cols()) throw ContractViolation("matrix_power: matrix is not square");
  if (power < 0) throw ContractViolation("matrix_power: negative exponent");
  Matrix result = Matrix::Identity(m.rows(), m.cols());
  Matrix base = m;
  while (power > 0) {
    if (power & 1) result = result * base;
    power >>= 1;
    if (power > 0) base = base * base;
  }
  if (!result.allFinite()) throw DivergenceError("matrix_power: result overflowed");
  return result;
}

}  // namespace aoimix
