#pragma once

#include <cmath>

#include "spinsvar/core.hpp"

namespace spinsvar {

/// exp(M) by scaling and squaring. M is scaled by 2^-s until its 1-norm is at
/// most 1/2, the Taylor series is summed until the next term falls below
/// 1e-16 of the partial sum (remainder well under 1e-13 relative), and the
/// result is squared s times.
inline Matrix matrix_exponential(const Matrix& m) {
  if (m.rows() != m.cols()) fail(ErrorCode::DimensionMismatch, "matrix_exponential: not square");
  if (!m.allFinite()) fail(ErrorCode::NonFinite, "matrix_exponential: non-finite input");
  const Index d = m.rows();
  if (d == 0) return Matrix(0, 0);

  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  if (squarings > 1000) fail(ErrorCode::ExpmOverflow, "matrix_exponential: norm too large");
  const Matrix a = m * std::ldexp(1.0, -squarings);

  Matrix sum = Matrix::Identity(d, d);
  Matrix term = Matrix::Identity(d, d);
  for (int order = 1; order <= 40; ++order) {
    term = (term * a) / static_cast<double>(order);
    sum += term;
    const double term_norm = term.cwiseAbs().colwise().sum().maxCoeff();
    const double sum_norm = sum.cwiseAbs().colwise().sum().maxCoeff();
    if (term_norm <= 1e-16 * sum_norm) break;
  }
  for (int i = 0; i < squarings; ++i) {
    sum = sum * sum;
    if (!sum.allFinite()) fail(ErrorCode::ExpmOverflow, "matrix_exponential: overflow");
  }
  return sum;
}

/// h(B) = tr(exp(B o B)) - d. Zero exactly when B is acyclic.
inline double acyclicity_h(const Matrix& b0) {
  if (b0.rows() != b0.cols()) fail(ErrorCode::DimensionMismatch, "acyclicity_h: not square");
  const Matrix e = matrix_exponential(b0.cwiseProduct(b0));
  return e.trace() - static_cast<double>(b0.rows());
}

}  // namespace spinsvar
