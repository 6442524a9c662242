#pragma once

#include <vector>

#include "uqtab/matrix.hpp"

namespace uqtab {

// Full eigendecomposition of a symmetric matrix: A = V diag(w) V^T with
// eigenvalues ascending and eigenvectors in the columns of V. Householder
// tridiagonalization followed by implicit-shift QL; O(n^3), fine for the
// feature dimensions this project works at (n up to ~600).
//
// Throws if the QL iteration fails to converge.
void sym_eig(const Matrix& a, std::vector<double>& eigenvalues, Matrix& eigenvectors);

}  // namespace uqtab
