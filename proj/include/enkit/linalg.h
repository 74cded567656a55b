// enkit/linalg.h

// Copyright 2026  enkit authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef ENKIT_LINALG_H_
#define ENKIT_LINALG_H_

#include <utility>

#include "enkit/tensor.h"

namespace enkit {

// Dense helpers outside the autodiff path. All inputs are rank-2 tensors.

// Lower Cholesky factor L with A = L L^T. Throws NumericError on a
// nonpositive pivot (A not positive definite).
Tensor cholesky_factor(const Tensor& a);

// Solve A X = B for SPD A via the Cholesky factorization.
Tensor cholesky_solve(const Tensor& a, const Tensor& b);
Tensor cholesky_solve_factored(const Tensor& l, const Tensor& b);

// log det(A) for SPD A, from the Cholesky factor diagonal.
double cholesky_logdet(const Tensor& l);

// Cyclic Jacobi rotations for a symmetric matrix. Returns (eigenvalues,
// eigenvectors) with eigenvalues sorted descending and eigenvectors in the
// matching columns, orthonormal. Throws on input asymmetry beyond 1e-10.
std::pair<Tensor, Tensor> sym_eig_jacobi(const Tensor& a);

// Small conveniences used by the model code.
Tensor mat_add(const Tensor& a, const Tensor& b);
Tensor mat_sub(const Tensor& a, const Tensor& b);
Tensor mat_mul(const Tensor& a, const Tensor& b);
Tensor mat_transpose(const Tensor& a);
Tensor mat_scale(const Tensor& a, double c);
Tensor symmetrize(const Tensor& a);  // (A + A^T) / 2
double quad_form(const Tensor& q, const Tensor& x, const Tensor& y);  // x'Qy

}  // namespace enkit

#endif  // ENKIT_LINALG_H_
