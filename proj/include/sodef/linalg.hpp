#pragma once

#include <complex>
#include <vector>

#include "sodef/tensor.hpp"

namespace sodef {

/// Eigenvalues of a real square matrix. For real input, complex eigenvalues
/// come in exact conjugate pairs. Sorted by descending real part (ties by
/// descending imaginary part).
struct EigenResult {
    std::vector<std::complex<double>> eigenvalues;
    bool converged = true;
    std::size_t iterations = 0;  // QR sweeps used
};

/// Row-wise strict diagonal dominance check. margins[i] = |A_ii| - sum_{j!=i}
/// |A_ij|; computed with exact comparisons, no tolerance, so callers can apply
/// their own slack to the raw margins.
struct DominanceCertificate {
    bool is_dominant = false;
    bool is_negative_diag = false;
    std::vector<double> margins;
};

struct SymmetricEigen {
    std::vector<double> eigenvalues;  // descending
    Tensor eigenvectors;              // {k,k}; column i pairs with eigenvalues[i]
};

/// All eigenvalues of a general real matrix (n in [1, 128]) via Householder
/// reduction to Hessenberg form followed by Francis double-shift QR iteration.
/// Subdiagonal deflation tolerance 1e-12; after 100*n sweeps without full
/// deflation the result carries converged=false and best-effort values.
EigenResult eig_general(const Tensor& a);

/// Eigendecomposition A = U diag(w) U^T of a symmetric matrix (cyclic Jacobi
/// rotations). Input must be symmetric within 1e-10.
SymmetricEigen eig_symmetric(const Tensor& a);

DominanceCertificate dominance_certificate(const Tensor& a);

/// Max real part over eig_general(a); throws on non-convergence.
double spectral_abscissa(const Tensor& a);

/// e^{At} by scaling-and-squaring with a Taylor series on the scaled matrix.
/// Small dense matrices only (n <= 8); test oracle for the linear problem
/// dz/dt = Az, excluded from trained paths.
Tensor expm(const Tensor& a, double t);

}  // namespace sodef
