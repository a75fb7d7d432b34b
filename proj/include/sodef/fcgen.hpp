#pragma once

#include <cstdint>

#include "sodef/tensor.hpp"

namespace sodef {

// Fixed FC head whose k unit columns sit at the vertices of a regular
// (k-1)-simplex in R^n: every pairwise cosine equals 1/(1-k), the minimum
// attainable maximum.
struct SimplexFC {
    Tensor v;       // n x k, columns are the class directions
    std::size_t k = 0;
    std::size_t n = 0;
};

// Builds the simplex head from the Gram target B (diag 1, off-diag 1/(1-k)):
// B = U diag(sigma) U^T, V = Q sigma^(1/2) U^T with Q the first k columns of
// a seeded Haar-random orthogonal n x n matrix. Requires n >= k >= 2.
SimplexFC build_simplex_fc(std::size_t k, std::size_t n, std::uint64_t seed);

// max over i != j of cos(v_i, v_j) for the columns of an n x k matrix.
// Throws on k < 2 or a zero column.
double max_pairwise_cosine(const Tensor& v);

// Haar-distributed orthogonal n x n matrix: QR of a seeded Gaussian matrix
// with the R diagonal sign-corrected so the distribution is exactly Haar.
Tensor random_orthogonal(std::size_t n, std::uint64_t seed);

}  // namespace sodef
