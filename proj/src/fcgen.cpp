#include "sodef/fcgen.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sodef/linalg.hpp"
#include "sodef/rng.hpp"

namespace sodef {

Tensor random_orthogonal(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("random_orthogonal: n must be >= 1");
    Rng rng(seed);
    Tensor r = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n * n; ++i) r[i] = rng.normal();

    // Householder QR; reflectors are kept to accumulate Q afterwards.
    std::vector<std::vector<double>> reflectors;
    reflectors.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        double xnorm = 0.0;
        for (std::size_t i = k; i < n; ++i) xnorm += r.at(i, k) * r.at(i, k);
        xnorm = std::sqrt(xnorm);
        std::vector<double> v(n, 0.0);
        if (xnorm == 0.0) {
            reflectors.push_back(std::move(v));
            continue;
        }
        const double alpha = r.at(k, k) >= 0.0 ? -xnorm : xnorm;
        for (std::size_t i = k; i < n; ++i) v[i] = r.at(i, k);
        v[k] -= alpha;
        double vnorm2 = 0.0;
        for (std::size_t i = k; i < n; ++i) vnorm2 += v[i] * v[i];
        if (vnorm2 == 0.0) {
            reflectors.push_back(std::move(v));
            continue;
        }
        const double beta = 2.0 / vnorm2;
        for (std::size_t j = k; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k; i < n; ++i) s += v[i] * r.at(i, j);
            s *= beta;
            for (std::size_t i = k; i < n; ++i) r.at(i, j) -= s * v[i];
        }
        reflectors.push_back(std::move(v));
    }

    // Q = P_0 P_1 ... P_{n-1}, applied right-to-left onto the identity.
    Tensor q = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) q.at(i, i) = 1.0;
    for (std::size_t k = n; k-- > 0;) {
        const std::vector<double>& v = reflectors[k];
        double vnorm2 = 0.0;
        for (std::size_t i = k; i < n; ++i) vnorm2 += v[i] * v[i];
        if (vnorm2 == 0.0) continue;
        const double beta = 2.0 / vnorm2;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k; i < n; ++i) s += v[i] * q.at(i, j);
            s *= beta;
            for (std::size_t i = k; i < n; ++i) q.at(i, j) -= s * v[i];
        }
    }

    // Sign-correct with the R diagonal so the distribution is exactly Haar.
    for (std::size_t j = 0; j < n; ++j)
        if (r.at(j, j) < 0.0)
            for (std::size_t i = 0; i < n; ++i) q.at(i, j) = -q.at(i, j);
    return q;
}

SimplexFC build_simplex_fc(std::size_t k, std::size_t n, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("build_simplex_fc: k must be >= 2");
    if (n < k) throw std::invalid_argument("build_simplex_fc: requires n >= k");

    Tensor b = Tensor::full({k, k}, 1.0 / (1.0 - static_cast<double>(k)));
    for (std::size_t i = 0; i < k; ++i) b.at(i, i) = 1.0;

    SymmetricEigen eig = eig_symmetric(b);
    Tensor sqrt_sigma = Tensor::zeros({k, k});
    // B has rank k-1 with nonzero eigenvalues k/(k-1) > 1; the kernel
    // eigenvalue comes back as rotation noise of either sign, and sqrt would
    // amplify a positive ~1e-16 into a ~1e-8 common component across the
    // columns, so snap everything near zero before the square root.
    for (std::size_t i = 0; i < k; ++i)
        sqrt_sigma.at(i, i) = eig.eigenvalues[i] > 1e-10 ? std::sqrt(eig.eigenvalues[i]) : 0.0;

    Tensor q_full = random_orthogonal(n, seed);
    Tensor q = Tensor::zeros({n, k});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) q.at(i, j) = q_full.at(i, j);

    SimplexFC fc;
    fc.v = matmul(matmul(q, sqrt_sigma), transpose(eig.eigenvectors));
    fc.k = k;
    fc.n = n;
    return fc;
}

double max_pairwise_cosine(const Tensor& v) {
    if (v.ndim() != 2) throw std::invalid_argument("max_pairwise_cosine: expects a matrix");
    const std::size_t n = v.shape()[0], k = v.shape()[1];
    if (k < 2) throw std::invalid_argument("max_pairwise_cosine: needs at least two columns");

    std::vector<double> norms(k);
    for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v.at(i, j) * v.at(i, j);
        norms[j] = std::sqrt(s);
        if (norms[j] == 0.0) throw std::invalid_argument("max_pairwise_cosine: zero column");
    }
    double best = -2.0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            double dot = 0.0;
            for (std::size_t r = 0; r < n; ++r) dot += v.at(r, i) * v.at(r, j);
            best = std::max(best, dot / (norms[i] * norms[j]));
        }
    }
    return best;
}

}  // namespace sodef
