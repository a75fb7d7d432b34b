#include "sodef/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sodef {

namespace {

constexpr double kDeflationTol = 1e-12;

struct Mat {
    std::vector<double>& d;
    std::size_t n;
    double& operator()(std::size_t i, std::size_t j) { return d[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return d[i * n + j]; }
};

void require_square_finite(const Tensor& a, const char* who) {
    if (a.ndim() != 2 || a.shape()[0] != a.shape()[1])
        throw std::invalid_argument(std::string(who) + ": expects a square matrix");
    if (a.shape()[0] == 0) throw std::invalid_argument(std::string(who) + ": empty matrix");
    if (!a.all_finite()) throw std::invalid_argument(std::string(who) + ": non-finite entries");
}

double fortran_sign(double a, double b) { return b >= 0.0 ? std::fabs(a) : -std::fabs(a); }

// Householder similarity reduction to upper Hessenberg form.
void hessenberg_reduce(Mat h, std::size_t n) {
    std::vector<double> v(n), w(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double xnorm = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) xnorm += h(i, k) * h(i, k);
        xnorm = std::sqrt(xnorm);
        if (xnorm == 0.0) continue;

        const double alpha = -fortran_sign(xnorm, h(k + 1, k));
        double vnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            v[i] = h(i, k) - (i == k + 1 ? alpha : 0.0);
            vnorm2 += v[i] * v[i];
        }
        if (vnorm2 == 0.0) continue;
        const double beta = 2.0 / vnorm2;

        // H <- P H with P = I - beta v v^T (rows k+1..n-1)
        for (std::size_t j = k; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) s += v[i] * h(i, j);
            s *= beta;
            for (std::size_t i = k + 1; i < n; ++i) h(i, j) -= s * v[i];
        }
        // H <- H P (columns k+1..n-1)
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) s += h(i, j) * v[j];
            s *= beta;
            for (std::size_t j = k + 1; j < n; ++j) h(i, j) -= s * v[j];
        }
        h(k + 1, k) = alpha;
        for (std::size_t i = k + 2; i < n; ++i) h(i, k) = 0.0;
    }
}

// Francis double-shift QR on an upper Hessenberg matrix. Classic hqr scheme
// (EISPACK lineage), eigenvalues only.
bool hqr_eigenvalues(Mat h, std::size_t n, std::vector<double>& wr, std::vector<double>& wi,
                     std::size_t max_sweeps, std::size_t& sweeps) {
    const std::ptrdiff_t N = static_cast<std::ptrdiff_t>(n);
    auto H = [&](std::ptrdiff_t i, std::ptrdiff_t j) -> double& {
        return h(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    };

    double anorm = 0.0;
    for (std::ptrdiff_t i = 0; i < N; ++i)
        for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(i - 1, 0); j < N; ++j)
            anorm += std::fabs(H(i, j));
    if (anorm == 0.0) anorm = 1.0;

    sweeps = 0;
    std::ptrdiff_t nn = N - 1;
    double t = 0.0;
    while (nn >= 0) {
        std::ptrdiff_t its = 0;
        std::ptrdiff_t l = 0;
        for (;;) {
            for (l = nn; l >= 1; --l) {
                double s = std::fabs(H(l - 1, l - 1)) + std::fabs(H(l, l));
                if (s == 0.0) s = anorm;
                if (std::fabs(H(l, l - 1)) <= kDeflationTol * s) {
                    H(l, l - 1) = 0.0;
                    break;
                }
            }
            if (l < 0) l = 0;
            double x = H(nn, nn);
            if (l == nn) {  // one real eigenvalue deflates
                wr[nn] = x + t;
                wi[nn] = 0.0;
                --nn;
                break;
            }
            double y = H(nn - 1, nn - 1);
            double w = H(nn, nn - 1) * H(nn - 1, nn);
            if (l == nn - 1) {  // 2x2 block deflates
                double p = 0.5 * (y - x);
                double q = p * p + w;
                double z = std::sqrt(std::fabs(q));
                x += t;
                if (q >= 0.0) {
                    z = p + fortran_sign(z, p);
                    wr[nn - 1] = wr[nn] = x + z;
                    if (z != 0.0) wr[nn] = x - w / z;
                    wi[nn - 1] = wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = wr[nn] = x + p;
                    wi[nn] = z;
                    wi[nn - 1] = -z;
                }
                nn -= 2;
                break;
            }
            if (sweeps >= max_sweeps) return false;
            if (its == 10 || its == 20) {  // exceptional shift
                t += x;
                for (std::ptrdiff_t i = 0; i <= nn; ++i) H(i, i) -= x;
                double s = std::fabs(H(nn, nn - 1)) + std::fabs(H(nn - 1, nn - 2));
                y = x = 0.75 * s;
                w = -0.4375 * s * s;
            }
            ++its;
            ++sweeps;

            double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
            std::ptrdiff_t m;
            for (m = nn - 2; m >= l; --m) {  // two consecutive small subdiagonals?
                z = H(m, m);
                r = x - z;
                double s = y - z;
                p = (r * s - w) / H(m + 1, m) + H(m, m + 1);
                q = H(m + 1, m + 1) - z - r - s;
                r = H(m + 2, m + 1);
                s = std::fabs(p) + std::fabs(q) + std::fabs(r);
                p /= s;
                q /= s;
                r /= s;
                if (m == l) break;
                const double u = std::fabs(H(m, m - 1)) * (std::fabs(q) + std::fabs(r));
                const double v = std::fabs(p) *
                                 (std::fabs(H(m - 1, m - 1)) + std::fabs(z) + std::fabs(H(m + 1, m + 1)));
                if (u <= std::numeric_limits<double>::epsilon() * v) break;
            }
            for (std::ptrdiff_t i = m + 2; i <= nn; ++i) {
                H(i, i - 2) = 0.0;
                if (i != m + 2) H(i, i - 3) = 0.0;
            }
            for (std::ptrdiff_t k = m; k <= nn - 1; ++k) {  // double QR sweep
                if (k != m) {
                    p = H(k, k - 1);
                    q = H(k + 1, k - 1);
                    r = k != nn - 1 ? H(k + 2, k - 1) : 0.0;
                    x = std::fabs(p) + std::fabs(q) + std::fabs(r);
                    if (x != 0.0) {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                double s = fortran_sign(std::sqrt(p * p + q * q + r * r), p);
                if (s == 0.0) continue;
                if (k == m) {
                    if (l != m) H(k, k - 1) = -H(k, k - 1);
                } else {
                    H(k, k - 1) = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;
                for (std::ptrdiff_t j = k; j <= nn; ++j) {  // row transform
                    double pp = H(k, j) + q * H(k + 1, j);
                    if (k != nn - 1) {
                        pp += r * H(k + 2, j);
                        H(k + 2, j) -= pp * z;
                    }
                    H(k + 1, j) -= pp * y;
                    H(k, j) -= pp * x;
                }
                const std::ptrdiff_t mmin = std::min(nn, k + 3);
                for (std::ptrdiff_t i = l; i <= mmin; ++i) {  // column transform
                    double pp = x * H(i, k) + y * H(i, k + 1);
                    if (k != nn - 1) {
                        pp += z * H(i, k + 2);
                        H(i, k + 2) -= pp * r;
                    }
                    H(i, k + 1) -= pp * q;
                    H(i, k) -= pp;
                }
            }
        }
        if (sweeps >= max_sweeps && nn >= 0) {
            // best-effort values for the unresolved block
            for (std::ptrdiff_t i = 0; i <= nn; ++i) {
                wr[i] = H(i, i) + t;
                wi[i] = 0.0;
            }
            return false;
        }
    }
    return true;
}

}  // namespace

EigenResult eig_general(const Tensor& a) {
    require_square_finite(a, "eig_general");
    const std::size_t n = a.shape()[0];
    if (n > 128) throw std::invalid_argument("eig_general: n exceeds the supported 128");

    std::vector<double> work = a.data();
    Mat h{work, n};
    std::vector<double> wr(n, 0.0), wi(n, 0.0);

    EigenResult result;
    if (n == 1) {
        result.eigenvalues = {std::complex<double>(work[0], 0.0)};
        return result;
    }
    hessenberg_reduce(h, n);
    std::size_t sweeps = 0;
    result.converged = hqr_eigenvalues(h, n, wr, wi, 100 * n, sweeps);
    result.iterations = sweeps;
    result.eigenvalues.reserve(n);
    for (std::size_t i = 0; i < n; ++i) result.eigenvalues.emplace_back(wr[i], wi[i]);
    std::sort(result.eigenvalues.begin(), result.eigenvalues.end(),
              [](const std::complex<double>& x, const std::complex<double>& y) {
                  if (x.real() != y.real()) return x.real() > y.real();
                  return x.imag() > y.imag();
              });
    return result;
}

SymmetricEigen eig_symmetric(const Tensor& a) {
    require_square_finite(a, "eig_symmetric");
    const std::size_t n = a.shape()[0];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::fabs(a.at(i, j) - a.at(j, i)) > 1e-10)
                throw std::invalid_argument("eig_symmetric: matrix is not symmetric within 1e-10");

    std::vector<double> sdata = a.data();
    Mat s{sdata, n};
    Tensor u = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) u.at(i, i) = 1.0;

    // Cyclic Jacobi sweeps until the off-diagonal mass is negligible.
    const double fro = std::sqrt(
        std::inner_product(sdata.begin(), sdata.end(), sdata.begin(), 0.0));
    const double stop = std::max(fro, 1.0) * 1e-15;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
        if (std::sqrt(2.0 * off) <= stop) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = s(p, q);
                if (std::fabs(apq) <= 1e-300) continue;
                const double theta = (s(q, q) - s(p, p)) / (2.0 * apq);
                const double tt = fortran_sign(1.0, theta) /
                                  (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(tt * tt + 1.0);
                const double sn = tt * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double sip = s(i, p), siq = s(i, q);
                    s(i, p) = c * sip - sn * siq;
                    s(i, q) = sn * sip + c * siq;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    const double spj = s(p, j), sqj = s(q, j);
                    s(p, j) = c * spj - sn * sqj;
                    s(q, j) = sn * spj + c * sqj;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double uip = u.at(i, p), uiq = u.at(i, q);
                    u.at(i, p) = c * uip - sn * uiq;
                    u.at(i, q) = sn * uip + c * uiq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return s(i, i) > s(j, j); });

    SymmetricEigen result;
    result.eigenvalues.resize(n);
    result.eigenvectors = Tensor::zeros({n, n});
    for (std::size_t k = 0; k < n; ++k) {
        result.eigenvalues[k] = s(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) result.eigenvectors.at(i, k) = u.at(i, order[k]);
    }
    return result;
}

DominanceCertificate dominance_certificate(const Tensor& a) {
    require_square_finite(a, "dominance_certificate");
    const std::size_t n = a.shape()[0];
    DominanceCertificate cert;
    cert.margins.resize(n);
    cert.is_dominant = true;
    cert.is_negative_diag = true;
    for (std::size_t i = 0; i < n; ++i) {
        double off = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) off += std::fabs(a.at(i, j));
        cert.margins[i] = std::fabs(a.at(i, i)) - off;
        if (!(cert.margins[i] > 0.0)) cert.is_dominant = false;
        if (!(a.at(i, i) < 0.0)) cert.is_negative_diag = false;
    }
    return cert;
}

double spectral_abscissa(const Tensor& a) {
    EigenResult eig = eig_general(a);
    if (!eig.converged)
        throw std::runtime_error("spectral_abscissa: eigensolver did not converge");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& ev : eig.eigenvalues) best = std::max(best, ev.real());
    return best;
}

Tensor expm(const Tensor& a, double t) {
    require_square_finite(a, "expm");
    const std::size_t n = a.shape()[0];
    if (n > 8) throw std::invalid_argument("expm: supported only for n <= 8");
    if (!std::isfinite(t)) throw std::invalid_argument("expm: non-finite t");

    Tensor m = scale(a, t);
    double norm_inf = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += std::fabs(m.at(i, j));
        norm_inf = std::max(norm_inf, row);
    }
    int squarings = 0;
    if (norm_inf > 0.25)
        squarings = static_cast<int>(std::ceil(std::log2(norm_inf / 0.25)));
    m = scale(m, std::ldexp(1.0, -squarings));

    Tensor result = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) result.at(i, i) = 1.0;
    Tensor term = result;
    for (int k = 1; k <= 40; ++k) {
        term = scale(matmul(term, m), 1.0 / k);
        result = add(result, term);
        double tmax = 0.0;
        for (std::size_t i = 0; i < term.size(); ++i) tmax = std::max(tmax, std::fabs(term[i]));
        if (tmax < 1e-18) break;
    }
    for (int k = 0; k < squarings; ++k) result = matmul(result, result);
    return result;
}

}  // namespace sodef
