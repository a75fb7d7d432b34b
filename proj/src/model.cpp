#include "sodef/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sodef/fcgen.hpp"
#include "sodef/linalg.hpp"

namespace sodef {

namespace {

Tensor gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    Tensor t = Tensor::zeros({rows, cols});
    for (std::size_t i = 0; i < rows * cols; ++i) t[i] = rng.normal(0.0, stddev);
    return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// FeatureExtractor
// ---------------------------------------------------------------------------

Tensor FeatureExtractor::forward(const Tensor& x) const {
    Tensor h = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        h = add(matmul(weights[l], h), biases[l]);
        if (l + 1 < weights.size()) h = tanh(h);
    }
    return h;
}

FeatureExtractor make_extractor(std::size_t d, const std::vector<std::size_t>& hidden,
                                std::size_t n, Rng& rng) {
    if (d == 0 || n == 0) throw std::invalid_argument("make_extractor: zero dimension");
    std::vector<std::size_t> widths;
    widths.push_back(d);
    for (std::size_t w : hidden) widths.push_back(w);
    widths.push_back(n);

    FeatureExtractor fe;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const double stddev = 1.0 / std::sqrt(static_cast<double>(widths[l]));
        fe.weights.push_back(gaussian_matrix(widths[l + 1], widths[l], stddev, rng));
        fe.biases.push_back(Tensor::zeros({widths[l + 1]}));
    }
    return fe;
}

// ---------------------------------------------------------------------------
// OdeField
// ---------------------------------------------------------------------------

FieldVariant field_variant_from_string(const std::string& name) {
    if (name == "mlp2") return FieldVariant::Mlp2;
    if (name == "neg_gram") return FieldVariant::NegGram;
    if (name == "affine") return FieldVariant::Affine;
    throw std::invalid_argument("unknown field variant: " + name);
}

std::string to_string(FieldVariant v) {
    switch (v) {
        case FieldVariant::Mlp2: return "mlp2";
        case FieldVariant::NegGram: return "neg_gram";
        case FieldVariant::Affine: return "affine";
    }
    throw std::logic_error("bad FieldVariant");
}

Tensor OdeField::eval(const Tensor& z) const {
    switch (variant) {
        case FieldVariant::Mlp2:
            return add(matmul(w2, tanh(add(matmul(w1, z), b1))), b2);
        case FieldVariant::NegGram:
            return neg(matmul(c, matmul(transpose(c), z)));
        case FieldVariant::Affine:
            return add(matmul(transpose(c), z), b);
    }
    throw std::logic_error("bad FieldVariant");
}

Tensor OdeField::jacobian(const Tensor& z) const {
    switch (variant) {
        case FieldVariant::Mlp2: {
            Tensor u = tanh(add(matmul(w1, z), b1));
            Tensor d = sub(Tensor::full(u.shape(), 1.0), mul(u, u));
            return matmul(w2, matmul(diag_embed(d), w1));
        }
        case FieldVariant::NegGram:
            return neg(matmul(c, transpose(c)));
        case FieldVariant::Affine:
            return transpose(c);
    }
    throw std::logic_error("bad FieldVariant");
}

std::vector<Tensor*> OdeField::params() {
    switch (variant) {
        case FieldVariant::Mlp2: return {&w1, &b1, &w2, &b2};
        case FieldVariant::NegGram: return {&c};
        case FieldVariant::Affine: return {&c, &b};
    }
    throw std::logic_error("bad FieldVariant");
}

std::vector<const Tensor*> OdeField::params() const {
    auto mut = const_cast<OdeField*>(this)->params();
    return {mut.begin(), mut.end()};
}

OdeField make_field(FieldVariant variant, std::size_t n, Rng& rng) {
    if (n == 0) throw std::invalid_argument("make_field: zero dimension");
    const double stddev = 0.5 / std::sqrt(static_cast<double>(n));
    OdeField f;
    f.variant = variant;
    f.n = n;
    switch (variant) {
        case FieldVariant::Mlp2: {
            // w1 is a scaled orthogonal matrix and w2 starts as -w1^T, so the
            // initial Jacobian -W1^T diag(d) W1 is negative definite with all
            // eigenvalues near -c^2 at every z. Gradient descent then deepens
            // a uniformly stable spectrum. A Gaussian init instead leaves the
            // slowest mode at -sigma_min(W1)^2, which is indistinguishable
            // from zero for a near-singular draw, and units whose w2/w1
            // alignment must change sign stall at the bilinear saddle.
            const double c = 0.4;
            Tensor q = random_orthogonal(n, rng.next_u64());
            f.w1 = Tensor::zeros({n, n});
            f.w2 = Tensor::zeros({n, n});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    f.w1.at(i, j) = c * q.at(i, j);
                    f.w2.at(i, j) = -c * q.at(j, i);
                }
            f.b1 = Tensor::zeros({n});
            f.b2 = Tensor::zeros({n});
            break;
        }
        case FieldVariant::NegGram:
            f.c = gaussian_matrix(n, n, stddev, rng);
            break;
        case FieldVariant::Affine:
            f.c = gaussian_matrix(n, n, stddev, rng);
            f.b = Tensor::zeros({n});
            break;
    }
    return f;
}

// ---------------------------------------------------------------------------
// SodefModel
// ---------------------------------------------------------------------------

HeadKind head_kind_from_string(const std::string& name) {
    if (name == "simplex") return HeadKind::Simplex;
    if (name == "trainable") return HeadKind::Trainable;
    if (name == "orthogonal") return HeadKind::Orthogonal;
    throw std::invalid_argument("unknown head kind: " + name);
}

std::string to_string(HeadKind k) {
    switch (k) {
        case HeadKind::Simplex: return "simplex";
        case HeadKind::Trainable: return "trainable";
        case HeadKind::Orthogonal: return "orthogonal";
    }
    throw std::logic_error("bad HeadKind");
}

SodefModel make_model(std::size_t d, const std::vector<std::size_t>& hidden, std::size_t n,
                      std::size_t num_classes, FieldVariant variant, HeadKind head,
                      const SolverConfig& solver, std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("make_model: need at least two classes");
    if (n < num_classes)
        throw std::invalid_argument("make_model: feature dim must be >= number of classes");
    solver.validate();

    Rng root(seed);
    Rng ext_rng = root.substream("init/extractor");
    Rng field_rng = root.substream("init/field");
    Rng head_rng = root.substream("init/head");
    const std::uint64_t head_seed = head_rng.next_u64();

    SodefModel m;
    m.extractor = make_extractor(d, hidden, n, ext_rng);
    m.field = make_field(variant, n, field_rng);
    m.head = head;
    m.solver = solver;
    switch (head) {
        case HeadKind::Simplex:
            m.v = build_simplex_fc(num_classes, n, head_seed).v;
            break;
        case HeadKind::Trainable:
            m.v = gaussian_matrix(n, num_classes, 1.0 / std::sqrt(static_cast<double>(n)),
                                  head_rng);
            break;
        case HeadKind::Orthogonal: {
            Tensor q = random_orthogonal(n, head_seed);
            m.v = Tensor::zeros({n, num_classes});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < num_classes; ++j) m.v.at(i, j) = q.at(i, j);
            break;
        }
    }
    return m;
}

Forward forward(const SodefModel& model, const Tensor& x) {
    Forward out;
    out.z0 = model.extractor.forward(x);
    Field f = [&model](const Tensor& z) { return model.field.eval(z); };
    out.zT = integrate(f, out.z0, model.solver).final_state();
    out.logits = matmul(transpose(model.v), out.zT);
    return out;
}

std::size_t predict_class(const Tensor& logits) {
    const auto& d = logits.data();
    return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

// ---------------------------------------------------------------------------
// Regularizers and the empirical Lagrangian
// ---------------------------------------------------------------------------

Regularizers sodef_regularizers(const OdeField& field, const Tensor& z0, double exp_clamp) {
    Regularizers r;
    r.r1 = norm2(field.eval(z0));
    Tensor j = field.jacobian(z0);
    Tensor diag_abs_sum = sum(abs(diag_part(j)));
    r.r2 = exp(clamp_max(sum(diag_part(j)), exp_clamp));
    r.r3 = exp(clamp_max(sub(sum(abs(j)), scale(diag_abs_sum, 2.0)), exp_clamp));
    return r;
}

Tensor lagrangian_loss(const SodefModel& model, const std::vector<Tensor>& xs,
                       const std::vector<std::size_t>& ys, double alpha1, double alpha2,
                       double alpha3, double exp_clamp) {
    if (xs.empty() || xs.size() != ys.size())
        throw std::invalid_argument("lagrangian_loss: batch empty or mislabeled");
    const bool with_reg = alpha1 != 0.0 || alpha2 != 0.0 || alpha3 != 0.0;

    Tensor total = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        Forward fw = forward(model, xs[i]);
        Tensor term = softmax_cross_entropy(fw.logits, ys[i]);
        if (with_reg) {
            Regularizers r = sodef_regularizers(model.field, fw.z0, exp_clamp);
            if (alpha1 != 0.0) term = add(term, scale(r.r1, alpha1));
            if (alpha2 != 0.0) term = add(term, scale(r.r2, alpha2));
            if (alpha3 != 0.0) term = add(term, scale(r.r3, alpha3));
        }
        total = add(total, term);
    }
    return scale(total, 1.0 / static_cast<double>(xs.size()));
}

// ---------------------------------------------------------------------------
// Stability classification
// ---------------------------------------------------------------------------

std::string to_string(Stability s) {
    switch (s) {
        case Stability::AsymptoticallyStable: return "asymptotically_stable";
        case Stability::MarginallyStableCandidate: return "marginally_stable_candidate";
        case Stability::Unstable: return "unstable";
        case Stability::NonHyperbolic: return "non_hyperbolic";
    }
    throw std::logic_error("bad Stability");
}

Stability classify_stability(const Tensor& a) {
    constexpr double tol = 1e-9;
    EigenResult eig = eig_general(a);
    if (!eig.converged)
        throw std::runtime_error("classify_stability: eigensolver did not converge");

    double abscissa = eig.eigenvalues.front().real();  // sorted by real part
    if (abscissa < -tol) return Stability::AsymptoticallyStable;
    if (abscissa > tol) return Stability::Unstable;

    for (std::size_t i = 0; i < eig.eigenvalues.size(); ++i) {
        const auto& ei = eig.eigenvalues[i];
        if (std::fabs(ei.real()) > tol) continue;
        for (std::size_t j = 0; j < eig.eigenvalues.size(); ++j) {
            if (j == i) continue;
            if (std::abs(eig.eigenvalues[j] - ei) <= tol) return Stability::NonHyperbolic;
        }
    }
    return Stability::MarginallyStableCandidate;
}

// ---------------------------------------------------------------------------
// Reference stable field
// ---------------------------------------------------------------------------

ReferenceField reference_stable_field(std::vector<Tensor> centers, double beta) {
    if (centers.empty()) throw std::invalid_argument("reference_stable_field: no centers");
    if (!(beta > 0.0)) throw std::invalid_argument("reference_stable_field: beta must be > 0");
    for (std::size_t i = 0; i < centers.size(); ++i) {
        if (centers[i].ndim() != 1 || centers[i].shape() != centers[0].shape())
            throw std::invalid_argument("reference_stable_field: centers must share a shape");
        for (std::size_t j = i + 1; j < centers.size(); ++j)
            if (centers[i].data() == centers[j].data())
                throw std::invalid_argument("reference_stable_field: duplicate center");
    }
    ReferenceField rf;
    rf.centers = std::move(centers);
    rf.beta = beta;
    return rf;
}

std::size_t ReferenceField::nearest(const Tensor& z) const {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < centers.size(); ++l) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double diff = z[i] - centers[l][i];
            d2 += diff * diff;
        }
        if (d2 < best_d2) {
            best_d2 = d2;
            best = l;
        }
    }
    return best;
}

Tensor ReferenceField::eval(const Tensor& z) const {
    const Tensor& c = centers[nearest(z)];
    return scale(sub(z, c), -beta);
}

Tensor ReferenceField::jacobian(const Tensor& z) const {
    const std::size_t n = z.size();
    Tensor j = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) j.at(i, i) = -beta;
    return j;
}

Field ReferenceField::field() const {
    return [*this](const Tensor& z) { return eval(z); };
}

// ---------------------------------------------------------------------------
// Perturbation damping
// ---------------------------------------------------------------------------

std::vector<double> perturbation_damping(const SodefModel& model, const Tensor& x,
                                         const Tensor& delta, const std::vector<double>& times) {
    const std::size_t d = model.in_dim();
    const std::size_t n = model.feature_dim();
    Tensor z0 = model.extractor.forward(x).detach();
    Tensor z0_pert;
    if (delta.size() == n) {
        z0_pert = add(z0, delta);
    } else if (delta.size() == d) {
        z0_pert = model.extractor.forward(add(x, delta)).detach();
    } else {
        throw std::invalid_argument("perturbation_damping: delta matches neither d nor n");
    }

    Field f = [&model](const Tensor& z) { return model.field.eval(z); };
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) {
        SolverConfig cfg = model.solver;
        cfg.t_end = t;
        if (is_fixed_step(cfg.kind)) cfg.step = std::min(cfg.step, t > 0.0 ? t : cfg.step);
        Tensor zt = integrate(f, z0, cfg).final_state();
        Tensor zt_pert = integrate(f, z0_pert, cfg).final_state();
        out.push_back(norm2(sub(zt_pert, zt)).value());
    }
    return out;
}

}  // namespace sodef
