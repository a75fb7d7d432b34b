#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "sodef/odeint.hpp"
#include "sodef/rng.hpp"
#include "sodef/tensor.hpp"

namespace sodef {

// tanh MLP mapping input d -> hidden widths -> feature n. Hidden layers are
// tanh-activated; the output layer is linear, so feature norms (and with them
// the achievable logit margins) are unconstrained.
struct FeatureExtractor {
    std::vector<Tensor> weights;  // layer l: {out, in}
    std::vector<Tensor> biases;   // layer l: {out}

    std::size_t in_dim() const { return weights.front().shape()[1]; }
    std::size_t out_dim() const { return weights.back().shape()[0]; }
    Tensor forward(const Tensor& x) const;
};

FeatureExtractor make_extractor(std::size_t d, const std::vector<std::size_t>& hidden,
                                std::size_t n, Rng& rng);

enum class FieldVariant { Mlp2, NegGram, Affine };

FieldVariant field_variant_from_string(const std::string& name);
std::string to_string(FieldVariant v);

// The learned dynamics f_theta. mlp2: W2 tanh(W1 z + b1) + b2; neg_gram:
// -C C^T z (negative semidefinite by construction); affine: C^T z + b.
struct OdeField {
    FieldVariant variant = FieldVariant::Mlp2;
    std::size_t n = 0;
    Tensor w1, b1, w2, b2;  // mlp2
    Tensor c, b;            // neg_gram / affine

    Tensor eval(const Tensor& z) const;
    // Analytic Jacobian at z as a taped expression of the parameters, so the
    // spectral penalties backpropagate to theta without second-order
    // differentiation. mlp2: W2 diag(1 - tanh^2(W1 z + b1)) W1.
    Tensor jacobian(const Tensor& z) const;

    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
};

OdeField make_field(FieldVariant variant, std::size_t n, Rng& rng);

enum class HeadKind { Simplex, Trainable, Orthogonal };

HeadKind head_kind_from_string(const std::string& name);
std::string to_string(HeadKind k);

// Pipeline x -> z(0) = h(x) -> z(T) by integrating f -> logits = V^T z(T).
struct SodefModel {
    FeatureExtractor extractor;
    OdeField field;
    HeadKind head = HeadKind::Simplex;
    Tensor v;  // n x L, columns are class directions
    SolverConfig solver;

    std::size_t in_dim() const { return extractor.in_dim(); }
    std::size_t feature_dim() const { return field.n; }
    std::size_t num_classes() const { return v.shape()[1]; }
    bool head_trainable() const { return head == HeadKind::Trainable; }
};

// head_seed feeds the simplex/orthogonal construction; Rng drives the
// parameter init. n >= L is required by the simplex construction.
SodefModel make_model(std::size_t d, const std::vector<std::size_t>& hidden, std::size_t n,
                      std::size_t num_classes, FieldVariant variant, HeadKind head,
                      const SolverConfig& solver, std::uint64_t seed);

struct Forward {
    Tensor logits;  // {L}
    Tensor z0;      // {n}
    Tensor zT;      // {n}
};

// Taped end-to-end when x (or the model copy's parameters) are tape leaves
// and the solver is fixed-step; dopri5 detaches and is evaluation-only.
Forward forward(const SodefModel& model, const Tensor& x);

// argmax over logits; ties resolve to the lowest class index.
std::size_t predict_class(const Tensor& logits);

struct Regularizers {
    Tensor r1;  // ||f(z0)||_2
    Tensor r2;  // exp(sum_i J_ii), argument clamped at exp_clamp
    Tensor r3;  // exp(sum_i(-|J_ii| + sum_{j!=i} |J_ij|)), clamped likewise
};

Regularizers sodef_regularizers(const OdeField& field, const Tensor& z0,
                                double exp_clamp = 30.0);

// Mean over the batch of CE(V^T z(T), y) + a1 r1 + a2 r2 + a3 r3, fully
// taped. Regularizer evaluation is skipped when all three weights are zero.
Tensor lagrangian_loss(const SodefModel& model, const std::vector<Tensor>& xs,
                       const std::vector<std::size_t>& ys, double alpha1, double alpha2,
                       double alpha3, double exp_clamp = 30.0);

enum class Stability {
    AsymptoticallyStable,
    MarginallyStableCandidate,
    Unstable,
    NonHyperbolic,
};

std::string to_string(Stability s);

// Eigenvalue test with tol 1e-9: abscissa < -tol stable, > tol unstable;
// otherwise candidate-marginal when every near-zero-real eigenvalue is
// isolated, non-hyperbolic when any such eigenvalue is (numerically)
// repeated. Simplicity of minimal-polynomial roots is not verifiable here.
Stability classify_stability(const Tensor& a);

// Piecewise field f(z) = -beta (z - c_l(z)) with c_l the nearest center:
// every center is an equilibrium, the Jacobian is -beta I away from the
// assignment boundaries, and the dominance certificate holds with margin
// beta per coordinate.
struct ReferenceField {
    std::vector<Tensor> centers;  // each {n}
    double beta = 0.0;

    std::size_t nearest(const Tensor& z) const;
    Tensor eval(const Tensor& z) const;
    Tensor jacobian(const Tensor& z) const;
    Field field() const;
};

ReferenceField reference_stable_field(std::vector<Tensor> centers, double beta);

// ||z~(t) - z(t)||_2 for each t in times, where z~ starts from the perturbed
// input. delta of size d perturbs the input x; delta of size n perturbs the
// feature z(0) directly; when d == n the feature reading wins.
std::vector<double> perturbation_damping(const SodefModel& model, const Tensor& x,
                                         const Tensor& delta, const std::vector<double>& times);

}  // namespace sodef
