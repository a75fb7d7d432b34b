#include "sodef/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sodef/evaluate.hpp"
#include "sodef/rng.hpp"

namespace sodef {

namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double bound_at(const std::vector<double>& b, std::size_t i) {
    return b.size() == 1 ? b[0] : b[i];
}

}  // namespace

AttackKind attack_kind_from_string(const std::string& name) {
    if (name == "fgsm") return AttackKind::Fgsm;
    if (name == "pgd") return AttackKind::Pgd;
    throw std::invalid_argument("unknown attack kind: " + name);
}

std::string to_string(AttackKind k) {
    switch (k) {
        case AttackKind::Fgsm: return "fgsm";
        case AttackKind::Pgd: return "pgd";
    }
    throw std::logic_error("bad AttackKind");
}

void AttackConfig::validate(std::size_t d) const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw std::invalid_argument("AttackConfig: epsilon must be finite and >= 0");
    if (kind == AttackKind::Pgd) {
        if (!(step_alpha > 0.0)) throw std::invalid_argument("AttackConfig: step_alpha must be > 0");
        if (iters < 1) throw std::invalid_argument("AttackConfig: pgd needs iters >= 1");
    }
    if ((clip_lo.size() != 1 && clip_lo.size() != d) ||
        (clip_hi.size() != 1 && clip_hi.size() != d))
        throw std::invalid_argument("AttackConfig: clip bounds must be scalar or size d");
    for (std::size_t i = 0; i < d; ++i)
        if (bound_at(clip_lo, i) > bound_at(clip_hi, i))
            throw std::invalid_argument("AttackConfig: clip_lo exceeds clip_hi");
}

AttackConfig attack_config_for(const LabeledDataset& data) {
    AttackConfig cfg;
    cfg.clip_lo = data.lo;
    cfg.clip_hi = data.hi;
    return cfg;
}

Tensor input_gradient(const SodefModel& model, const Tensor& x, std::size_t y) {
    SolverConfig cfg = model.solver;
    if (!is_fixed_step(cfg.kind)) {
        cfg.kind = SolverKind::Rk38;
        cfg.step = 0.05;
    }
    if (cfg.t_end > 0.0) cfg.step = std::min(cfg.step, cfg.t_end);

    Tape tape;
    Tensor xt = tape.leaf(x);
    Tensor z0 = model.extractor.forward(xt);
    Field f = [&model](const Tensor& z) { return model.field.eval(z); };
    Tensor zT = integrate(f, z0, cfg).final_state();
    Tensor loss = softmax_cross_entropy(matmul(transpose(model.v), zT), y);
    tape.backward(loss);
    return tape.grad(xt);
}

Tensor fgsm(const SodefModel& model, const Tensor& x, std::size_t y, const AttackConfig& cfg) {
    cfg.validate(x.size());
    Tensor g = input_gradient(model, x, y);
    Tensor out = x.detach();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::min(bound_at(cfg.clip_hi, i),
                          std::max(bound_at(cfg.clip_lo, i), x[i] + cfg.epsilon * sign_of(g[i])));
    return out;
}

Tensor pgd(const SodefModel& model, const Tensor& x, std::size_t y, const AttackConfig& cfg) {
    cfg.validate(x.size());
    Tensor xp = x.detach();
    if (cfg.random_start) {
        Rng rng = Rng(cfg.seed).substream("pgd/start");
        for (std::size_t i = 0; i < xp.size(); ++i)
            xp[i] = std::min(bound_at(cfg.clip_hi, i),
                             std::max(bound_at(cfg.clip_lo, i),
                                      x[i] + rng.uniform(-cfg.epsilon, cfg.epsilon)));
    }
    for (std::size_t it = 0; it < cfg.iters; ++it) {
        Tensor g = input_gradient(model, xp, y);
        for (std::size_t i = 0; i < xp.size(); ++i) {
            const double v = xp[i] + cfg.step_alpha * sign_of(g[i]);
            const double lo = std::max(bound_at(cfg.clip_lo, i), x[i] - cfg.epsilon);
            xp[i] = std::min(bound_at(cfg.clip_hi, i), std::min(x[i] + cfg.epsilon, std::max(lo, v)));
        }
    }
    return xp;
}

Tensor craft_adversarial(const SodefModel& model, const Tensor& x, std::size_t y,
                         const AttackConfig& cfg) {
    return cfg.kind == AttackKind::Fgsm ? fgsm(model, x, y, cfg) : pgd(model, x, y, cfg);
}

LabeledDataset adversarial_dataset(const SodefModel& model, const LabeledDataset& data,
                                   const AttackConfig& cfg, par::Mode mode) {
    if (data.d != model.in_dim())
        throw std::invalid_argument("adversarial_dataset: input dimension mismatch");
    cfg.validate(data.d);

    LabeledDataset out = data;
    par::for_each_index(data.size(), mode, [&](std::size_t i) {
        AttackConfig sample_cfg = cfg;
        if (cfg.random_start)
            sample_cfg.seed = Rng(cfg.seed).substream("pgd/sample").substream(
                std::to_string(i)).next_u64();
        out.inputs[i] = craft_adversarial(model, data.inputs[i], data.labels[i], sample_cfg);
    });
    // Adversarial points may sit outside the clean data's min/max box; widen.
    for (const Tensor& x : out.inputs)
        for (std::size_t i = 0; i < out.d; ++i) {
            out.lo[i] = std::min(out.lo[i], x[i]);
            out.hi[i] = std::max(out.hi[i], x[i]);
        }
    return out;
}

double attack_accuracy(const SodefModel& model, const LabeledDataset& data,
                       const AttackConfig& cfg, par::Mode mode) {
    return evaluate_accuracy(model, adversarial_dataset(model, data, cfg, mode), mode);
}

double transfer_attack(const SodefModel& source, const SodefModel& target,
                       const LabeledDataset& data, const AttackConfig& cfg, par::Mode mode) {
    if (source.in_dim() != target.in_dim())
        throw std::invalid_argument("transfer_attack: models disagree on input dimension");
    return evaluate_accuracy(target, adversarial_dataset(source, data, cfg, mode), mode);
}

}  // namespace sodef
