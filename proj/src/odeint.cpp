#include "sodef/odeint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sodef {

SolverKind solver_kind_from_string(const std::string& name) {
    if (name == "euler") return SolverKind::Euler;
    if (name == "midpoint") return SolverKind::Midpoint;
    if (name == "heun2") return SolverKind::Heun2;
    if (name == "rk38") return SolverKind::Rk38;
    if (name == "dopri5") return SolverKind::Dopri5;
    throw std::invalid_argument("unknown solver kind: " + name);
}

std::string to_string(SolverKind kind) {
    switch (kind) {
        case SolverKind::Euler: return "euler";
        case SolverKind::Midpoint: return "midpoint";
        case SolverKind::Heun2: return "heun2";
        case SolverKind::Rk38: return "rk38";
        case SolverKind::Dopri5: return "dopri5";
    }
    throw std::logic_error("bad SolverKind");
}

bool is_fixed_step(SolverKind kind) { return kind != SolverKind::Dopri5; }

void SolverConfig::validate() const {
    if (!(t_end >= 0.0) || !std::isfinite(t_end))
        throw std::invalid_argument("SolverConfig: t_end must be finite and >= 0");
    if (is_fixed_step(kind)) {
        if (!(step > 0.0) || !std::isfinite(step))
            throw std::invalid_argument("SolverConfig: step must be finite and > 0");
        if (t_end > 0.0 && step > t_end)
            throw std::invalid_argument("SolverConfig: step must not exceed t_end");
    } else {
        if (!(rtol > 0.0) || !(atol > 0.0))
            throw std::invalid_argument("SolverConfig: rtol and atol must be > 0");
    }
}

namespace {

Tensor eval_field(const Field& field, const Tensor& z) {
    Tensor f = field(z);
    if (f.size() != z.size())
        throw std::invalid_argument("field output size does not match the state");
    return f;
}

void check_finite(const Tensor& z) {
    if (!z.all_finite()) throw std::runtime_error("NaN/Inf encountered mid-integration");
}

}  // namespace

Tensor step(SolverKind kind, const Field& field, const Tensor& z, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("step: h must be > 0");
    switch (kind) {
        case SolverKind::Euler: {
            Tensor k1 = eval_field(field, z);
            return add(z, scale(k1, h));
        }
        case SolverKind::Midpoint: {
            Tensor k1 = eval_field(field, z);
            Tensor k2 = eval_field(field, add(z, scale(k1, 0.5 * h)));
            return add(z, scale(k2, h));
        }
        case SolverKind::Heun2: {
            Tensor k1 = eval_field(field, z);
            Tensor k2 = eval_field(field, add(z, scale(k1, h)));
            return add(z, scale(add(k1, k2), 0.5 * h));
        }
        case SolverKind::Rk38: {
            Tensor k1 = eval_field(field, z);
            Tensor k2 = eval_field(field, add(z, scale(k1, h / 3.0)));
            Tensor k3 = eval_field(field, add(z, scale(sub(k2, scale(k1, 1.0 / 3.0)), h)));
            Tensor k4 = eval_field(field, add(z, scale(add(sub(k1, k2), k3), h)));
            Tensor acc = add(add(k1, k4), scale(add(k2, k3), 3.0));
            return add(z, scale(acc, h / 8.0));
        }
        case SolverKind::Dopri5:
            throw std::invalid_argument("step: dopri5 has no single fixed step");
    }
    throw std::logic_error("bad SolverKind");
}

Trajectory integrate(const Field& field, const Tensor& z0, const SolverConfig& cfg) {
    cfg.validate();
    if (cfg.t_end == 0.0) {
        Trajectory traj;
        traj.times = {0.0};
        traj.states = {z0};
        return traj;
    }
    if (cfg.kind == SolverKind::Dopri5)
        return dopri5_adaptive(field, z0, cfg.rtol, cfg.atol, cfg.t_end);

    const std::size_t n_steps =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.step - 1e-9)));

    Trajectory traj;
    traj.times.reserve(n_steps + 1);
    traj.states.reserve(n_steps + 1);
    traj.times.push_back(0.0);
    traj.states.push_back(z0);

    Tensor z = z0;
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double t_next =
            i + 1 == n_steps ? cfg.t_end : static_cast<double>(i + 1) * cfg.step;
        const double h = t_next - traj.times.back();
        z = step(cfg.kind, field, z, h);
        check_finite(z);
        traj.times.push_back(t_next);
        traj.states.push_back(z);
        ++traj.steps_taken;
    }
    return traj;
}

Trajectory dopri5_adaptive(const Field& field, const Tensor& z0, double rtol, double atol,
                           double t_end) {
    if (!(rtol > 0.0) || !(atol > 0.0))
        throw std::invalid_argument("dopri5: rtol and atol must be > 0");
    if (!(t_end >= 0.0) || !std::isfinite(t_end))
        throw std::invalid_argument("dopri5: t_end must be finite and >= 0");

    Trajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(z0.detach());
    if (t_end == 0.0) return traj;

    // Dormand-Prince 5(4) tableau; row 7 doubles as the 5th-order weights
    // (FSAL), b4 is the embedded 4th-order row.
    static constexpr double a[7][6] = {
        {0, 0, 0, 0, 0, 0},
        {1.0 / 5, 0, 0, 0, 0, 0},
        {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
        {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
        {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
        {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
        {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
    };
    static constexpr double b4[7] = {5179.0 / 57600, 0,           7571.0 / 16695, 393.0 / 640,
                                     -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

    const std::size_t n = z0.size();
    std::vector<std::vector<double>> k(7, std::vector<double>(n));
    std::vector<double> z = z0.data();
    std::vector<double> ztmp(n), znew(n);

    auto eval_into = [&](const std::vector<double>& state, std::vector<double>& out) {
        Tensor zt = Tensor::zeros({n});
        for (std::size_t i = 0; i < n; ++i) zt[i] = state[i];
        check_finite(zt);
        Tensor f = eval_field(field, zt);
        check_finite(f);
        out = f.data();
    };

    double t = 0.0;
    double h = 0.01 * t_end;
    eval_into(z, k[0]);
    bool fsal_valid = true;

    while (t < t_end) {
        const double remaining = t_end - t;
        if (remaining <= 1e-14 * std::max(1.0, std::fabs(t_end))) break;
        if (h < 1e-10) throw std::runtime_error("dopri5: step underflow");
        h = std::min(h, remaining);
        if (!fsal_valid) eval_into(z, k[0]);

        for (int s = 1; s < 7; ++s) {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = z[i];
                for (int j = 0; j < s; ++j) acc += h * a[s][j] * k[j][i];
                ztmp[i] = acc;
            }
            eval_into(ztmp, k[s]);
        }
        // stage 7 state is the 5th-order solution itself
        for (std::size_t i = 0; i < n; ++i) {
            double acc = z[i];
            for (int j = 0; j < 6; ++j) acc += h * a[6][j] * k[j][i];
            znew[i] = acc;
        }

        double err2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z4 = z[i];
            for (int j = 0; j < 7; ++j) z4 += h * b4[j] * k[j][i];
            const double sc = atol + rtol * std::max(std::fabs(z[i]), std::fabs(znew[i]));
            const double e = (znew[i] - z4) / sc;
            err2 += e * e;
        }
        const double err_norm = std::sqrt(err2 / static_cast<double>(n));
        if (!std::isfinite(err_norm)) throw std::runtime_error("NaN/Inf encountered mid-integration");

        double factor = err_norm == 0.0 ? 5.0 : 0.9 * std::pow(err_norm, -0.2);
        factor = std::clamp(factor, 0.2, 5.0);

        if (err_norm <= 1.0) {
            t += h;
            z = znew;
            k[0] = k[6];  // FSAL reuse
            fsal_valid = true;
            traj.times.push_back(t);
            traj.states.push_back(Tensor::from_data({n}, z));
            ++traj.steps_taken;
        } else {
            ++traj.rejected_steps;  // k[0] still matches z, no re-eval needed
        }
        h *= factor;
    }
    traj.times.back() = t_end;
    return traj;
}

}  // namespace sodef
