#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sodef/tensor.hpp"

namespace sodef {

// Right-hand side of an autonomous IVP dz/dt = f(z). The closure decides
// whether the computation lands on a tape: taped input + taped ops => taped
// output, so fixed-step integration unrolls onto the tape for free.
using Field = std::function<Tensor(const Tensor&)>;

enum class SolverKind { Euler, Midpoint, Heun2, Rk38, Dopri5 };

SolverKind solver_kind_from_string(const std::string& name);
std::string to_string(SolverKind kind);
bool is_fixed_step(SolverKind kind);

struct SolverConfig {
    SolverKind kind = SolverKind::Rk38;
    double step = 0.05;    // fixed-step kinds
    double rtol = 1e-6;    // dopri5
    double atol = 1e-6;    // dopri5
    double t_end = 5.0;

    // Throws std::invalid_argument when a field is out of range for the kind.
    void validate() const;
};

struct Trajectory {
    std::vector<double> times;    // strictly increasing, first 0, last t_end
    std::vector<Tensor> states;   // states[i] at times[i]
    std::size_t steps_taken = 0;
    std::size_t rejected_steps = 0;  // dopri5 only

    const Tensor& final_state() const { return states.back(); }
};

// One explicit step of the named fixed-step method from state z with step h.
// rk38 uses the 3/8-rule tableau (nodes 0, 1/3, 2/3, 1; weights 1/8, 3/8,
// 3/8, 1/8). Dopri5 is not a valid kind here.
Tensor step(SolverKind kind, const Field& field, const Tensor& z, double h);

// Integrates z(0) = z0 to t_end. Fixed-step kinds take exactly
// ceil(t_end/step) steps, the last shortened to land on t_end; t_end = 0
// returns the initial state untouched. Throws on NaN/Inf mid-integration.
Trajectory integrate(const Field& field, const Tensor& z0, const SolverConfig& cfg);

// Dormand-Prince 5(4) embedded pair. Error norm is the RMS of
// err_i / (atol + rtol*max(|z_i|, |z_new_i|)); accept when <= 1; next step
// scaled by 0.9*norm^(-1/5) clamped to [0.2, 5]. Initial step 0.01*t_end.
// Throws when the step underflows 1e-10.
Trajectory dopri5_adaptive(const Field& field, const Tensor& z0, double rtol, double atol,
                           double t_end);

}  // namespace sodef
