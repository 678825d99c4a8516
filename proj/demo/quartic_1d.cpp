// Quantum action of the 1-D quartic oscillator at T = 4.5 and the ground
// state reconstructed from it.
#include "qaction/fit.hpp"
#include "qaction/zero_temp.hpp"

#include <cstdio>

using namespace qaction;

int main()
{
    const ActionSpec1D classical{1.0, {0.0, 1.0, 0.01, 0.0}};

    const auto oracle = solve_oracle(classical, default_grid< 1 >());
    std::printf("E_gr = %.10f\n", oracle.ground_energy);

    FitProblem< Potential1D > problem;
    problem.table         = sample_amplitudes(oracle, default_boundary_set< 1 >(), {4.5});
    problem.initial_guess = classical;
    const auto fit        = fit_quantum_action(problem);

    const auto theta = fit.action.parameters();
    for (std::size_t k = 0; k < theta.size(); ++k)
        std::printf("%-3s = %12.8f +- %.1e\n", std::string(ActionSpec1D::parameter_name(k)).c_str(), theta[k],
                    fit.stderr_[k]);

    const auto psi = reconstruct_wavefunction_1d(fit.action, oracle.levels.front().grid());
    const auto ref = oracle.ground_states();
    for (double x = -3.0; x <= 3.0 + 1e-9; x += 0.5)
    {
        const int i = psi.grid.axis_index(x);
        std::printf("x = %5.2f  psi_qa = %.6f  psi_schroedinger = %.6f\n", x, psi.values[static_cast< std::size_t >(i)],
                    ref.value_at({x}));
    }
    std::printf("transformation law residual on [0.1, 3]: %.2e\n",
                max_transform_law_residual(classical, fit.action, oracle.ground_energy, 0.1, 3.0));
}
