// Minimal library walkthrough: sample noisy observations from a known FD,
// bin them, and recover the shape exponents.

#include <cstdio>

#include "sigfd/calibration.hpp"
#include "sigfd/oracle_sim.hpp"

int main() {
    using namespace sigfd;

    const FdParams truth{50.0, 600.0, 2.0, 1.5};
    const auto obs = sample_from_fd(truth, 200, 0.02 * truth.v_max, /*seed=*/7);
    const auto bins = bin_flows(obs);

    const SegmentFit fit = fit_segment(bins, truth.v_max, truth.q_cap, GreenSplit(0.5));
    std::printf("true  alpha=%.4f beta=%.4f\n", truth.alpha, truth.beta);
    std::printf("fit   alpha=%.4f beta=%.4f  (rmse=%.4f km/h, r2=%.4f, %d iterations)\n",
                fit.params.alpha, fit.params.beta, fit.rmse, fit.r2, fit.iterations);
    return fit.converged ? 0 : 1;
}
