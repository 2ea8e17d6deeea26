/* Simulates, replays and fits through the C interface.
 * Build: cc smoke.c -I../include -L<target dir> -lcsa_ffi -o smoke */
#include <stdio.h>
#include "csa.h"

int main(void) {
    const double beta[2] = {3.0, 8.0};
    CsaSequence *seq = NULL;
    CsaTrajectory *traj = NULL;
    CsaFit *fit = NULL;
    double est[2], lo[2], hi[2];

    if (csa_simulate(0.05, beta, 2, 2, 1.0, 300, 4, &seq) != CSA_STATUS_OK) {
        fprintf(stderr, "simulate: %s\n", csa_last_error());
        return 1;
    }
    if (csa_replay(seq, 2, 0.0, &traj) != CSA_STATUS_OK) {
        fprintf(stderr, "replay: %s\n", csa_last_error());
        return 1;
    }
    if (csa_fit(traj, &fit) != CSA_STATUS_OK
        || csa_fit_beta(fit, est, 2) != CSA_STATUS_OK
        || csa_fit_intervals(fit, 0.95, lo, hi, 2) != CSA_STATUS_OK) {
        fprintf(stderr, "fit: %s\n", csa_last_error());
        return 1;
    }
    for (int j = 0; j < 2; j++)
        printf("beta_%d = %.6f [%.6f, %.6f]\n", j + 1, est[j], lo[j], hi[j]);

    if (csa_sequence_read("/nonexistent/file.csv", &seq) != CSA_STATUS_IO)
        return 1;

    csa_fit_free(fit);
    csa_trajectory_free(traj);
    csa_sequence_free(seq);
    return 0;
}
