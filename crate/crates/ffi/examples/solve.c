/* Minimal C client: one element, one user, unit gains, QPSK, target 1e-3. */
#include <math.h>
#include <stdio.h>

#include "ris_power.h"

int main(void) {
    const double one[1] = {1.0}, zero[1] = {0.0};
    const size_t symbols[1] = {0};
    const double targets[1] = {1e-3};
    RpInstance *inst = NULL;
    RpResult *res = NULL;
    char msg[256];

    if (rp_instance_new(1, 1, 4, one, zero, one, zero, symbols, targets, 1.0, &inst) != RP_STATUS_OK) {
        rp_last_error_message(msg, sizeof msg);
        fprintf(stderr, "instance: %s\n", msg);
        return 1;
    }
    RpSolveOptions opts = rp_solve_options_default();
    if (rp_solve(inst, &opts, &res) != RP_STATUS_OK) {
        rp_last_error_message(msg, sizeof msg);
        fprintf(stderr, "solve: %s\n", msg);
        rp_instance_free(inst);
        return 1;
    }
    double re[1], im[1], sep[1];
    rp_result_phases(res, re, im, 1);
    rp_simulate(inst, res, 100000, 7, sep, 1);
    printf("version %s\n", rp_version());
    printf("P_opt %.9f\n", rp_result_power(res));
    printf("feasible %d\n", rp_result_feasible(res));
    printf("phase_norm %.12f\n", hypot(re[0], im[0]));
    printf("sep %.6f\n", sep[0]);

    /* A wrong buffer length is reported, not written past. */
    int status = rp_result_phases(res, re, im, 2);
    rp_last_error_message(msg, sizeof msg);
    printf("bad_len %d %s\n", status, msg);

    rp_result_free(res);
    rp_instance_free(inst);
    return 0;
}
