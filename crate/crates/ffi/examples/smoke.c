/* Build: cargo build -p eqpt-ffi --release
 *        cc -Icrates/ffi/include crates/ffi/examples/smoke.c target/release/libeqpt_ffi.a -lm -lpthread -ldl */
#include <stdio.h>
#include "eqpt.h"

int main(void) {
    EqptMethod method;
    EqptEstimate *estimate = NULL;
    EqptMatrix *u_hat = NULL;

    if (eqpt_method_from_name("eqpt2", &method) != EQPT_STATUS_OK) {
        fprintf(stderr, "%s\n", eqpt_last_error_message());
        return 1;
    }
    if (eqpt_run_trial(method, 4, 1e-3, 7, &estimate) != EQPT_STATUS_OK) {
        fprintf(stderr, "%s\n", eqpt_last_error_message());
        return 1;
    }
    printf("eqpt %s: nrmse %.3e\n", eqpt_version(), eqpt_estimate_nrmse(estimate));

    eqpt_estimate_matrix(estimate, &u_hat);
    double re, im;
    eqpt_matrix_get(u_hat, 0, 0, &re, &im);
    printf("U[0,0] = %.6f%+.6fi\n", re, im);

    eqpt_matrix_free(u_hat);
    eqpt_estimate_free(estimate);
    return 0;
}
