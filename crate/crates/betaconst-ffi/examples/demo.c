/* Simulate three months of data and test it for a constant beta.
 *
 * Build (from the workspace root, after `cargo build --release`):
 *   cc crates/betaconst-ffi/examples/demo.c \
 *      -Icrates/betaconst-ffi/include \
 *      -Ltarget/release -lbetaconst_ffi -lm -o demo
 *   LD_LIBRARY_PATH=target/release ./demo
 */
#include <stdio.h>
#include <stdlib.h>

#include "betaconst.h"

int main(void) {
    printf("betaconst %s\n", bc_version());

    BcPath *path = NULL;
    BcStatus status = bc_simulate_json("{\"days\": 66, \"seed\": 7}", &path);
    if (status != BC_STATUS_OK) {
        fprintf(stderr, "simulate: %s\n", bc_last_error_message());
        return 1;
    }

    BcTestSummary summary;
    status = bc_run_test(bc_path_x(path), bc_path_y(path), bc_path_points(path),
                         bc_path_n_per_day(path), NULL, &summary);
    if (status != BC_STATUS_OK) {
        fprintf(stderr, "test: %s\n", bc_last_error_message());
        bc_path_free(path);
        return 1;
    }

    printf("statistic %.4f  p-value %.4f  beta %.4f [%.4f, %.4f]  valid %s\n",
           summary.statistic, summary.p_value, summary.pooled_beta,
           summary.pooled_ci_low, summary.pooled_ci_high,
           summary.valid ? "yes" : "no");

    bc_path_free(path);
    return 0;
}
