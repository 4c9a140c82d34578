/* Minimal C consumer: synthesize the benchmark, train an IRM model, and
 * audit it on the reversed test environment.
 *
 * Build (from the workspace root, after `cargo build -p irmkit-ffi`):
 *   gcc crates/ffi/examples/demo.c -Icrates/ffi/include \
 *       -Ltarget/debug -lirmkit_ffi -lm -o demo
 *   LD_LIBRARY_PATH=target/debug ./demo
 */
#include <stdio.h>
#include <stdlib.h>

#include "irmkit.h"

static void check(IrmStatus status, const char *what) {
    if (status != IRM_STATUS_OK) {
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)status, irm_last_error());
        exit(1);
    }
}

int main(void) {
    printf("irmkit %s\n", irm_version());

    IrmEnvs *envs = NULL;
    check(irm_envs_synth("{\"n_per_env\": 2000, \"d_noise\": 8, \"q\": 0.25}", 7, &envs),
          "irm_envs_synth");
    printf("environments: %zu, feature dim: %lld\n",
           irm_envs_count(envs), (long long)irm_envs_dim(envs));

    IrmModel *model = NULL;
    const char *hp =
        "{\"learning_rate\": 0.001, \"iterations\": 2000, \"l2\": 0.0001,"
        " \"penalty_lambda\": 10000.0, \"anneal_iters\": 100, \"mode\": \"irm\"}";
    check(irm_train(envs, hp, 1, &model), "irm_train");

    char *report = NULL;
    check(irm_evaluate(model, envs, 2, &report), "irm_evaluate");
    printf("test-environment report: %s\n", report);
    irm_string_free(report);

    irm_model_free(model);
    irm_envs_free(envs);
    return 0;
}
