/* Minimal C client: checks the lifted norm and the QP projection, then runs a short scenario. */
#include <stdio.h>
#include <string.h>

#include "koopman_safe.h"

static int check(enum KsStatus s, const char *what) {
    if (s != KS_STATUS_OK) {
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, ks_last_error_message());
        return 1;
    }
    return 0;
}

int main(void) {
    const uint32_t harmonics[] = {1, 2};
    const size_t states[] = {0, 1, 2, 3};
    KsBasis *basis = NULL;
    if (check(ks_basis_new_sinusoid(4, harmonics, 2, states, 4, true, &basis), "basis")) return 1;
    size_t n_obs = 0, dim = 0;
    if (check(ks_basis_dims(basis, &n_obs, &dim), "dims")) return 1;
    double x[4] = {0.3, -1.7, 2.2, 0.9};
    double psi[17];
    if (check(ks_basis_lift(basis, x, 4, psi, 17, NULL, 0), "lift")) return 1;
    double norm2 = 0.0;
    for (size_t i = 0; i < 17; ++i) norm2 += psi[i] * psi[i];
    printf("n_obs %zu dim %zu psi_norm2 %.12f\n", n_obs, dim, norm2);
    ks_basis_free(basis);

    const double u0[2] = {0.0, 0.0};
    const double a[2] = {1.0, 1.0};
    const double b[1] = {1.0};
    double u[2];
    if (check(ks_qp_solve(u0, 2, a, b, 1, u, NULL, NULL), "qp")) return 1;
    printf("qp %.12f %.12f\n", u[0], u[1]);

    if (ks_qp_solve(u0, 2, a, b, 1, NULL, NULL, NULL) != KS_STATUS_NULL_POINTER) return 1;
    printf("error %s\n", ks_last_error_message());

    char *cfg = NULL;
    if (check(ks_scenario_default_config(&cfg), "config")) return 1;
    const char *key = "\"horizon\": 20.0";
    char *at = strstr(cfg, key);
    if (!at) return 1;
    memcpy(at, "\"horizon\":  0.5", strlen(key));
    char *summary = NULL;
    if (check(ks_run_scenario(cfg, "robust", 0, false, &summary), "scenario")) return 1;
    printf("summary %s\n", strstr(summary, "\"steps\":500") ? "steps=500" : summary);
    ks_string_free(summary);
    ks_string_free(cfg);
    printf("version %s\n", ks_version());
    return 0;
}
