#include <stdio.h>
#include <stdlib.h>

#include "enns.h"

#define N 120
#define P 6

static double uniform(unsigned long long *state) {
    *state = *state * 6364136223846793005ULL + 1442695040888963407ULL;
    return (double)(*state >> 11) / 9007199254740992.0 * 2.0 - 1.0;
}

int main(void) {
    double x[N * P], y[N];
    unsigned long long state = 7;
    for (int i = 0; i < N; i++) {
        for (int j = 0; j < P; j++) x[i * P + j] = uniform(&state);
        y[i] = 6.0 * x[i * P] - 5.0 * x[i * P + 1] + 0.1 * uniform(&state);
    }

    EnnsDataset *ds = NULL;
    if (enns_dataset_new(x, y, N, P, ENNS_TASK_REGRESSION, &ds) != ENNS_STATUS_OK) {
        fprintf(stderr, "dataset: %s\n", enns_last_error_message());
        return 1;
    }

    EnnsSelectOptions opts = enns_select_options_default();
    opts.target = 2;
    size_t selected[2], len = 0;
    if (enns_select(ds, &opts, selected, 2, &len) != ENNS_STATUS_OK) {
        fprintf(stderr, "select: %s\n", enns_last_error_message());
        enns_dataset_free(ds);
        return 1;
    }

    EnnsFitOptions fit = enns_fit_options_default();
    fit.epochs = 50;
    EnnsModel *model = NULL;
    double pred[N];
    if (enns_fit(ds, selected, len, &fit, &model) != ENNS_STATUS_OK ||
        enns_model_predict(model, x, N, P, pred) != ENNS_STATUS_OK) {
        fprintf(stderr, "fit: %s\n", enns_last_error_message());
        enns_dataset_free(ds);
        return 1;
    }

    double p = 0.0;
    enns_prob_select_over(0.0, 3.0, 1.0, &p);
    printf("selected %zu %zu\n", selected[0] + 1, selected[1] + 1);
    printf("P(c_j < c_k) = %.4f\n", p);

    enns_model_free(model);
    enns_dataset_free(ds);
    return 0;
}
