#include <stdio.h>
#include <string.h>
#include "hamspray.h"

int main(void) {
    HsModel *m = NULL;
    if (hs_model_from_catalog("tangent1", &m) != HS_STATUS_OK) {
        fprintf(stderr, "load: %s\n", hs_last_error_message());
        return 1;
    }
    char *report = NULL;
    if (hs_validate(m, &report) != HS_STATUS_OK || strstr(report, "\"status\": \"pass\"") == NULL) {
        fprintf(stderr, "validate failed\n");
        return 1;
    }
    hs_string_free(report);

    double z[2] = {0.0, 2.0};
    double v[2];
    if (hs_eval_field(m, z, v, 2) != HS_STATUS_OK || v[0] != 2.0) {
        fprintf(stderr, "field: %s\n", hs_last_error_message());
        return 1;
    }
    if (hs_check(m, 99, &report) != HS_STATUS_INVALID_INPUT || strlen(hs_last_error_message()) == 0) {
        return 1;
    }
    hs_model_free(m);
    puts("ok");
    return 0;
}
