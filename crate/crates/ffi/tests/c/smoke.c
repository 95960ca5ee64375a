#include <stdio.h>
#include <string.h>
#include "ivauctions.h"

int main(int argc, char **argv) {
    IvaScenario *h = NULL;
    if (argc < 2 || iva_scenario_load(argv[1], &h) != IVA_STATUS_OK) {
        fprintf(stderr, "load: %s\n", iva_last_error());
        return 1;
    }
    double s[3] = {0.25, 0.5, 1.0};
    double v = 0.0;
    if (iva_eval(h, 0, 0, s, 3, &v) != IVA_STATUS_OK || v != 1.75) {
        fprintf(stderr, "eval: %s\n", iva_last_error());
        return 1;
    }
    char *report = NULL;
    int32_t pass = -1;
    if (iva_run(h, "check", NULL, &report, &pass) != IVA_STATUS_OK || pass != 1) {
        fprintf(stderr, "run: %s\n", iva_last_error());
        return 1;
    }
    int ok = strstr(report, "\"command\": \"check\"") != NULL;
    iva_string_free(report);
    iva_scenario_free(h);
    printf("%s %s\n", iva_version(), ok ? "ok" : "bad report");
    return ok ? 0 : 1;
}
