#include <math.h>
#include <stdio.h>
#include <string.h>

#include "qml.h"

#define CHECK(cond)                                            \
    do {                                                       \
        if (!(cond)) {                                         \
            fprintf(stderr, "line %d: %s\n", __LINE__, #cond); \
            return 1;                                          \
        }                                                      \
    } while (0)

int main(void) {
    QmlSymbol *p = NULL, *r = NULL;
    CHECK(qml_symbol_builtin("model-fold", 2, &p) == QML_OK);
    CHECK(qml_symbol_parse("x2", 2, &r) == QML_OK);
    CHECK(qml_symbol_dim(p) == 2);

    double x[2] = {0.0, 0.0}, xi[2] = {0.0, 0.0}, rdot = 1.0, rddot = 0.0;
    CHECK(qml_rddot(p, r, x, xi, 2, &rdot, &rddot) == QML_OK);
    CHECK(fabs(rdot) < 1e-12 && fabs(rddot + 2.0) < 1e-12);

    QmlSymbol *bad = NULL;
    CHECK(qml_symbol_parse("x1 +", 2, &bad) == QML_SYNTAX);
    CHECK(bad == NULL && strlen(qml_last_error()) > 0);

    QmlTrajectory *t = NULL;
    CHECK(qml_flow(p, x, xi, 2, 0.0, 1.0, 11, 1e-10, &t) == QML_OK);
    CHECK(qml_trajectory_len(t) == 11);
    double s, drift, xs[2], xis[2];
    CHECK(qml_trajectory_sample(t, 10, &s, xs, xis, &drift) == QML_OK);
    CHECK(fabs(xs[1] + 1.0) < 1e-8 && fabs(xis[1] - 1.0) < 1e-8);
    qml_trajectory_free(t);

    char *json = NULL;
    CHECK(qml_fold_report_json(p, r, x, xi, 2, &json) == QML_OK);
    CHECK(strstr(json, "\"pi_r\"") != NULL);
    qml_string_free(json);

    qml_symbol_free(p);
    qml_symbol_free(r);
    printf("ok\n");
    return 0;
}
