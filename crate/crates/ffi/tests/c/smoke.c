#include <stdio.h>
#include "nstree.h"

int main(void) {
    NstreeField *u = NULL, *v = NULL;
    double norm = 0.0;
    uint64_t c = 0;
    if (nstree_field_taylor_green(16, true, 0.1, &u) != NSTREE_STATUS_OK) return 1;
    if (nstree_field_norm(u, 0.0, &norm) != NSTREE_STATUS_OK) return 2;
    if (nstree_solve_etd(u, 0.01, 5e-4, &v) != NSTREE_STATUS_OK) return 3;
    if (nstree_catalan(6, &c) != NSTREE_STATUS_OK || c != 132) return 4;
    if (nstree_field_taylor_green(7, true, 0.1, &u) != NSTREE_STATUS_INVALID_ARGUMENT) return 5;
    printf("%s %.6f %s\n", nstree_version(), norm, nstree_last_error());
    nstree_field_free(u);
    nstree_field_free(v);
    return 0;
}
