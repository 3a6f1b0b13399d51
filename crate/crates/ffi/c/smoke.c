#include <math.h>
#include <stdio.h>
#include <string.h>

#include "panotrack.h"

#define CHECK(expr)                                                             \
    do {                                                                        \
        PtStatus s_ = (expr);                                                   \
        if (s_ != PT_STATUS_OK) {                                               \
            const char *m_ = pt_last_error_message();                           \
            fprintf(stderr, "%s:%d: status %d: %s\n", __FILE__, __LINE__, s_,  \
                    m_ ? m_ : "(none)");                                        \
            return 1;                                                           \
        }                                                                       \
    } while (0)

int main(void) {
    PtRig *rig = NULL;
    CHECK(pt_rig_quad(1280, 960, 1.7, &rig));

    double x, z;
    CHECK(pt_localize(rig, 0, 640.0, 217.6, &x, &z));
    if (fabs(x) > 1e-9 || fabs(z - 5.0) > 1e-9) {
        fprintf(stderr, "localize: %f %f\n", x, z);
        return 1;
    }

    if (pt_localize(rig, 9, 640.0, 100.0, &x, &z) != PT_STATUS_GEOMETRY || pt_last_error_message() == NULL) {
        fprintf(stderr, "unknown view not reported\n");
        return 1;
    }

    double costs[6] = {4, 1, 3, 2, 0.5, 5};
    int64_t row_to_col[2];
    CHECK(pt_solve_assignment(costs, 2, 3, row_to_col));
    if (row_to_col[0] != 1 || row_to_col[1] != 0) {
        fprintf(stderr, "assignment: %lld %lld\n", (long long)row_to_col[0], (long long)row_to_col[1]);
        return 1;
    }

    PtTrackerConfig cfg = pt_tracker_config_default();
    PtTracker *tracker = NULL;
    CHECK(pt_tracker_new(rig, &cfg, &tracker));
    const char *det =
        "{\"frame\":0,\"view\":0,\"keypoints\":["
        "{\"name\":\"nose\",\"u\":640.0,\"v\":300.0,\"conf\":0.9},"
        "{\"name\":\"left_ankle\",\"u\":640.0,\"v\":517.6,\"conf\":0.9}],"
        "\"embedding\":[1.0,0.0]}\n";
    char *out = NULL;
    size_t skipped = 0;
    CHECK(pt_tracker_push_json(tracker, 0, det, &out, &skipped));
    if (strstr(out, "\"id\":1") == NULL || skipped != 0) {
        fprintf(stderr, "tracklets: %s\n", out);
        return 1;
    }
    pt_string_free(out);

    pt_tracker_free(tracker);
    pt_rig_free(rig);
    printf("ok %s\n", pt_version());
    return 0;
}
