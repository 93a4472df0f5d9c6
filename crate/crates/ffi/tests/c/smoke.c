#include <stdio.h>
#include <string.h>

#include "spotslab.h"

int main(void) {
    SpotsEpisode *ep = NULL;
    if (spots_episode_edge_case(0, &ep) != SPOTS_STATUS_OK) {
        return 1;
    }
    size_t len = 0;
    spots_episode_len(ep, &len);

    static float a[64 * 64 * 3], b[64 * 64 * 3];
    size_t h = 0, w = 0;
    spots_episode_scene(ep, 0, a, sizeof a / sizeof a[0], &h, &w);
    spots_episode_scene(ep, len - 1, b, sizeof b / sizeof b[0], &h, &w);
    double mae = -1.0;
    spots_mae(a, b, h, w, &mae);

    SpotsEpisode *bad = NULL;
    SpotsStatus status = spots_episode_generate("nowhere", 0, &bad);
    char msg[256];
    spots_last_error_message(msg, sizeof msg);

    printf("version=%s frames=%zu size=%zux%zu mae=%.6f status=%d error=%s\n",
           spots_version(), len, h, w, mae, (int)status, msg);
    spots_episode_free(ep);
    return 0;
}
