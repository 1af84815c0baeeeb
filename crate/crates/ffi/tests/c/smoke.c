#include <stdio.h>
#include <string.h>

#include "mccsod.h"

int main(void) {
    float pred[4] = {0.9f, 0.8f, 0.1f, 0.2f};
    float mask[4] = {1.0f, 1.0f, 0.0f, 0.0f};
    MccsodMetrics m;
    if (mccsod_evaluate_pair(pred, mask, 2, 2, &m) != MCCSOD_STATUS_OK || m.n_images != 1) {
        return 1;
    }
    MccsodModel *model = NULL;
    if (mccsod_model_load("/nonexistent/model.safetensors", &model) != MCCSOD_STATUS_STATE || model) {
        return 2;
    }
    if (strstr(mccsod_last_error(), "model.safetensors") == NULL) {
        return 3;
    }
    printf("%s %.6f %.6f\n", mccsod_version(), m.f_max, m.mae);
    return 0;
}
