#include <math.h>
#include <stdio.h>
#include "sqzmem.h"

#define CHECK(call)                                                          \
  do {                                                                       \
    SqzStatus st = (call);                                                   \
    if (st != SQZ_STATUS_OK) {                                               \
      fprintf(stderr, "%s failed: %d %s\n", #call, st, sqz_last_error());    \
      return 1;                                                              \
    }                                                                        \
  } while (0)

int main(void) {
  SqzGaussianState *in = NULL, *out = NULL;
  SqzChannel *ch = NULL;
  SqzDensityMatrix *rho_g = NULL;
  double v_min, v_max, angle, f;

  CHECK(sqz_state_squeezed(1.6, 1.6, 0.0, &in));
  CHECK(sqz_channel_new(0.642, 0.025, &ch));
  CHECK(sqz_channel_apply(ch, in, &out));
  CHECK(sqz_state_variances(out, &v_min, &v_max, &angle));
  double v_in = pow(10.0, -0.16);
  if (fabs(v_min - (0.642 * v_in + 0.358 + 0.025)) > 1e-12) {
    fprintf(stderr, "v_min %.15f\n", v_min);
    return 1;
  }
  CHECK(sqz_gaussian_to_fock(in, ch, 30, &rho_g));
  CHECK(sqz_gaussian_fidelity(out, out, &f));
  if (fabs(f - 1.0) > 1e-12) return 1;

  if (sqz_channel_new(2.0, 0.0, &ch) != SQZ_STATUS_ERR_OTHER) return 1;
  if (sqz_last_error() == NULL) return 1;

  sqz_density_free(rho_g);
  sqz_state_free(out);
  sqz_state_free(in);
  sqz_channel_free(ch);
  printf("ok %s\n", sqz_version());
  return 0;
}
