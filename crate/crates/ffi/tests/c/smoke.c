#include <stdio.h>
#include <string.h>
#include "subband_dpd.h"

#define CHECK(cond)                                                        \
  do {                                                                     \
    if (!(cond)) {                                                         \
      fprintf(stderr, "failed: %s (%s)\n", #cond, sbdpd_last_error());     \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  SbdpdPa *pa = NULL;
  CHECK(sbdpd_pa_builtin("memoryless3", &pa) == SBDPD_STATUS_OK);
  CHECK(sbdpd_pa_order(pa) == 3);
  SbdpdComplex x[4] = {{1, 0}, {0, 1}, {0.5, 0.5}, {0, 0}};
  SbdpdComplex y[4];
  CHECK(sbdpd_pa_apply(pa, x, 4, y) == SBDPD_STATUS_OK);
  CHECK(y[3].re == 0.0 && y[3].im == 0.0);
  sbdpd_pa_free(pa);

  SbdpdComplexity c;
  CHECK(sbdpd_flops(3, 9, 1, 9e6, &c) == SBDPD_STATUS_OK);
  CHECK(c.total_flops == 99);
  CHECK(sbdpd_flops(3, 7, 1, 9e6, &c) == SBDPD_STATUS_UNSUPPORTED_ORDER);
  CHECK(strlen(sbdpd_last_error()) > 0);

  CHECK(sbdpd_pa_builtin("nope", &pa) != SBDPD_STATUS_OK);
  CHECK(sbdpd_pa_apply(NULL, x, 4, y) == SBDPD_STATUS_NULL_POINTER);
  printf("ok %s\n", sbdpd_version());
  return 0;
}
