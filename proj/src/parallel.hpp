#pragma once

// Loop pragmas that vanish when OpenMP is off, so kernels compile unchanged.

#if defined(MEMPLAN_HAVE_OPENMP)
#include <omp.h>
#define MEMPLAN_PARALLEL_FOR _Pragma("omp parallel for schedule(static)")
#define MEMPLAN_PARALLEL_FOR_DYNAMIC _Pragma("omp parallel for schedule(dynamic, 1)")
#else
#define MEMPLAN_PARALLEL_FOR
#define MEMPLAN_PARALLEL_FOR_DYNAMIC
#endif
