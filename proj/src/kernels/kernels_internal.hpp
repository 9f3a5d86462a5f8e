#pragma once

#include "bosegap/kernels.hpp"

namespace bosegap::kernels::detail {

extern const KernelTable kScalarTable;
#if defined(BOSEGAP_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

}  // namespace bosegap::kernels::detail
