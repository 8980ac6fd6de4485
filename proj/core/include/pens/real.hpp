#pragma once

// Scalar type for the differentiable numeric core. Training uses 32-bit
// reals; defining PENS_REAL_DOUBLE builds a 64-bit variant (used by the
// gradient-check tests) inside its own inline namespace so both variants
// can be linked into one binary.

#ifdef PENS_REAL_DOUBLE
#define PENS_REAL_ABI f64
#else
#define PENS_REAL_ABI f32
#endif

namespace pens {
inline namespace PENS_REAL_ABI {

#ifdef PENS_REAL_DOUBLE
using Real = double;
#else
using Real = float;
#endif

}  // namespace PENS_REAL_ABI
}  // namespace pens
