#pragma once

// Numeric precision of the tensor engine and everything built on it.
//
// The engine is compiled once per precision. Each build lives in its own
// inline namespace so a 32-bit and a 64-bit build can be linked into the
// same binary without symbol clashes.

#ifdef CWGAN_USE_DOUBLE
#define CWGAN_PRECISION_NS f64
#else
#define CWGAN_PRECISION_NS f32
#endif

namespace cwgan::inline CWGAN_PRECISION_NS {

#ifdef CWGAN_USE_DOUBLE
using Scalar = double;
#else
using Scalar = float;
#endif

}  // namespace cwgan::inline CWGAN_PRECISION_NS
