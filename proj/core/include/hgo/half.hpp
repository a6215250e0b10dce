#pragma once

#include <cstdint>

namespace hgo {

// IEEE 754 binary16 conversion, round-to-nearest-even. Used only by weight
// serialization; no arithmetic happens at half precision.
std::uint16_t float_to_half(float f);
float half_to_float(std::uint16_t h);

}  // namespace hgo
