#pragma once

#include "spx/audio.hpp"

namespace spx {

/// Band-limited resampling with a Kaiser-windowed sinc kernel (32 zero
/// crossings each side). The kernel cutoff follows the lower of the two
/// Nyquist rates. Output length is round(size * target / source). Equal
/// rates return the input unchanged.
AudioBuffer resample(const AudioBuffer& audio, double target_rate);

}  // namespace spx
