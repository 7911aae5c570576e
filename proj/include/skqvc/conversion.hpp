#pragma once

#include "skqvc/training.hpp"

namespace skqvc {

// Converts the source utterance to the target's voice: source content codes
// plus the target's time-averaged residual drive the decoder. Output length
// is exactly source_frames * 320 samples. Throws IncompatibleCheckpoint when
// the codebook checksum does not match the one the model was trained against.
Waveform convert_features(const FeatureSequence & source, const FeatureSequence & target,
                          const TrainState & state, const Codebook & cb);

// Same, but the speaker comes from an externally supplied vector (dim =
// feature dim) passed through the trained adapter. Requires a state trained
// with an external speaker source.
Waveform convert_external(const FeatureSequence & source, const std::vector<double> & speaker,
                          const TrainState & state, const Codebook & cb);

// Waveform-level wrapper: runs the configured feature encoder on both inputs.
Waveform convert(const Waveform & source, const Waveform & target,
                 const TrainState & state, const Codebook & cb);

} // namespace skqvc
