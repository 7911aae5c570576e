#include "skqvc/conversion.hpp"

namespace skqvc {

namespace {

void check_compat(const FeatureSequence & f, const TrainState & state, const Codebook & cb) {
    if (cb.checksum() != state.codebook_checksum) {
        throw IncompatibleCheckpoint("convert: codebook checksum mismatch");
    }
    if (f.dim != cb.dim || f.dim != state.cfg.gen.in_dim) {
        throw DimMismatch("convert: feature dim mismatch");
    }
    if (f.frames < 1) throw EmptySequence("convert: source has no frames");
}

} // namespace

Waveform convert_features(const FeatureSequence & source, const FeatureSequence & target,
                          const TrainState & state, const Codebook & cb) {
    check_compat(source, state, cb);
    if (target.frames < 1) throw EmptySequence("convert: target has no frames");
    if (target.dim != source.dim) throw DimMismatch("convert: target feature dim mismatch");

    const QuantizedSequence q_tgt = quantize(target, cb);
    const ResidualSequence  s_tgt = residual(target, q_tgt);
    const SpeakerEmbedding  spk   = speaker_embedding(s_tgt);

    const FeatureSequence z = decoder_input(source, cb, state, &spk.values);
    return generate(z, state.gen);
}

Waveform convert_external(const FeatureSequence & source, const std::vector<double> & speaker,
                          const TrainState & state, const Codebook & cb) {
    check_compat(source, state, cb);
    const std::vector<double> spk = adapt_speaker(state, speaker);
    const FeatureSequence z = decoder_input(source, cb, state, &spk);
    return generate(z, state.gen);
}

Waveform convert(const Waveform & source, const Waveform & target,
                 const TrainState & state, const Codebook & cb) {
    if (state.cfg.encoder != EncoderKind::pseudo) {
        throw InvalidConfig("convert: waveform-level conversion needs the built-in encoder");
    }
    const PseudoEncoderConfig pc = state.cfg.pseudo_config();
    const FeatureSequence ws = pseudo_encode(source, pc);
    const FeatureSequence wt = pseudo_encode(target, pc);
    if (state.cfg.speaker_source == SpeakerSource::external) {
        return convert_external(ws, external_speaker_vector(wt), state, cb);
    }
    return convert_features(ws, wt, state, cb);
}

} // namespace skqvc
