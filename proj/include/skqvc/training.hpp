#pragma once

#include "skqvc/disentangler.hpp"
#include "skqvc/losses.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace skqvc {

// How the speaking-variation path is wired:
//   svcomp  - full model: V = bottleneck(S - S_avg), content bottleneck, concat
//   bypass  - "-bottleneck" ablation: C := Q + (S - S_avg), projections unused
//   off     - no variation path at all: decoder input = Q + S_avg
enum class VariationMode { svcomp, bypass, off };

enum class EncoderKind { pseudo, skqf };

enum class SpeakerSource { residual_avg, external };

struct TrainConfig {
    std::string codebook_path;

    double lambda_fm  = LAMBDA_FM_DEFAULT;
    double lambda_mel = LAMBDA_MEL_DEFAULT;

    double lr         = 2e-4;
    double adam_beta1 = 0.8;
    double adam_beta2 = 0.99;
    double lr_decay   = 0.999;   // per epoch

    int      batch_size     = 1;   // utterances per step
    int      segment_frames = 32;  // training crop length
    uint64_t seed           = 0;
    int64_t  max_steps      = 0;
    int64_t  ckpt_interval  = 0;   // 0 = only final
    std::string ckpt_path;         // empty = no periodic checkpoints

    VariationMode variation_mode = VariationMode::svcomp;
    SpeakerSource speaker_source = SpeakerSource::residual_avg;
    int d_v = VARIATION_DIM;

    EncoderKind encoder       = EncoderKind::pseudo;
    uint64_t    encoder_seed  = 0;
    bool        encoder_deltas = true;
    std::string skqf_dir;

    GeneratorConfig     gen;
    DiscriminatorConfig disc;
    StftConfig          stft;

    bool svcomp_enabled() const { return variation_mode == VariationMode::svcomp; }
    LossConfig loss_config() const { return {lambda_fm, lambda_mel, stft}; }
    PseudoEncoderConfig pseudo_config() const {
        return {encoder_seed, gen.in_dim, encoder_deltas, stft};
    }

    std::string to_text() const;
    static TrainConfig from_text(const std::string & text);
    static TrainConfig load(const std::string & path);
    void save(const std::string & path) const;
};

// Full trainable state; serializes as a single binary checkpoint.
struct TrainState {
    TrainConfig        cfg;
    GeneratorState     gen;        // params include the disentangler entries
    DiscriminatorState disc;
    nn::Adam           opt_g, opt_d;
    uint64_t           step = 0;
    Rng                data_rng{0};
    uint64_t           codebook_checksum = 0;

    // handles into gen.params
    int h_svcomp_w = -1, h_svcomp_b = -1, h_content_w = -1, h_content_b = -1;
    int h_ext_w = -1, h_ext_b = -1;   // external-speaker adapter (ablation only)

    static TrainState init(const TrainConfig & cfg, const Codebook & cb);

    DisentanglerParams disentangler_params() const;
    void save(const std::string & path) const;
    static TrainState load(const std::string & path);
};

struct TrainPair {
    Waveform        wave;
    FeatureSequence features;
};

// Builds the decoder input for one utterance under the configured wiring.
// speaker_override replaces S_avg (conversion: target speaker; external mode:
// adapter output of the external vector). This pure path is bit-identical to
// the differentiable path used inside train_step.
FeatureSequence decoder_input(const FeatureSequence & w, const Codebook & cb,
                              const TrainState & state,
                              const std::vector<double> * speaker_override = nullptr);

// Mean feature vector over time; the desk-scale stand-in for an external
// speaker-verification embedding.
std::vector<double> external_speaker_vector(const FeatureSequence & w);

// Runs the trained external-speaker adapter (linear + bias) on a raw vector.
std::vector<double> adapt_speaker(const TrainState & state, const std::vector<double> & x);

// One discriminator update followed by one generator(+disentangler) update.
LossBreakdown train_step(const std::vector<TrainPair> & batch, TrainState & state,
                         const Codebook & cb);

// Loads the dataset from a directory of wav files, then runs train_step to
// max_steps with random fixed-length crops. Loss log lines go to `log` when
// given: "step=N l_adv_g=... l_fm=... l_mel=... l_adv_d=..."
TrainState fit(const std::string & dataset_dir, const TrainConfig & cfg,
               std::ostream * log = nullptr);

// Continues a loaded state for additional steps on the same dataset.
void fit_continue(TrainState & state, const Codebook & cb,
                  const std::vector<TrainPair> & dataset, int64_t steps,
                  std::ostream * log = nullptr);

// Loads wav (+features) pairs the way fit does; exposed for eval harnesses.
std::vector<TrainPair> load_dataset(const std::string & dataset_dir, const TrainConfig & cfg);

} // namespace skqvc
