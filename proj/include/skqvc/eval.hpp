#pragma once

#include "skqvc/conversion.hpp"

#include <iosfwd>

namespace skqvc {

// Per-frame fundamental frequency in Hz; 0 marks an unvoiced frame.
struct F0Track {
    std::vector<double> values;
    int hop = HOP_SIZE;

    int frames() const { return (int) values.size(); }
    bool voiced(int t) const { return values[t] > 0.0; }
};

inline constexpr double F0_MIN_HZ = 50.0;
inline constexpr double F0_MAX_HZ = 600.0;
inline constexpr double F0_VOICING_THRESHOLD = 0.3;

// Autocorrelation pitch tracker: one estimate per hop, 50-600 Hz search band,
// frames with peak normalized autocorrelation below 0.3 are unvoiced.
F0Track extract_f0(const Waveform & w);

// Pearson correlation over frames voiced in both tracks (truncated to the
// shorter). Throws InsufficientVoicedOverlap with fewer than 2 shared voiced
// frames or a degenerate (zero-variance) overlap.
double f0_pcc(const F0Track & a, const F0Track & b);
double f0_pcc(const Waveform & a, const Waveform & b);

// Fraction of frames on which the two utterances map to the same code index.
// Proxy for intelligibility; not a word error rate.
double code_agreement(const Waveform & src, const Waveform & conv, const Codebook & cb,
                      const PseudoEncoderConfig & enc);

// Cosine similarity of the two time-averaged residuals. Proxy for speaker
// similarity; not a verification score.
double speaker_cosine(const Waveform & a, const Waveform & b, const Codebook & cb,
                      const PseudoEncoderConfig & enc);

// One trained model per (K, variation mode) cell on the same dataset/budget.
struct SweepRow {
    int    K = 0;
    bool   svcomp = false;
    double recon_mel_l1   = 0.0;
    double f0_pcc         = 0.0;
    double code_agreement = 0.0;
    double quant_mse      = 0.0;
};

std::vector<SweepRow> sweep_codebook_sizes(const std::vector<int> & sizes,
                                           const std::vector<VariationMode> & modes,
                                           const std::string & dataset_dir,
                                           int64_t budget_steps, const TrainConfig & base,
                                           std::ostream * log = nullptr);

std::string sweep_to_csv(const std::vector<SweepRow> & rows);

struct AblationRow {
    std::string name;
    double recon_mel_l1   = 0.0;
    double f0_pcc         = 0.0;
    double code_agreement = 0.0;
    double speaker_auc    = 0.0;
};

// Rows: full, no_bottleneck, no_deltas, external_speaker. Speaker labels come
// from the filename prefix before the first underscore.
std::vector<AblationRow> run_ablations(const std::string & dataset_dir, int64_t budget_steps,
                                       const TrainConfig & base, std::ostream * log = nullptr);

std::string ablations_to_csv(const std::vector<AblationRow> & rows);

// Same/different-speaker ranking quality of the mean-residual cosine over all
// clip pairs; 0.5 is chance. Near-zero embeddings count as similarity 0
// rather than erroring, so degenerate models score chance.
double speaker_auc(const std::vector<std::string> & labels,
                   const std::vector<FeatureSequence> & features, const Codebook & cb,
                   const DisentanglerParams & p);

} // namespace skqvc
