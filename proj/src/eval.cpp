#include "skqvc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;

namespace skqvc {

// ---------------------------------------------------------------------------
// F0
// ---------------------------------------------------------------------------

F0Track extract_f0(const Waveform & w) {
    const int win = 1280;
    const int L   = (int) w.samples.size();
    if (L < win) throw AudioTooShort("extract_f0: need at least 1280 samples");

    const int sr      = w.sample_rate;
    const int min_lag = (int) std::ceil(sr / F0_MAX_HZ);
    const int max_lag = (int) std::floor(sr / F0_MIN_HZ);
    const int span    = win - max_lag;   // correlation support per lag

    F0Track track;
    track.hop = HOP_SIZE;
    const int T = L / HOP_SIZE;
    track.values.assign(T, 0.0);

    std::vector<double> r(max_lag + 1, 0.0);
    for (int t = 0; t < T; t++) {
        const int start = std::min(t * HOP_SIZE, L - win);
        const double * x = w.samples.data() + start;

        double e0 = 0.0;
        for (int n = 0; n < span; n++) e0 += x[n] * x[n];
        if (e0 < 1e-12) continue;   // silence

        for (int lag = min_lag; lag <= max_lag; lag++) {
            double num = 0.0, e1 = 0.0;
            for (int n = 0; n < span; n++) {
                num += x[n] * x[n + lag];
                e1  += x[n + lag] * x[n + lag];
            }
            const double denom = std::sqrt(e0 * e1);
            r[lag] = denom < 1e-12 ? 0.0 : num / denom;
        }

        // only interior local maxima are pitch candidates: a rise into either
        // search-band edge cannot be verified as a true peak (frame-rate hum
        // in synthesized audio sits exactly on the long-lag boundary)
        int    best_lag = 0;
        double best_r   = 0.0;
        for (int lag = min_lag + 1; lag < max_lag; lag++) {
            if (r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1] && r[lag] > best_r) {
                best_r   = r[lag];
                best_lag = lag;
            }
        }
        if (best_lag == 0 || best_r < F0_VOICING_THRESHOLD) continue;

        // subharmonics of a periodic signal score nearly as high as the true
        // period; take the shortest local peak close to the global maximum
        for (int lag = min_lag; lag < best_lag; lag++) {
            const double prev = lag > min_lag ? r[lag - 1] : -1.0;
            if (r[lag] >= prev && r[lag] >= r[lag + 1] && r[lag] >= 0.9 * best_r) {
                best_lag = lag;
                best_r   = r[lag];
                break;
            }
        }

        double lag = best_lag;
        if (best_lag > min_lag && best_lag < max_lag) {
            // parabolic refinement around the peak
            const double ym = r[best_lag - 1], y0 = r[best_lag], yp = r[best_lag + 1];
            const double denom = ym - 2.0 * y0 + yp;
            if (std::fabs(denom) > 1e-12) {
                const double delta = 0.5 * (ym - yp) / denom;
                if (std::fabs(delta) <= 1.0) lag += delta;
            }
        }
        const double f0 = sr / lag;
        if (f0 >= F0_MIN_HZ && f0 <= F0_MAX_HZ) track.values[t] = f0;
    }
    return track;
}

double f0_pcc(const F0Track & a, const F0Track & b) {
    const int T = std::min(a.frames(), b.frames());
    std::vector<double> xs, ys;
    for (int t = 0; t < T; t++) {
        if (a.voiced(t) && b.voiced(t)) {
            xs.push_back(a.values[t]);
            ys.push_back(b.values[t]);
        }
    }
    const size_t n = xs.size();
    if (n < 2) throw InsufficientVoicedOverlap("f0_pcc: fewer than 2 mutually voiced frames");

    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; i++) { mx += xs[i]; my += ys[i]; }
    mx /= n;
    my /= n;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (size_t i = 0; i < n; i++) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        cov += dx * dy;
        vx  += dx * dx;
        vy  += dy * dy;
    }
    if (vx <= 0.0 || vy <= 0.0) {
        if (xs == ys) return 1.0;   // identical constant contours
        throw InsufficientVoicedOverlap("f0_pcc: zero-variance overlap");
    }
    return cov / std::sqrt(vx * vy);
}

double f0_pcc(const Waveform & a, const Waveform & b) {
    return f0_pcc(extract_f0(a), extract_f0(b));
}

// ---------------------------------------------------------------------------
// proxy metrics
// ---------------------------------------------------------------------------

double code_agreement(const Waveform & src, const Waveform & conv, const Codebook & cb,
                      const PseudoEncoderConfig & enc) {
    const QuantizedSequence qa = quantize(pseudo_encode(src, enc), cb);
    const QuantizedSequence qb = quantize(pseudo_encode(conv, enc), cb);
    const int T = std::min(qa.frames, qb.frames);
    if (T < 1) throw EmptySequence("code_agreement: no overlapping frames");
    int agree = 0;
    for (int t = 0; t < T; t++) agree += qa.indices[t] == qb.indices[t];
    return (double) agree / T;
}

namespace {

std::vector<double> residual_mean(const FeatureSequence & w, const Codebook & cb) {
    const QuantizedSequence q = quantize(w, cb);
    const ResidualSequence  s = residual(w, q);
    return speaker_embedding(s).values;
}

double cosine(const std::vector<double> & a, const std::vector<double> & b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); i++) {
        dot += a[i] * b[i];
        na  += a[i] * a[i];
        nb  += b[i] * b[i];
    }
    if (std::sqrt(na) < 1e-12 || std::sqrt(nb) < 1e-12) {
        throw ZeroVector("speaker_cosine: near-zero speaker embedding");
    }
    return dot / std::sqrt(na * nb);
}

} // namespace

double speaker_cosine(const Waveform & a, const Waveform & b, const Codebook & cb,
                      const PseudoEncoderConfig & enc) {
    return cosine(residual_mean(pseudo_encode(a, enc), cb),
                  residual_mean(pseudo_encode(b, enc), cb));
}

double speaker_auc(const std::vector<std::string> & labels,
                   const std::vector<FeatureSequence> & features, const Codebook & cb,
                   const DisentanglerParams &) {
    if (labels.size() != features.size()) throw ShapeMismatch("speaker_auc: label/feature count mismatch");
    std::vector<std::vector<double>> embs;
    embs.reserve(features.size());
    for (const auto & f : features) embs.push_back(residual_mean(f, cb));

    // tolerant cosine: a ranking over near-zero embeddings is chance, not an
    // error, so degenerate pairs score 0 instead of throwing
    auto sim = [](const std::vector<double> & a, const std::vector<double> & b) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (size_t i = 0; i < a.size(); i++) {
            dot += a[i] * b[i];
            na  += a[i] * a[i];
            nb  += b[i] * b[i];
        }
        if (std::sqrt(na) < 1e-12 || std::sqrt(nb) < 1e-12) return 0.0;
        return dot / std::sqrt(na * nb);
    };
    std::vector<double> same, diff;
    for (size_t i = 0; i < embs.size(); i++) {
        for (size_t j = i + 1; j < embs.size(); j++) {
            (labels[i] == labels[j] ? same : diff).push_back(sim(embs[i], embs[j]));
        }
    }
    if (same.empty() || diff.empty()) throw EmptyDataset("speaker_auc: need both same and cross-speaker pairs");

    double wins = 0.0;
    for (double s : same) {
        for (double d : diff) {
            if (s > d) wins += 1.0;
            else if (s == d) wins += 0.5;
        }
    }
    return wins / ((double) same.size() * diff.size());
}

// ---------------------------------------------------------------------------
// sweep / ablations
// ---------------------------------------------------------------------------

namespace {

Waveform reconstruct(const FeatureSequence & w, const TrainState & st, const Codebook & cb) {
    if (st.cfg.speaker_source == SpeakerSource::external) {
        const std::vector<double> spk = adapt_speaker(st, external_speaker_vector(w));
        return generate(decoder_input(w, cb, st, &spk), st.gen);
    }
    return generate(decoder_input(w, cb, st, nullptr), st.gen);
}

struct ReconMetrics {
    double mel_l1 = 0.0;
    double pcc = 0.0;
    double agreement = 0.0;
    double quant_mse = 0.0;
};

ReconMetrics reconstruction_metrics(const std::vector<TrainPair> & dataset,
                                    const TrainState & st, const Codebook & cb) {
    const PseudoEncoderConfig enc = st.cfg.pseudo_config();
    ReconMetrics m;
    int n_pcc = 0;
    for (const auto & pair : dataset) {
        const Waveform recon = reconstruct(pair.features, st, cb);
        m.mel_l1    += mel_l1(compute_mel(pair.wave, st.cfg.stft), compute_mel(recon, st.cfg.stft));
        m.agreement += code_agreement(pair.wave, recon, cb, enc);
        m.quant_mse += quantization_mse(pair.features, cb);
        try {
            m.pcc += f0_pcc(pair.wave, recon);
            n_pcc++;
        } catch (const InsufficientVoicedOverlap &) {
            // clip contributes no pitch evidence
        }
    }
    const double n = (double) dataset.size();
    m.mel_l1    /= n;
    m.agreement /= n;
    m.quant_mse /= n;
    m.pcc = n_pcc > 0 ? m.pcc / n_pcc : 0.0;
    return m;
}

TrainState train_cell(const TrainConfig & cfg, const Codebook & cb,
                      const std::vector<TrainPair> & dataset, int64_t budget_steps,
                      std::ostream * log) {
    TrainState st = TrainState::init(cfg, cb);
    fit_continue(st, cb, dataset, budget_steps, log);
    return st;
}

std::vector<FeatureSequence> collect_features(const std::vector<TrainPair> & dataset) {
    std::vector<FeatureSequence> out;
    out.reserve(dataset.size());
    for (const auto & p : dataset) out.push_back(p.features);
    return out;
}

} // namespace

std::vector<SweepRow> sweep_codebook_sizes(const std::vector<int> & sizes,
                                           const std::vector<VariationMode> & modes,
                                           const std::string & dataset_dir,
                                           int64_t budget_steps, const TrainConfig & base,
                                           std::ostream * log) {
    const std::vector<TrainPair> dataset = load_dataset(dataset_dir, base);
    const std::vector<FeatureSequence> feats = collect_features(dataset);

    std::vector<SweepRow> rows;
    for (int K : sizes) {
        const Codebook cb = fit_codebook(feats, K, 1024, base.seed ^ (uint64_t) K);
        for (VariationMode mode : modes) {
            TrainConfig cfg = base;
            cfg.variation_mode = mode;
            if (log) {
                (*log) << "sweep cell K=" << K
                       << " svcomp=" << (mode == VariationMode::svcomp) << "\n";
            }
            const TrainState st = train_cell(cfg, cb, dataset, budget_steps, nullptr);
            const ReconMetrics m = reconstruction_metrics(dataset, st, cb);
            SweepRow row;
            row.K              = K;
            row.svcomp         = mode == VariationMode::svcomp;
            row.recon_mel_l1   = m.mel_l1;
            row.f0_pcc         = m.pcc;
            row.code_agreement = m.agreement;
            row.quant_mse      = m.quant_mse;
            rows.push_back(row);
            if (log) {
                (*log) << "sweep result K=" << K << " svcomp=" << row.svcomp
                       << " recon_mel_l1=" << row.recon_mel_l1 << "\n";
            }
        }
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow> & rows) {
    std::ostringstream o;
    o << "K,svcomp,recon_mel_l1,f0_pcc,code_agreement,quant_mse\n";
    for (const auto & r : rows) {
        o << r.K << "," << (r.svcomp ? 1 : 0) << "," << r.recon_mel_l1 << "," << r.f0_pcc
          << "," << r.code_agreement << "," << r.quant_mse << "\n";
    }
    return o.str();
}

std::vector<AblationRow> run_ablations(const std::string & dataset_dir, int64_t budget_steps,
                                       const TrainConfig & base, std::ostream * log) {
    // speaker labels from the filename prefix before the first underscore
    std::vector<std::string> labels;
    {
        std::vector<std::string> names;
        for (const auto & e : fs::directory_iterator(dataset_dir)) {
            if (e.path().extension() == ".wav") names.push_back(e.path().string());
        }
        std::sort(names.begin(), names.end());
        for (const auto & p : names) {
            const std::string stem = fs::path(p).stem().string();
            labels.push_back(stem.substr(0, stem.find('_')));
        }
    }

    struct Variant {
        const char * name;
        VariationMode mode;
        SpeakerSource spk;
        bool deltas;
    };
    const Variant variants[] = {
        {"full",             VariationMode::svcomp, SpeakerSource::residual_avg, true},
        {"no_bottleneck",    VariationMode::bypass, SpeakerSource::residual_avg, true},
        {"no_deltas",        VariationMode::svcomp, SpeakerSource::residual_avg, false},
        {"external_speaker", VariationMode::off,    SpeakerSource::external,     true},
    };

    std::vector<AblationRow> rows;
    for (const auto & v : variants) {
        TrainConfig cfg = base;
        cfg.variation_mode = v.mode;
        cfg.speaker_source = v.spk;
        cfg.encoder_deltas = v.deltas;
        if (log) (*log) << "ablation " << v.name << "\n";

        const std::vector<TrainPair> dataset = load_dataset(dataset_dir, cfg);
        const std::vector<FeatureSequence> feats = collect_features(dataset);
        int64_t total_frames = 0;
        for (const auto & f : feats) total_frames += f.frames;
        // K = 256 when the dataset supports it; clamp for tiny corpora
        const int K = (int) std::min<int64_t>(256, std::max<int64_t>(2, total_frames / 2));
        const Codebook cb = fit_codebook(feats, K, 1024, cfg.seed);
        const TrainState st = train_cell(cfg, cb, dataset, budget_steps, nullptr);
        const ReconMetrics m = reconstruction_metrics(dataset, st, cb);

        AblationRow row;
        row.name           = v.name;
        row.recon_mel_l1   = m.mel_l1;
        row.f0_pcc         = m.pcc;
        row.code_agreement = m.agreement;
        row.speaker_auc    = speaker_auc(labels, feats, cb, st.disentangler_params());
        rows.push_back(row);
        if (log) {
            (*log) << "ablation result " << row.name << " recon_mel_l1=" << row.recon_mel_l1
                   << " code_agreement=" << row.code_agreement << "\n";
        }
    }
    return rows;
}

std::string ablations_to_csv(const std::vector<AblationRow> & rows) {
    std::ostringstream o;
    o << "name,recon_mel_l1,f0_pcc,code_agreement,speaker_auc\n";
    for (const auto & r : rows) {
        o << r.name << "," << r.recon_mel_l1 << "," << r.f0_pcc << "," << r.code_agreement
          << "," << r.speaker_auc << "\n";
    }
    return o.str();
}

} // namespace skqvc
