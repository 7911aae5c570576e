#include "skqvc/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace skqvc {

namespace {

constexpr char     SKQF_MAGIC[4]   = {'S', 'K', 'Q', 'F'};
constexpr uint16_t SKQF_VERSION    = 1;
constexpr size_t   SKQF_HEADER_LEN = 4 + 2 + 4 + 4 + 1 + 3;

} // namespace

FeatureSequence load_features(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw UnreadableFile("cannot open feature file: " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < SKQF_HEADER_LEN || std::memcmp(buf.data(), SKQF_MAGIC, 4) != 0) {
        throw BadMagic("not an SKQF file: " + path);
    }
    uint16_t version; std::memcpy(&version, buf.data() + 4, 2);
    uint32_t dim;     std::memcpy(&dim,     buf.data() + 6, 4);
    uint32_t frames;  std::memcpy(&frames,  buf.data() + 10, 4);
    const uint8_t dtype = buf[14];
    if (version != SKQF_VERSION) throw BadMagic("SKQF version " + std::to_string(version) + " unsupported");
    if (dtype != 0)              throw BadMagic("SKQF dtype " + std::to_string(dtype) + " unsupported");
    if (buf[15] != 0 || buf[16] != 0 || buf[17] != 0) throw BadMagic("SKQF reserved bytes nonzero");
    if (dim == 0 || frames == 0) throw DimMismatch("SKQF dim/frames zero in " + path);

    const size_t expect = (size_t) dim * frames * 4;
    if (buf.size() - SKQF_HEADER_LEN != expect) {
        throw DimMismatch("SKQF payload size mismatch in " + path);
    }

    FeatureSequence out;
    out.dim        = (int) dim;
    out.frames     = (int) frames;
    out.source_tag = path;
    out.values.resize((size_t) dim * frames);
    const uint8_t * p = buf.data() + SKQF_HEADER_LEN;
    for (size_t i = 0; i < out.values.size(); i++) {
        float v;
        std::memcpy(&v, p + i * 4, 4);
        if (!std::isfinite(v)) throw NonFiniteValue("SKQF non-finite value in " + path);
        out.values[i] = v;
    }
    return out;
}

void write_features(const std::string & path, const FeatureSequence & f) {
    if (f.dim <= 0 || f.frames <= 0) throw DimMismatch("write_features: empty sequence");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UnreadableFile("cannot open for writing: " + path);

    out.write(SKQF_MAGIC, 4);
    const uint16_t version = SKQF_VERSION;
    const uint32_t dim = (uint32_t) f.dim, frames = (uint32_t) f.frames;
    const uint8_t  dtype = 0, zero[3] = {0, 0, 0};
    out.write(reinterpret_cast<const char *>(&version), 2);
    out.write(reinterpret_cast<const char *>(&dim), 4);
    out.write(reinterpret_cast<const char *>(&frames), 4);
    out.write(reinterpret_cast<const char *>(&dtype), 1);
    out.write(reinterpret_cast<const char *>(zero), 3);
    for (double v : f.values) {
        const float fv = (float) v;
        out.write(reinterpret_cast<const char *>(&fv), 4);
    }
}

FeatureSequence pseudo_encode(const Waveform & w, const PseudoEncoderConfig & cfg) {
    if ((int64_t) w.samples.size() < cfg.stft.win) {
        throw AudioTooShort("pseudo_encode: need at least " + std::to_string(cfg.stft.win) + " samples");
    }
    const MelSpectrogram mel = compute_mel(w, cfg.stft);
    const int n_mels = mel.n_mels;
    const int T      = mel.frames;
    const int in_rows = cfg.use_deltas ? 2 * n_mels : n_mels;

    // mel + first-order deltas (delta of frame 0 is zero)
    std::vector<double> feat((size_t) in_rows * T, 0.0);
    for (int t = 0; t < T; t++) {
        for (int m = 0; m < n_mels; m++) {
            feat[(size_t) t * in_rows + m] = mel.at(m, t);
            if (cfg.use_deltas && t > 0) {
                feat[(size_t) t * in_rows + n_mels + m] = mel.at(m, t) - mel.at(m, t - 1);
            }
        }
    }

    // fixed seeded projection, scaled by 1/sqrt(in_rows)
    Rng rng(cfg.seed ^ 0x534b5156ULL /* "SKQV" */);
    std::vector<double> proj((size_t) cfg.out_dim * in_rows);
    const double scale = 1.0 / std::sqrt((double) in_rows);
    for (double & v : proj) v = rng.next_gaussian() * scale;

    FeatureSequence out;
    out.dim        = cfg.out_dim;
    out.frames     = T;
    out.source_tag = "pseudo:" + std::to_string(cfg.seed);
    out.values.assign((size_t) cfg.out_dim * T, 0.0);
    for (int t = 0; t < T; t++) {
        const double * x = feat.data() + (size_t) t * in_rows;
        double * y = out.frame(t);
        for (int o = 0; o < cfg.out_dim; o++) {
            const double * row = proj.data() + (size_t) o * in_rows;
            double acc = 0.0;
            for (int i = 0; i < in_rows; i++) acc += row[i] * x[i];
            y[o] = acc;
        }
    }
    return out;
}

FeatureSequence pseudo_encode(const Waveform & w, uint64_t seed) {
    PseudoEncoderConfig cfg;
    cfg.seed = seed;
    return pseudo_encode(w, cfg);
}

} // namespace skqvc
