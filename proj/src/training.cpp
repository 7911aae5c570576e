#include "skqvc/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;

namespace skqvc {

// ---------------------------------------------------------------------------
// TrainConfig text round-trip (key = value lines)
// ---------------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
    char buf[32];
    snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join_ints(const std::vector<int> & v) {
    std::string out;
    for (size_t i = 0; i < v.size(); i++) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> split_ints(const std::string & s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stoi(tok));
    }
    return out;
}

const char * mode_name(VariationMode m) {
    switch (m) {
        case VariationMode::svcomp: return "svcomp";
        case VariationMode::bypass: return "bypass";
        case VariationMode::off:    return "off";
    }
    return "svcomp";
}

VariationMode mode_from(const std::string & s) {
    if (s == "svcomp") return VariationMode::svcomp;
    if (s == "bypass") return VariationMode::bypass;
    if (s == "off")    return VariationMode::off;
    throw InvalidConfig("unknown variation_mode: " + s);
}

} // namespace

std::string TrainConfig::to_text() const {
    std::ostringstream o;
    o << "codebook_path = " << codebook_path << "\n";
    o << "lambda_fm = " << fmt_double(lambda_fm) << "\n";
    o << "lambda_mel = " << fmt_double(lambda_mel) << "\n";
    o << "lr = " << fmt_double(lr) << "\n";
    o << "adam_beta1 = " << fmt_double(adam_beta1) << "\n";
    o << "adam_beta2 = " << fmt_double(adam_beta2) << "\n";
    o << "lr_decay = " << fmt_double(lr_decay) << "\n";
    o << "batch_size = " << batch_size << "\n";
    o << "segment_frames = " << segment_frames << "\n";
    o << "seed = " << seed << "\n";
    o << "max_steps = " << max_steps << "\n";
    o << "ckpt_interval = " << ckpt_interval << "\n";
    o << "ckpt_path = " << ckpt_path << "\n";
    o << "variation_mode = " << mode_name(variation_mode) << "\n";
    o << "speaker_source = " << (speaker_source == SpeakerSource::external ? "external" : "residual_avg") << "\n";
    o << "d_v = " << d_v << "\n";
    o << "encoder = " << (encoder == EncoderKind::skqf ? "skqf" : "pseudo") << "\n";
    o << "encoder_seed = " << encoder_seed << "\n";
    o << "encoder_deltas = " << (encoder_deltas ? 1 : 0) << "\n";
    o << "skqf_dir = " << skqf_dir << "\n";
    o << "gen.in_dim = " << gen.in_dim << "\n";
    o << "gen.base_channels = " << gen.base_channels << "\n";
    o << "gen.upsample_factors = " << join_ints(gen.upsample_factors) << "\n";
    o << "gen.upsample_kernels = " << join_ints(gen.upsample_kernels) << "\n";
    o << "gen.resblock_kernels = " << join_ints(gen.resblock_kernels) << "\n";
    o << "gen.resblock_dilations = " << join_ints(gen.resblock_dilations) << "\n";
    o << "disc.mpd_periods = " << join_ints(disc.mpd_periods) << "\n";
    o << "disc.mpd_channels = " << join_ints(disc.mpd_channels) << "\n";
    o << "disc.msd_scales = " << join_ints(disc.msd_scales) << "\n";
    o << "disc.msd_channels = " << join_ints(disc.msd_channels) << "\n";
    o << "stft.fft = " << stft.fft << "\n";
    o << "stft.win = " << stft.win << "\n";
    o << "stft.hop = " << stft.hop << "\n";
    o << "stft.n_mels = " << stft.n_mels << "\n";
    o << "stft.fmin = " << fmt_double(stft.fmin) << "\n";
    o << "stft.fmax = " << fmt_double(stft.fmax) << "\n";
    return o.str();
}

TrainConfig TrainConfig::from_text(const std::string & text) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty() || line[0] == '#') continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const size_t a = s.find_first_not_of(" \t\r");
            const size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }

    TrainConfig c;
    auto str = [&](const char * k, std::string & out) { if (kv.count(k)) out = kv[k]; };
    auto num = [&](const char * k, auto & out) {
        if (kv.count(k)) out = (std::decay_t<decltype(out)>) std::stod(kv[k]);
    };
    auto ints = [&](const char * k, std::vector<int> & out) { if (kv.count(k)) out = split_ints(kv[k]); };

    str("codebook_path", c.codebook_path);
    num("lambda_fm", c.lambda_fm);
    num("lambda_mel", c.lambda_mel);
    num("lr", c.lr);
    num("adam_beta1", c.adam_beta1);
    num("adam_beta2", c.adam_beta2);
    num("lr_decay", c.lr_decay);
    num("batch_size", c.batch_size);
    num("segment_frames", c.segment_frames);
    if (kv.count("seed")) c.seed = std::stoull(kv["seed"]);
    num("max_steps", c.max_steps);
    num("ckpt_interval", c.ckpt_interval);
    str("ckpt_path", c.ckpt_path);
    if (kv.count("variation_mode")) c.variation_mode = mode_from(kv["variation_mode"]);
    if (kv.count("speaker_source")) {
        c.speaker_source = kv["speaker_source"] == "external" ? SpeakerSource::external
                                                              : SpeakerSource::residual_avg;
    }
    num("d_v", c.d_v);
    if (kv.count("encoder")) c.encoder = kv["encoder"] == "skqf" ? EncoderKind::skqf : EncoderKind::pseudo;
    if (kv.count("encoder_seed")) c.encoder_seed = std::stoull(kv["encoder_seed"]);
    if (kv.count("encoder_deltas")) c.encoder_deltas = kv["encoder_deltas"] != "0";
    str("skqf_dir", c.skqf_dir);
    num("gen.in_dim", c.gen.in_dim);
    num("gen.base_channels", c.gen.base_channels);
    ints("gen.upsample_factors", c.gen.upsample_factors);
    ints("gen.upsample_kernels", c.gen.upsample_kernels);
    ints("gen.resblock_kernels", c.gen.resblock_kernels);
    ints("gen.resblock_dilations", c.gen.resblock_dilations);
    ints("disc.mpd_periods", c.disc.mpd_periods);
    ints("disc.mpd_channels", c.disc.mpd_channels);
    ints("disc.msd_scales", c.disc.msd_scales);
    ints("disc.msd_channels", c.disc.msd_channels);
    num("stft.fft", c.stft.fft);
    num("stft.win", c.stft.win);
    num("stft.hop", c.stft.hop);
    num("stft.n_mels", c.stft.n_mels);
    num("stft.fmin", c.stft.fmin);
    num("stft.fmax", c.stft.fmax);
    return c;
}

TrainConfig TrainConfig::load(const std::string & path) {
    std::ifstream f(path);
    if (!f) throw UnreadableFile("cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str());
}

void TrainConfig::save(const std::string & path) const {
    std::ofstream f(path);
    if (!f) throw UnreadableFile("cannot open for writing: " + path);
    f << to_text();
}

// ---------------------------------------------------------------------------
// TrainState
// ---------------------------------------------------------------------------

namespace {

TrainState build_state(const TrainConfig & cfg) {
    if (cfg.speaker_source == SpeakerSource::external &&
        cfg.variation_mode == VariationMode::svcomp) {
        throw InvalidConfig("external speaker embedding is not used with SVComp");
    }
    TrainState s;
    s.cfg  = cfg;
    s.gen  = GeneratorState::init(cfg.gen, cfg.seed ^ 0x67656e /* "gen" */);
    s.disc = DiscriminatorState::init(cfg.disc, cfg.seed ^ 0x646973 /* "dis" */);

    const int dim = cfg.gen.in_dim;
    const int d_v = cfg.d_v;
    const int d_c = dim - d_v;
    if (d_c < 1) throw InvalidConfig("d_v >= feature dim");

    Rng rng(cfg.seed ^ 0x626f74 /* "bot" */);
    auto & ps = s.gen.params;
    s.h_svcomp_w  = ps.add("disent.svcomp.w", {d_v, dim});
    s.h_svcomp_b  = ps.add("disent.svcomp.b", {d_v});
    s.h_content_w = ps.add("disent.content.w", {d_c, dim});
    s.h_content_b = ps.add("disent.content.b", {d_c});
    nn::init_fan_in_uniform(ps[s.h_svcomp_w].value, rng, dim);
    nn::init_fan_in_uniform(ps[s.h_svcomp_b].value, rng, dim);
    nn::init_fan_in_uniform(ps[s.h_content_w].value, rng, dim);
    nn::init_fan_in_uniform(ps[s.h_content_b].value, rng, dim);
    if (cfg.speaker_source == SpeakerSource::external) {
        s.h_ext_w = ps.add("disent.ext.w", {dim, dim});
        s.h_ext_b = ps.add("disent.ext.b", {dim});
        nn::init_fan_in_uniform(ps[s.h_ext_w].value, rng, dim);
        nn::init_fan_in_uniform(ps[s.h_ext_b].value, rng, dim);
    }

    s.opt_g = {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8, 0};
    s.opt_d = {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8, 0};
    s.data_rng = Rng(cfg.seed ^ 0x646174 /* "dat" */);
    return s;
}

} // namespace

TrainState TrainState::init(const TrainConfig & cfg, const Codebook & cb) {
    TrainState s = build_state(cfg);
    if (!cb.frozen) throw InvalidConfig("codebook must be frozen before training");
    s.codebook_checksum = cb.checksum();
    return s;
}

DisentanglerParams TrainState::disentangler_params() const {
    DisentanglerParams p;
    p.dim = cfg.gen.in_dim;
    p.d_v = cfg.d_v;
    p.d_c = p.dim - p.d_v;
    p.svcomp_w  = gen.params[h_svcomp_w].value.data;
    p.svcomp_b  = gen.params[h_svcomp_b].value.data;
    p.content_w = gen.params[h_content_w].value.data;
    p.content_b = gen.params[h_content_b].value.data;
    return p;
}

// ---------------------------------------------------------------------------
// decoder input, pure path
// ---------------------------------------------------------------------------

namespace {

// mean over time of each feature row, external-embedding surrogate
std::vector<double> mean_feature_vector(const FeatureSequence & w) {
    std::vector<double> m(w.dim, 0.0);
    for (int t = 0; t < w.frames; t++) {
        const double * col = w.frame(t);
        for (int i = 0; i < w.dim; i++) m[i] += col[i];
    }
    for (double & v : m) v /= w.frames;
    return m;
}

} // namespace

std::vector<double> adapt_speaker(const TrainState & st, const std::vector<double> & x) {
    if (st.h_ext_w < 0) throw InvalidConfig("adapt_speaker: state has no external-speaker adapter");
    const int dim = st.cfg.gen.in_dim;
    if ((int) x.size() != dim) throw DimMismatch("adapt_speaker: vector dim mismatch");
    const auto & w = st.gen.params[st.h_ext_w].value.data;
    const auto & b = st.gen.params[st.h_ext_b].value.data;
    std::vector<double> y(dim);
    for (int o = 0; o < dim; o++) {
        double acc = 0.0;
        const double * row = w.data() + (size_t) o * dim;
        for (int i = 0; i < dim; i++) acc += row[i] * x[i];
        y[o] = acc + b[o];
    }
    return y;
}

std::vector<double> external_speaker_vector(const FeatureSequence & w) {
    return mean_feature_vector(w);
}

FeatureSequence decoder_input(const FeatureSequence & w, const Codebook & cb,
                              const TrainState & state,
                              const std::vector<double> * speaker_override) {
    const DisentanglerParams p = state.disentangler_params();
    const VariationMode mode = state.cfg.variation_mode;

    if (mode == VariationMode::svcomp) {
        DisentangledSpeech d = disentangle(w, cb, p);
        SpeakerEmbedding s_used;
        s_used.dim = p.dim;
        s_used.values = speaker_override ? *speaker_override : d.S_avg.values;
        return recombine(d.C, s_used);
    }

    const QuantizedSequence q = quantize(w, cb);
    const ResidualSequence  s = residual(w, q);
    const SpeakerEmbedding  s_avg = speaker_embedding(s);
    const std::vector<double> & s_used = speaker_override ? *speaker_override : s_avg.values;

    FeatureSequence out;
    out.dim        = w.dim;
    out.frames     = w.frames;
    out.source_tag = "decoder_input";
    out.values.resize(w.values.size());
    for (int t = 0; t < w.frames; t++) {
        const double * qc = q.frame(t);
        const double * sc = s.frame(t);
        double * oc = out.frame(t);
        for (int i = 0; i < w.dim; i++) {
            if (mode == VariationMode::bypass) {
                oc[i] = (qc[i] + (sc[i] - s_avg.values[i])) + s_used[i];
            } else {  // off
                oc[i] = qc[i] + s_used[i];
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// train_step
// ---------------------------------------------------------------------------

namespace {

// differentiable decoder-input + generator forward for one utterance
ad::VarId build_fake(ad::Graph & g, const std::vector<ad::VarId> & gen_leaves,
                     const TrainState & st, const Codebook & cb, const FeatureSequence & w) {
    const VariationMode mode = st.cfg.variation_mode;

    if (mode == VariationMode::svcomp) {
        const DisentanglerParams p = st.disentangler_params();
        const QuantizedSequence q = quantize(w, cb);
        const ResidualSequence  s = residual(w, q);
        const SpeakerEmbedding  s_avg = speaker_embedding(s);

        ad::Tensor qt({1, w.dim, w.frames}), sct({1, w.dim, w.frames});
        for (int i = 0; i < w.dim; i++) {
            for (int t = 0; t < w.frames; t++) {
                qt.data[(size_t) i * w.frames + t]  = q.vectors[(size_t) t * w.dim + i];
                sct.data[(size_t) i * w.frames + t] = s.at(i, t) - s_avg.values[i];
            }
        }
        const ad::VarId qv  = g.constant(std::move(qt));
        const ad::VarId scv = g.constant(std::move(sct));
        const ad::VarId vvar = g.linear1x1(scv, gen_leaves[st.h_svcomp_w], gen_leaves[st.h_svcomp_b]);
        const ad::VarId core = g.linear1x1(qv, gen_leaves[st.h_content_w], gen_leaves[st.h_content_b]);
        const ad::VarId cvar = g.concat_channels(core, vvar);
        const ad::VarId sv   = g.constant(ad::Tensor({(int64_t) w.dim}, s_avg.values));
        const ad::VarId z    = g.bias_add(cvar, sv);
        return st.gen.forward(g, gen_leaves, z);
    }

    if (mode == VariationMode::off && st.cfg.speaker_source == SpeakerSource::external) {
        const QuantizedSequence q = quantize(w, cb);
        ad::Tensor qt({1, w.dim, w.frames});
        for (int i = 0; i < w.dim; i++) {
            for (int t = 0; t < w.frames; t++) {
                qt.data[(size_t) i * w.frames + t] = q.vectors[(size_t) t * w.dim + i];
            }
        }
        const std::vector<double> ext = mean_feature_vector(w);
        const ad::VarId extv = g.constant(ad::Tensor({1, (int64_t) w.dim, 1}, ext));
        const ad::VarId spk  = g.linear1x1(extv, gen_leaves[st.h_ext_w], gen_leaves[st.h_ext_b]);
        const ad::VarId z    = g.bias_add(g.constant(std::move(qt)), spk);
        return st.gen.forward(g, gen_leaves, z);
    }

    // bypass / off: the decoder input carries no trainable dependency
    const FeatureSequence z = decoder_input(w, cb, st, nullptr);
    return st.gen.forward(g, gen_leaves, g.constant(features_to_tensor(z)));
}

ad::VarId wave_const(ad::Graph & g, const Waveform & w) {
    return g.constant(ad::Tensor({1, 1, (int64_t) w.samples.size()}, w.samples));
}

} // namespace

LossBreakdown train_step(const std::vector<TrainPair> & batch, TrainState & state,
                         const Codebook & cb) {
    if (batch.empty()) throw EmptyDataset("train_step: empty batch");
    if (cb.checksum() != state.codebook_checksum) {
        throw IncompatibleCheckpoint("train_step: codebook checksum mismatch");
    }
    for (const auto & p : batch) {
        const int64_t expect = (int64_t) p.features.frames * HOP_SIZE;
        if (std::llabs((int64_t) p.wave.samples.size() - expect) > HOP_SIZE) {
            throw MisalignedPair("train_step: waveform/features misaligned");
        }
    }

    const LossConfig lcfg = state.cfg.loss_config();
    const double inv_b = 1.0 / batch.size();
    LossBreakdown out;

    // --- discriminator update (fake detached) ---
    {
        ad::Graph g;
        const auto gl = state.gen.params.leaves(g, false);
        const auto dl = state.disc.params.leaves(g, true);
        std::vector<ad::VarId> terms;
        for (const auto & pair : batch) {
            const ad::VarId real = wave_const(g, pair.wave);
            const ad::VarId fake = build_fake(g, gl, state, cb, pair.features);
            terms.push_back(discriminator_loss_graph(g, real, fake, state.disc, dl, lcfg));
        }
        const ad::VarId total = g.weighted_sum(terms, std::vector<double>(terms.size(), inv_b));
        out.l_adv_d = g.scalar(total);
        g.backward(total);
        state.opt_d.step(state.disc.params, g, dl);
    }

    // --- generator(+disentangler) update ---
    {
        ad::Graph g;
        const auto gl = state.gen.params.leaves(g, true);
        const auto dl = state.disc.params.leaves(g, false);
        std::vector<ad::VarId> advs, fms, mels;
        for (const auto & pair : batch) {
            const ad::VarId real = wave_const(g, pair.wave);
            const ad::VarId fake = build_fake(g, gl, state, cb, pair.features);
            const auto vars = generator_loss_graph(g, real, fake, state.disc, dl, lcfg);
            advs.push_back(vars.adv);
            fms.push_back(vars.fm);
            mels.push_back(vars.mel);
        }
        const std::vector<double> w(batch.size(), inv_b);
        const ad::VarId adv = g.weighted_sum(advs, w);
        const ad::VarId fm  = g.weighted_sum(fms, w);
        const ad::VarId mel = g.weighted_sum(mels, w);
        const ad::VarId total = g.weighted_sum({adv, fm, mel},
                                               {1.0, lcfg.lambda_fm, lcfg.lambda_mel});
        out.l_adv_g   = g.scalar(adv);
        out.l_fm      = g.scalar(fm);
        out.l_mel     = g.scalar(mel);
        out.l_g_total = g.scalar(total);
        g.backward(total);
        state.opt_g.step(state.gen.params, g, gl);
    }

    state.step++;
    if (!out.finite()) {
        throw NonFiniteLoss("train_step: non-finite loss at step " + std::to_string(state.step));
    }
    return out;
}

// ---------------------------------------------------------------------------
// dataset + fit
// ---------------------------------------------------------------------------

std::vector<TrainPair> load_dataset(const std::string & dataset_dir, const TrainConfig & cfg) {
    std::vector<std::string> paths;
    if (!fs::is_directory(dataset_dir)) throw EmptyDataset("not a directory: " + dataset_dir);
    for (const auto & e : fs::directory_iterator(dataset_dir)) {
        if (e.path().extension() == ".wav") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw EmptyDataset("no wav files in " + dataset_dir);

    std::vector<TrainPair> out;
    for (const auto & path : paths) {
        TrainPair p;
        p.wave = load_waveform(path);
        if (cfg.encoder == EncoderKind::pseudo) {
            p.features = pseudo_encode(p.wave, cfg.pseudo_config());
        } else {
            fs::path fp = cfg.skqf_dir.empty() ? fs::path(path) : fs::path(cfg.skqf_dir) / fs::path(path).filename();
            fp.replace_extension(".skqf");
            p.features = load_features(fp.string());
        }
        const int T = std::min<int>(p.features.frames, (int) (p.wave.samples.size() / HOP_SIZE));
        if (T < 1) continue;
        p.features.values.resize((size_t) T * p.features.dim);
        p.features.frames = T;
        p.wave.samples.resize((size_t) T * HOP_SIZE);
        out.push_back(std::move(p));
    }
    if (out.empty()) throw EmptyDataset("no usable utterances in " + dataset_dir);
    return out;
}

void fit_continue(TrainState & state, const Codebook & cb,
                  const std::vector<TrainPair> & dataset, int64_t steps,
                  std::ostream * log) {
    if (dataset.empty()) throw EmptyDataset("fit: empty dataset");
    const int seg = state.cfg.segment_frames;
    const int64_t steps_per_epoch = std::max<int64_t>(1, (int64_t) dataset.size() / state.cfg.batch_size);

    for (int64_t i = 0; i < steps; i++) {
        std::vector<TrainPair> batch;
        for (int b = 0; b < state.cfg.batch_size; b++) {
            const auto & src = dataset[state.data_rng.next_below(dataset.size())];
            TrainPair crop;
            if (src.features.frames > seg) {
                const int start = (int) state.data_rng.next_below(src.features.frames - seg + 1);
                crop.features.dim    = src.features.dim;
                crop.features.frames = seg;
                crop.features.values.assign(
                    src.features.values.begin() + (size_t) start * src.features.dim,
                    src.features.values.begin() + (size_t) (start + seg) * src.features.dim);
                crop.wave.sample_rate = src.wave.sample_rate;
                crop.wave.samples.assign(
                    src.wave.samples.begin() + (size_t) start * HOP_SIZE,
                    src.wave.samples.begin() + (size_t) (start + seg) * HOP_SIZE);
            } else {
                crop = src;
            }
            batch.push_back(std::move(crop));
        }
        const LossBreakdown lb = train_step(batch, state, cb);
        if (log) {
            (*log) << "step=" << state.step
                   << " l_adv_g=" << lb.l_adv_g
                   << " l_fm=" << lb.l_fm
                   << " l_mel=" << lb.l_mel
                   << " l_adv_d=" << lb.l_adv_d << "\n";
        }
        if (state.step % steps_per_epoch == 0) {
            state.opt_g.lr *= state.cfg.lr_decay;
            state.opt_d.lr *= state.cfg.lr_decay;
        }
        if (state.cfg.ckpt_interval > 0 && !state.cfg.ckpt_path.empty() &&
            state.step % state.cfg.ckpt_interval == 0) {
            state.save(state.cfg.ckpt_path);
        }
    }
}

TrainState fit(const std::string & dataset_dir, const TrainConfig & cfg, std::ostream * log) {
    const Codebook cb = load_codebook(cfg.codebook_path);
    TrainState state = TrainState::init(cfg, cb);
    const auto dataset = load_dataset(dataset_dir, cfg);
    fit_continue(state, cb, dataset, cfg.max_steps, log);
    if (!cfg.ckpt_path.empty()) state.save(cfg.ckpt_path);
    return state;
}

// ---------------------------------------------------------------------------
// checkpoint serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char     CKPT_MAGIC[4] = {'S', 'K', 'Q', 'M'};
constexpr uint16_t CKPT_VERSION  = 1;

void put_bytes(std::ostream & o, const void * p, size_t n) {
    o.write(static_cast<const char *>(p), (std::streamsize) n);
}

template <typename T>
void put(std::ostream & o, T v) { put_bytes(o, &v, sizeof(T)); }

void put_str(std::ostream & o, const std::string & s) {
    put<uint32_t>(o, (uint32_t) s.size());
    put_bytes(o, s.data(), s.size());
}

void put_tensor(std::ostream & o, const ad::Tensor & t) {
    put<uint32_t>(o, (uint32_t) t.shape.size());
    for (int64_t d : t.shape) put<int64_t>(o, d);
    put_bytes(o, t.data.data(), t.data.size() * sizeof(double));
}

void put_params(std::ostream & o, const nn::ParamSet & ps) {
    put<uint32_t>(o, (uint32_t) ps.size());
    for (const auto & p : ps.params) {
        put_str(o, p.name);
        put_tensor(o, p.value);
        put_tensor(o, p.m);
        put_tensor(o, p.v);
    }
}

struct Reader {
    const uint8_t * p;
    const uint8_t * end;

    void need(size_t n) const {
        if ((size_t) (end - p) < n) throw BadMagic("checkpoint truncated");
    }
    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, p, sizeof(T));
        p += sizeof(T);
        return v;
    }
    std::string get_str() {
        const uint32_t n = get<uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char *>(p), n);
        p += n;
        return s;
    }
    void get_tensor(ad::Tensor & t) {
        const uint32_t rank = get<uint32_t>();
        std::vector<int64_t> shape(rank);
        for (auto & d : shape) d = get<int64_t>();
        if (shape != t.shape) throw IncompatibleCheckpoint("checkpoint tensor shape mismatch");
        need(t.data.size() * sizeof(double));
        std::memcpy(t.data.data(), p, t.data.size() * sizeof(double));
        p += t.data.size() * sizeof(double);
    }
    void get_params(nn::ParamSet & ps) {
        const uint32_t n = get<uint32_t>();
        if (n != ps.size()) throw IncompatibleCheckpoint("checkpoint parameter count mismatch");
        for (auto & prm : ps.params) {
            const std::string name = get_str();
            if (name != prm.name) throw IncompatibleCheckpoint("checkpoint parameter name mismatch: " + name);
            get_tensor(prm.value);
            get_tensor(prm.m);
            get_tensor(prm.v);
        }
    }
};

void put_adam(std::ostream & o, const nn::Adam & a) {
    put<double>(o, a.lr);
    put<double>(o, a.beta1);
    put<double>(o, a.beta2);
    put<double>(o, a.eps);
    put<int64_t>(o, a.t);
}

nn::Adam get_adam(Reader & r) {
    nn::Adam a;
    a.lr    = r.get<double>();
    a.beta1 = r.get<double>();
    a.beta2 = r.get<double>();
    a.eps   = r.get<double>();
    a.t     = r.get<int64_t>();
    return a;
}

} // namespace

void TrainState::save(const std::string & path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UnreadableFile("cannot open for writing: " + path);
    put_bytes(f, CKPT_MAGIC, 4);
    put<uint16_t>(f, CKPT_VERSION);
    put<uint64_t>(f, step);
    put<uint64_t>(f, codebook_checksum);
    put_str(f, cfg.to_text());
    put_adam(f, opt_g);
    put_adam(f, opt_d);
    for (int i = 0; i < 4; i++) put<uint64_t>(f, data_rng.s[i]);
    put_params(f, gen.params);
    put_params(f, disc.params);
}

TrainState TrainState::load(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw UnreadableFile("cannot open checkpoint: " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 6 || std::memcmp(buf.data(), CKPT_MAGIC, 4) != 0) {
        throw BadMagic("not a checkpoint file: " + path);
    }
    Reader r{buf.data() + 4, buf.data() + buf.size()};
    if (r.get<uint16_t>() != CKPT_VERSION) throw BadMagic("checkpoint version unsupported");

    const uint64_t step_v = r.get<uint64_t>();
    const uint64_t cbsum  = r.get<uint64_t>();
    const TrainConfig cfg = TrainConfig::from_text(r.get_str());

    TrainState s = build_state(cfg);
    s.step = step_v;
    s.codebook_checksum = cbsum;
    s.opt_g = get_adam(r);
    s.opt_d = get_adam(r);
    for (int i = 0; i < 4; i++) s.data_rng.s[i] = r.get<uint64_t>();
    r.get_params(s.gen.params);
    r.get_params(s.disc.params);
    return s;
}

} // namespace skqvc
