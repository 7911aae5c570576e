// command-line front end: codebook fitting, feature extraction, training,
// conversion, and the evaluation harnesses
#include "skqvc/eval.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace skqvc;

namespace {

uint64_t env_seed() {
    const char * s = std::getenv("SKQVC_SEED");
    return s ? std::strtoull(s, nullptr, 10) : 0;
}

std::vector<std::string> list_ext(const std::string & dir, const std::string & ext) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto & e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ext) out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// flags shared by the training-based subcommands
struct TrainFlags {
    std::string config;
    double   lr = 2e-4, lambda_fm = LAMBDA_FM_DEFAULT, lambda_mel = LAMBDA_MEL_DEFAULT;
    int      batch_size = 1, segment_frames = 32;
    int64_t  steps = 0, ckpt_interval = 0;
    uint64_t seed = 0, encoder_seed = 0;
    bool no_deltas = false, external = false;
    std::string svcomp = "on";
};

void add_train_flags(CLI::App * cmd, TrainFlags & f) {
    cmd->add_option("--config", f.config, "training config file (key = value); flags win");
    cmd->add_option("--lr", f.lr, "learning rate (default 0.0002)");
    cmd->add_option("--lambda-fm", f.lambda_fm, "feature-matching loss weight (default 2)");
    cmd->add_option("--lambda-mel", f.lambda_mel, "mel loss weight (default 45)");
    cmd->add_option("--batch-size", f.batch_size, "utterances per step (default 1)");
    cmd->add_option("--segment-frames", f.segment_frames, "training crop length in frames (default 32)");
    cmd->add_option("--steps", f.steps, "number of training steps");
    cmd->add_option("--ckpt-interval", f.ckpt_interval, "checkpoint every N steps (default: final only)");
    cmd->add_option("--seed", f.seed, "global seed (default $SKQVC_SEED or 0)");
    cmd->add_option("--encoder-seed", f.encoder_seed, "feature-encoder projection seed");
    cmd->add_flag("--no-deltas", f.no_deltas, "drop the delta rows from the feature encoder");
    cmd->add_option("--svcomp", f.svcomp, "variation wiring: on, bypass, or off (default on)");
    cmd->add_flag("--external-speaker", f.external,
                  "use the external-speaker adapter instead of the residual average");
}

// config file first, explicit flags win
TrainConfig merged_config(const CLI::App * cmd, const TrainFlags & f) {
    TrainConfig cfg;
    if (!f.config.empty()) cfg = TrainConfig::load(f.config);
    if (cmd->count("--lr")) cfg.lr = f.lr;
    if (cmd->count("--lambda-fm")) cfg.lambda_fm = f.lambda_fm;
    if (cmd->count("--lambda-mel")) cfg.lambda_mel = f.lambda_mel;
    if (cmd->count("--batch-size")) cfg.batch_size = f.batch_size;
    if (cmd->count("--segment-frames")) cfg.segment_frames = f.segment_frames;
    if (cmd->count("--steps")) cfg.max_steps = f.steps;
    if (cmd->count("--ckpt-interval")) cfg.ckpt_interval = f.ckpt_interval;
    if (cmd->count("--seed")) {
        cfg.seed = f.seed;
    } else if (f.config.empty()) {
        cfg.seed = env_seed();
    }
    if (cmd->count("--encoder-seed")) cfg.encoder_seed = f.encoder_seed;
    if (cmd->count("--no-deltas")) cfg.encoder_deltas = false;
    if (cmd->count("--svcomp")) {
        if (f.svcomp == "on")          cfg.variation_mode = VariationMode::svcomp;
        else if (f.svcomp == "bypass") cfg.variation_mode = VariationMode::bypass;
        else if (f.svcomp == "off")    cfg.variation_mode = VariationMode::off;
        else throw InvalidConfig("--svcomp must be on, bypass, or off");
    }
    if (f.external) {
        cfg.speaker_source = SpeakerSource::external;
        if (!cmd->count("--svcomp")) cfg.variation_mode = VariationMode::off;
    }
    return cfg;
}

FeatureSequence load_any_features(const std::string & path, const PseudoEncoderConfig & enc) {
    if (fs::path(path).extension() == ".skqf") return load_features(path);
    return pseudo_encode(load_waveform(path), enc);
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"one-shot voice conversion by k-means quantization of speech features"};
    app.require_subcommand(1);

    // --- build-codebook ---
    auto * cb_cmd = app.add_subcommand("build-codebook", "fit a frozen k-means codebook");
    std::string cb_features, cb_out;
    int cb_k = 256, cb_batch = 1024;
    uint64_t cb_seed = env_seed();
    cb_cmd->add_option("--features", cb_features, "directory of .skqf (or .wav) inputs")->required();
    cb_cmd->add_option("--k", cb_k, "number of clusters (default 256)");
    cb_cmd->add_option("--batch-size", cb_batch, "minibatch size (default 1024)");
    cb_cmd->add_option("--seed", cb_seed, "seed (default $SKQVC_SEED or 0)");
    cb_cmd->add_option("--out", cb_out, "output .skqc path")->required();

    // --- extract-features ---
    auto * ef_cmd = app.add_subcommand("extract-features", "encode audio to .skqf feature files");
    std::string ef_in, ef_out;
    uint64_t ef_seed = env_seed();
    bool ef_no_deltas = false;
    ef_cmd->add_option("--audio", ef_in, "input wav file or directory")->required();
    ef_cmd->add_option("--out", ef_out, "output .skqf file or directory")->required();
    ef_cmd->add_option("--seed", ef_seed, "encoder projection seed (default $SKQVC_SEED or 0)");
    ef_cmd->add_flag("--no-deltas", ef_no_deltas, "drop the delta rows");

    // --- train ---
    auto * tr_cmd = app.add_subcommand("train", "train the decoder and disentangler");
    std::string tr_data, tr_codebook, tr_out;
    TrainFlags tr_flags;
    tr_cmd->add_option("--data", tr_data, "directory of training wavs")->required();
    tr_cmd->add_option("--codebook", tr_codebook, "frozen codebook (.skqc)")->required();
    tr_cmd->add_option("--out", tr_out, "output checkpoint path")->required();
    add_train_flags(tr_cmd, tr_flags);

    // --- convert ---
    auto * cv_cmd = app.add_subcommand("convert", "convert source speech to the target voice");
    std::string cv_src, cv_tgt, cv_ckpt, cv_cb, cv_out;
    cv_cmd->add_option("--source", cv_src, "source wav or .skqf")->required();
    cv_cmd->add_option("--target", cv_tgt, "target wav or .skqf")->required();
    cv_cmd->add_option("--ckpt", cv_ckpt, "trained checkpoint")->required();
    cv_cmd->add_option("--codebook", cv_cb, "frozen codebook (.skqc)")->required();
    cv_cmd->add_option("--out", cv_out, "output wav path")->required();

    // --- evaluate ---
    auto * ev_cmd = app.add_subcommand("evaluate", "metrics between two utterances");
    std::string ev_a, ev_b, ev_cb;
    uint64_t ev_seed = env_seed();
    bool ev_no_deltas = false;
    ev_cmd->add_option("--source", ev_a, "reference wav")->required();
    ev_cmd->add_option("--converted", ev_b, "converted wav")->required();
    ev_cmd->add_option("--codebook", ev_cb, "frozen codebook (.skqc)")->required();
    ev_cmd->add_option("--seed", ev_seed, "encoder projection seed");
    ev_cmd->add_flag("--no-deltas", ev_no_deltas, "drop the delta rows");

    // --- sweep ---
    auto * sw_cmd = app.add_subcommand("sweep",
                                       "codebook-size sweep with/without variation compensation");
    std::string sw_sizes = "128,256,512,1024,4096,8192", sw_mode = "both", sw_data, sw_out;
    TrainFlags sw_flags;
    sw_cmd->add_option("--sizes", sw_sizes, "comma-separated codebook sizes");
    sw_cmd->add_option("--data", sw_data, "dataset directory")->required();
    sw_cmd->add_option("--out", sw_out, "output csv path")->required();
    add_train_flags(sw_cmd, sw_flags);
    sw_cmd->get_option("--svcomp")->description("on, off, or both (default both)");

    // --- ablate ---
    auto * ab_cmd = app.add_subcommand("ablate", "run the ablation table");
    std::string ab_data, ab_out;
    TrainFlags ab_flags;
    ab_cmd->add_option("--data", ab_data, "dataset directory")->required();
    ab_cmd->add_option("--out", ab_out, "output csv path")->required();
    add_train_flags(ab_cmd, ab_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp & e) {
        return app.exit(e);
    } catch (const CLI::ParseError & e) {
        app.exit(e);
        return 1;
    }

    try {
        if (cb_cmd->parsed()) {
            std::vector<FeatureSequence> feats;
            int64_t frames = 0;
            for (const auto & p : list_ext(cb_features, ".skqf")) {
                feats.push_back(load_features(p));
                frames += feats.back().frames;
            }
            if (feats.empty()) {
                PseudoEncoderConfig enc;
                enc.seed = cb_seed;
                for (const auto & p : list_ext(cb_features, ".wav")) {
                    feats.push_back(pseudo_encode(load_waveform(p), enc));
                    frames += feats.back().frames;
                }
            }
            const Codebook cb = fit_codebook(feats, cb_k, cb_batch, cb_seed);
            write_codebook(cb_out, cb);
            std::cout << "K=" << cb.K << " dim=" << cb.dim << " frames=" << frames << "\n";
            return 0;
        }

        if (ef_cmd->parsed()) {
            PseudoEncoderConfig enc;
            enc.seed = ef_seed;
            enc.use_deltas = !ef_no_deltas;
            if (fs::is_directory(ef_in)) {
                fs::create_directories(ef_out);
                for (const auto & p : list_ext(ef_in, ".wav")) {
                    fs::path out = fs::path(ef_out) / fs::path(p).filename().replace_extension(".skqf");
                    write_features(out.string(), pseudo_encode(load_waveform(p), enc));
                }
            } else {
                write_features(ef_out, pseudo_encode(load_waveform(ef_in), enc));
            }
            return 0;
        }

        if (tr_cmd->parsed()) {
            TrainConfig cfg = merged_config(tr_cmd, tr_flags);
            cfg.codebook_path = tr_codebook;
            cfg.ckpt_path = tr_out;
            fit(tr_data, cfg, &std::cout);
            std::cout << "checkpoint written to " << tr_out << "\n";
            return 0;
        }

        if (cv_cmd->parsed()) {
            const TrainState st = TrainState::load(cv_ckpt);
            const Codebook cb = load_codebook(cv_cb);
            const PseudoEncoderConfig enc = st.cfg.pseudo_config();
            const FeatureSequence src = load_any_features(cv_src, enc);
            const FeatureSequence tgt = load_any_features(cv_tgt, enc);
            Waveform out;
            if (st.cfg.speaker_source == SpeakerSource::external) {
                out = convert_external(src, external_speaker_vector(tgt), st, cb);
            } else {
                out = convert_features(src, tgt, st, cb);
            }
            save_waveform(cv_out, out);
            std::cout << "wrote " << out.samples.size() << " samples to " << cv_out << "\n";
            return 0;
        }

        if (ev_cmd->parsed()) {
            const Codebook cb = load_codebook(ev_cb);
            PseudoEncoderConfig enc;
            enc.seed = ev_seed;
            enc.use_deltas = !ev_no_deltas;
            enc.out_dim = cb.dim;
            const Waveform a = load_waveform(ev_a);
            const Waveform b = load_waveform(ev_b);
            std::cout << "f0_pcc=" << f0_pcc(a, b) << "\n";
            std::cout << "code_agreement=" << code_agreement(a, b, cb, enc) << "\n";
            std::cout << "speaker_cosine=" << speaker_cosine(a, b, cb, enc) << "\n";
            return 0;
        }

        if (sw_cmd->parsed()) {
            TrainConfig cfg;
            {
                // "--svcomp both" is sweep-specific; strip it before the shared merge
                TrainFlags f = sw_flags;
                if (f.svcomp == "both") f.svcomp = "on";
                cfg = merged_config(sw_cmd, f);
                if (sw_flags.svcomp == "both" || !sw_cmd->count("--svcomp")) {
                    cfg.variation_mode = VariationMode::svcomp;
                }
            }
            std::vector<int> sizes;
            std::stringstream ss(sw_sizes);
            std::string tok;
            while (std::getline(ss, tok, ',')) sizes.push_back(std::stoi(tok));
            std::vector<VariationMode> modes;
            const std::string m = sw_cmd->count("--svcomp") ? sw_flags.svcomp : std::string("both");
            if (m == "on")        modes = {VariationMode::svcomp};
            else if (m == "off")  modes = {VariationMode::off};
            else if (m == "both") modes = {VariationMode::svcomp, VariationMode::off};
            else throw InvalidConfig("--svcomp must be on, off, or both");
            const auto rows = sweep_codebook_sizes(sizes, modes, sw_data, cfg.max_steps, cfg, &std::cout);
            std::ofstream f(sw_out);
            f << sweep_to_csv(rows);
            std::cout << "wrote " << rows.size() << " rows to " << sw_out << "\n";
            return 0;
        }

        if (ab_cmd->parsed()) {
            const TrainConfig cfg = merged_config(ab_cmd, ab_flags);
            const auto rows = run_ablations(ab_data, cfg.max_steps, cfg, &std::cout);
            std::ofstream f(ab_out);
            f << ablations_to_csv(rows);
            std::cout << "wrote " << rows.size() << " rows to " << ab_out << "\n";
            return 0;
        }
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
