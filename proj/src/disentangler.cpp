#include "skqvc/disentangler.hpp"

#include <algorithm>
#include <cmath>

namespace skqvc {

DisentanglerParams DisentanglerParams::init(uint64_t seed, int dim, int d_v, int d_c) {
    DisentanglerParams p;
    p.dim = dim;
    p.d_v = d_v;
    p.d_c = d_c;
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt((double) dim);
    p.svcomp_w.resize((size_t) d_v * dim);
    p.svcomp_b.assign(d_v, 0.0);
    p.content_w.resize((size_t) d_c * dim);
    p.content_b.assign(d_c, 0.0);
    for (double & v : p.svcomp_w)  v = rng.uniform(-bound, bound);
    for (double & v : p.content_w) v = rng.uniform(-bound, bound);
    for (double & v : p.svcomp_b)  v = rng.uniform(-bound, bound);
    for (double & v : p.content_b) v = rng.uniform(-bound, bound);
    return p;
}

SpeakerEmbedding speaker_embedding(const ResidualSequence & s) {
    if (s.frames < 1) throw EmptySequence("speaker_embedding: T == 0");
    SpeakerEmbedding e;
    e.dim = s.dim;
    e.values.assign(s.dim, 0.0);
    // sorted summation: the mean depends only on the multiset of frames, so a
    // frame permutation leaves the result bit-identical
    std::vector<double> col(s.frames);
    for (int i = 0; i < s.dim; i++) {
        for (int t = 0; t < s.frames; t++) col[t] = s.at(i, t);
        std::sort(col.begin(), col.end());
        double acc = 0.0;
        for (double v : col) acc += v;
        e.values[i] = acc / s.frames;
    }
    return e;
}

VariationEmbedding svcomp(const ResidualSequence & s, const SpeakerEmbedding & s_avg,
                          const DisentanglerParams & p) {
    if (s.dim != p.dim || s_avg.dim != p.dim) throw ShapeMismatch("svcomp: dim mismatch");
    VariationEmbedding v;
    v.dim    = p.d_v;
    v.frames = s.frames;
    v.values.resize((size_t) p.d_v * s.frames);
    std::vector<double> centered(p.dim);
    for (int t = 0; t < s.frames; t++) {
        const double * col = s.frame(t);
        for (int i = 0; i < p.dim; i++) centered[i] = col[i] - s_avg.values[i];
        double * out = v.values.data() + (size_t) t * p.d_v;
        for (int o = 0; o < p.d_v; o++) {
            const double * row = p.svcomp_w.data() + (size_t) o * p.dim;
            // sum first, bias last: keeps this path bit-identical to the
            // training graph (matmul followed by bias add)
            double acc = 0.0;
            for (int i = 0; i < p.dim; i++) acc += row[i] * centered[i];
            out[o] = acc + p.svcomp_b[o];
        }
    }
    return v;
}

ContentEmbedding build_content(const QuantizedSequence & q, const VariationEmbedding & v,
                               const DisentanglerParams & p) {
    if (q.frames != v.frames) throw LengthMismatch("build_content: Q and V frame counts differ");
    if (q.dim != p.dim || v.dim != p.d_v) throw ShapeMismatch("build_content: dim mismatch");
    ContentEmbedding c;
    c.dim    = p.d_c + p.d_v;
    c.d_c    = p.d_c;
    c.frames = q.frames;
    c.values.resize((size_t) c.dim * q.frames);
    for (int t = 0; t < q.frames; t++) {
        const double * qi = q.frame(t);
        double * out = c.values.data() + (size_t) t * c.dim;
        for (int o = 0; o < p.d_c; o++) {
            const double * row = p.content_w.data() + (size_t) o * p.dim;
            double acc = 0.0;
            for (int i = 0; i < p.dim; i++) acc += row[i] * qi[i];
            out[o] = acc + p.content_b[o];
        }
        const double * vi = v.values.data() + (size_t) t * p.d_v;
        for (int o = 0; o < p.d_v; o++) out[p.d_c + o] = vi[o];
    }
    return c;
}

FeatureSequence recombine(const ContentEmbedding & c, const SpeakerEmbedding & s_avg) {
    if (c.dim != s_avg.dim) throw DimMismatch("recombine: C dim != s_avg dim");
    FeatureSequence out;
    out.dim        = c.dim;
    out.frames     = c.frames;
    out.source_tag = "recombined";
    out.values.resize(c.values.size());
    for (int t = 0; t < c.frames; t++) {
        const double * ci = c.values.data() + (size_t) t * c.dim;
        double * oi = out.frame(t);
        for (int i = 0; i < c.dim; i++) oi[i] = ci[i] + s_avg.values[i];
    }
    return out;
}

DisentangledSpeech disentangle(const FeatureSequence & w, const Codebook & cb,
                               const DisentanglerParams & p) {
    DisentangledSpeech d;
    d.Q     = quantize(w, cb);
    d.S     = residual(w, d.Q);
    d.S_avg = speaker_embedding(d.S);
    d.V     = svcomp(d.S, d.S_avg, p);
    d.C     = build_content(d.Q, d.V, p);
    return d;
}

} // namespace skqvc
