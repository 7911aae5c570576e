#include "skqvc/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace skqvc {

namespace {

uint32_t read_u32(const uint8_t * p) {
    return (uint32_t) p[0] | ((uint32_t) p[1] << 8) | ((uint32_t) p[2] << 16) | ((uint32_t) p[3] << 24);
}
uint16_t read_u16(const uint8_t * p) {
    return (uint16_t) (p[0] | (p[1] << 8));
}

} // namespace

void peak_normalize(std::vector<double> & samples) {
    double peak = 0.0;
    for (double v : samples) peak = std::max(peak, std::fabs(v));
    if (peak <= 0.0) return;
    const double inv = 1.0 / peak;
    for (double & v : samples) v *= inv;
}

std::vector<double> resample(const std::vector<double> & x, int rate_in, int rate_out) {
    if (rate_in == rate_out || x.empty()) return x;
    const int g = std::gcd(rate_in, rate_out);
    const int up = rate_out / g;     // interpolation factor L
    const int dn = rate_in  / g;     // decimation factor M

    // windowed-sinc lowpass at min(Nyquist_in, Nyquist_out), 16 zero crossings
    const double fc    = 0.45 / std::max(up, dn); // cutoff in units of upsampled rate
    const int    half  = 16 * std::max(up, dn);
    const size_t n_out = (x.size() * (size_t) up) / (size_t) dn;

    std::vector<double> y(n_out, 0.0);
    for (size_t n = 0; n < n_out; n++) {
        // position on the virtual upsampled grid
        const int64_t pos = (int64_t) n * dn;
        double acc = 0.0;
        for (int64_t k = pos - half; k <= pos + half; k++) {
            if (k % up != 0) continue;            // zeros inserted by upsampling
            const int64_t src = k / up;
            if (src < 0 || src >= (int64_t) x.size()) continue;
            const double t = (double) (pos - k);
            double h;
            if (t == 0.0) {
                h = 2.0 * fc;
            } else {
                const double arg = 2.0 * M_PI * fc * t;
                h = 2.0 * fc * std::sin(arg) / arg;
            }
            // Hann window over the filter support
            const double wnd = 0.5 + 0.5 * std::cos(M_PI * t / (half + 1));
            acc += x[src] * h * wnd;
        }
        y[n] = acc * up;
    }
    return y;
}

Waveform load_waveform(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw UnreadableFile("cannot open audio file: " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
        throw UnsupportedFormat("not a RIFF/WAVE file: " + path);
    }

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    const uint8_t * data = nullptr;
    uint32_t data_size = 0;

    size_t off = 12;
    while (off + 8 <= buf.size()) {
        const uint32_t chunk_size = read_u32(buf.data() + off + 4);
        if (std::memcmp(buf.data() + off, "fmt ", 4) == 0 && chunk_size >= 16) {
            format   = read_u16(buf.data() + off + 8);
            channels = read_u16(buf.data() + off + 10);
            rate     = read_u32(buf.data() + off + 12);
            bits     = read_u16(buf.data() + off + 22);
        } else if (std::memcmp(buf.data() + off, "data", 4) == 0) {
            data      = buf.data() + off + 8;
            data_size = std::min<uint32_t>(chunk_size, (uint32_t) (buf.size() - off - 8));
        }
        off += 8 + chunk_size + (chunk_size & 1);
    }
    if (format == 0xFFFE) format = 1; // WAVE_FORMAT_EXTENSIBLE, assume PCM layout
    if (data == nullptr || channels == 0 || rate == 0) {
        throw UnsupportedFormat("missing fmt/data chunk: " + path);
    }
    if (format != 1 && format != 3) {
        throw UnsupportedFormat("unsupported WAVE format tag " + std::to_string(format));
    }

    const int bytes_per_sample = bits / 8;
    if ((format == 1 && bits != 16 && bits != 32) || (format == 3 && bits != 32)) {
        throw UnsupportedFormat("unsupported sample width " + std::to_string(bits));
    }
    const size_t n_frames = data_size / (size_t) (bytes_per_sample * channels);
    if (n_frames == 0) throw EmptyAudio("no samples in " + path);

    std::vector<double> mono(n_frames, 0.0);
    for (size_t i = 0; i < n_frames; i++) {
        double acc = 0.0;
        for (int c = 0; c < channels; c++) {
            const uint8_t * p = data + (i * channels + c) * bytes_per_sample;
            double v;
            if (format == 3) {
                float fv;
                std::memcpy(&fv, p, 4);
                v = fv;
            } else if (bits == 16) {
                int16_t s;
                std::memcpy(&s, p, 2);
                v = s / 32768.0;
            } else {
                int32_t s;
                std::memcpy(&s, p, 4);
                v = s / 2147483648.0;
            }
            acc += v;
        }
        mono[i] = acc / channels;
    }

    if ((int) rate != SAMPLE_RATE) {
        mono = resample(mono, (int) rate, SAMPLE_RATE);
        if (mono.empty()) throw EmptyAudio("resampling produced no samples: " + path);
    }
    for (double v : mono) {
        if (!std::isfinite(v)) throw UnsupportedFormat("non-finite sample in " + path);
    }
    peak_normalize(mono);

    Waveform w;
    w.samples     = std::move(mono);
    w.sample_rate = SAMPLE_RATE;
    return w;
}

void save_waveform(const std::string & path, const Waveform & w) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UnreadableFile("cannot open for writing: " + path);

    const uint32_t n         = (uint32_t) w.samples.size();
    const uint32_t data_size = n * 2;
    const uint32_t rate      = (uint32_t) w.sample_rate;
    const uint32_t byte_rate = rate * 2;

    auto put_u32 = [&](uint32_t v) { f.write(reinterpret_cast<const char *>(&v), 4); };
    auto put_u16 = [&](uint16_t v) { f.write(reinterpret_cast<const char *>(&v), 2); };

    f.write("RIFF", 4); put_u32(36 + data_size); f.write("WAVE", 4);
    f.write("fmt ", 4); put_u32(16); put_u16(1); put_u16(1);
    put_u32(rate); put_u32(byte_rate); put_u16(2); put_u16(16);
    f.write("data", 4); put_u32(data_size);

    for (double v : w.samples) {
        const double c = std::clamp(v, -1.0, 1.0);
        const int16_t s = (int16_t) std::lrint(c * 32767.0);
        f.write(reinterpret_cast<const char *>(&s), 2);
    }
}

} // namespace skqvc
