#include "mvst/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace mvst::dsp {

void StftConfig::validate() const {
    if (hop_length <= 0 || win_length <= 0 || fft_size <= 0)
        throw std::invalid_argument("STFT lengths must be positive");
    if (hop_length > win_length || win_length > fft_size)
        throw std::invalid_argument("STFT requires hop <= win <= fft_size");
    if ((fft_size & (fft_size - 1)) != 0) throw std::invalid_argument("fft_size must be a power of two");
}

std::string DspConfig::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "rate=" << sample_rate << ";seconds=" << cycle_seconds << ";win=" << stft.win_length
       << ";hop=" << stft.hop_length << ";fft=" << stft.fft_size
       << ";window=" << (stft.window == Window::hann ? "hann" : "rectangular") << ";n_mels=" << mel.n_mels
       << ";f_min=" << mel.f_min << ";f_max=" << mel.f_max << ";out=" << out_size << ";top_db=" << top_db;
    return os.str();
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix frame_signal(std::span<const double> samples, const StftConfig& config) {
    config.validate();
    const auto win = static_cast<std::size_t>(config.win_length);
    const auto hop = static_cast<std::size_t>(config.hop_length);
    if (samples.size() < win) throw std::invalid_argument("frame_signal: signal shorter than one window");
    const std::size_t frames = (samples.size() - win) / hop + 1;
    Matrix out(frames, win);
    for (std::size_t i = 0; i < frames; ++i)
        std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(i * hop), win, out.values.begin() + i * win);
    return out;
}

namespace {

/// FFTW planning is not thread-safe; executing a plan on new arrays is.
fftw_plan r2c_plan(int n) {
    static std::mutex mu;
    static std::map<int, fftw_plan> plans;
    std::lock_guard lock(mu);
    auto it = plans.find(n);
    if (it != plans.end()) return it->second;
    std::vector<double> in(static_cast<std::size_t>(n));
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan p = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (p == nullptr) throw std::runtime_error("FFTW failed to plan a transform of size " + std::to_string(n));
    plans.emplace(n, p);
    return p;
}

std::vector<double> make_window(const StftConfig& config) {
    std::vector<double> w(static_cast<std::size_t>(config.win_length), 1.0);
    if (config.window == Window::hann)
        for (std::size_t n = 0; n < w.size(); ++n)
            w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(w.size()));
    return w;
}

}  // namespace

Matrix stft_power(const Matrix& frames, const StftConfig& config) {
    config.validate();
    if (frames.empty()) throw std::invalid_argument("stft_power: no frames");
    if (frames.cols > static_cast<std::size_t>(config.fft_size))
        throw std::invalid_argument("stft_power: frame longer than fft_size");
    const auto n = static_cast<std::size_t>(config.fft_size);
    const auto bins = n / 2 + 1;
    auto window = make_window(config);
    window.resize(frames.cols, 1.0);
    const fftw_plan plan = r2c_plan(config.fft_size);

    Matrix power(frames.rows, bins);
    std::vector<double> in(n);
    std::vector<std::complex<double>> out(bins);
    for (std::size_t i = 0; i < frames.rows; ++i) {
        std::fill(in.begin(), in.end(), 0.0);
        for (std::size_t t = 0; t < frames.cols; ++t) in[t] = frames(i, t) * window[t];
        fftw_execute_dft_r2c(plan, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
        for (std::size_t k = 0; k < bins; ++k) power(i, k) = std::norm(out[k]);
    }
    return power;
}

MelFilterbank mel_filterbank(int fft_size, int n_mels, double f_min, double f_max, int sample_rate) {
    if (fft_size <= 0 || sample_rate <= 0) throw std::invalid_argument("mel_filterbank: sizes must be positive");
    if (n_mels < 2) throw std::invalid_argument("mel_filterbank: need at least two mel bands");
    if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0))
        throw std::invalid_argument("mel_filterbank: require 0 <= f_min < f_max <= rate/2");

    const auto bins = static_cast<std::size_t>(fft_size / 2 + 1);
    const double mel_lo = hz_to_mel(f_min), mel_hi = hz_to_mel(f_max);
    std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));

    MelFilterbank fb;
    fb.weights = Matrix(static_cast<std::size_t>(n_mels), bins);
    fb.center_freqs.resize(static_cast<std::size_t>(n_mels));
    for (std::size_t m = 0; m < fb.center_freqs.size(); ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        fb.center_freqs[m] = mid;
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / fft_size;
            const double w = std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid));
            fb.weights(m, k) = std::max(0.0, w);
        }
    }
    return fb;
}

Matrix resize_bilinear(const Matrix& input, std::size_t out_rows, std::size_t out_cols) {
    if (input.empty()) throw std::invalid_argument("resize_bilinear: empty input");
    if (out_rows == 0 || out_cols == 0) throw std::invalid_argument("resize_bilinear: zero target dimension");
    if (input.rows == out_rows && input.cols == out_cols) return input;

    const auto coord = [](std::size_t i, std::size_t in_n, std::size_t out_n) {
        return out_n == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(in_n - 1) / static_cast<double>(out_n - 1);
    };
    Matrix out(out_rows, out_cols);
    for (std::size_t r = 0; r < out_rows; ++r) {
        const double y = coord(r, input.rows, out_rows);
        const auto y0 = std::min(static_cast<std::size_t>(y), input.rows - 1);
        const auto y1 = std::min(y0 + 1, input.rows - 1);
        const double fy = y - static_cast<double>(y0);
        for (std::size_t c = 0; c < out_cols; ++c) {
            const double x = coord(c, input.cols, out_cols);
            const auto x0 = std::min(static_cast<std::size_t>(x), input.cols - 1);
            const auto x1 = std::min(x0 + 1, input.cols - 1);
            const double fx = x - static_cast<double>(x0);
            const double top = input(y0, x0) + fx * (input(y0, x1) - input(y0, x0));
            const double bottom = input(y1, x0) + fx * (input(y1, x1) - input(y1, x0));
            out(r, c) = top + fy * (bottom - top);
        }
    }
    return out;
}

Matrix mel_spectrogram(const Matrix& power, const MelFilterbank& filterbank, int out_size, double top_db) {
    if (filterbank.weights.cols != power.cols)
        throw std::invalid_argument("mel_spectrogram: filterbank has " + std::to_string(filterbank.weights.cols) +
                                    " bins, spectrogram has " + std::to_string(power.cols));
    if (out_size <= 0) throw std::invalid_argument("mel_spectrogram: output size must be positive");
    const auto n_mels = filterbank.weights.rows, frames = power.rows, bins = power.cols;

    Matrix db(n_mels, frames);
    for (std::size_t m = 0; m < n_mels; ++m) {
        for (std::size_t t = 0; t < frames; ++t) {
            double p = 0.0;
            for (std::size_t k = 0; k < bins; ++k) p += filterbank.weights(m, k) * power(t, k);
            db(m, t) = 10.0 * std::log10(p + 1e-10);
        }
    }
    const double floor = *std::max_element(db.values.begin(), db.values.end()) - top_db;
    for (auto& v : db.values) v = std::max(v, floor);

    auto out = resize_bilinear(db, static_cast<std::size_t>(out_size), static_cast<std::size_t>(out_size));
    const auto [lo_it, hi_it] = std::minmax_element(out.values.begin(), out.values.end());
    const double lo = *lo_it, range = *hi_it - *lo_it;
    for (auto& v : out.values) v = range > 0.0 ? std::clamp((v - lo) / range, 0.0, 1.0) : 0.0;
    return out;
}

Matrix compute_mel_spectrogram(std::span<const double> samples, const DspConfig& config) {
    const auto frames = frame_signal(samples, config.stft);
    const auto power = stft_power(frames, config.stft);
    const auto fb = mel_filterbank(config.stft.fft_size, config.mel.n_mels, config.mel.f_min, config.mel.f_max,
                                   config.sample_rate);
    return mel_spectrogram(power, fb, config.out_size, config.top_db);
}

void write_pgm(const std::filesystem::path& path, const Matrix& mel) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "P5\n" << mel.cols << ' ' << mel.rows << "\n255\n";
    std::string row(mel.cols, '\0');
    for (std::size_t r = mel.rows; r-- > 0;) {
        for (std::size_t c = 0; c < mel.cols; ++c)
            row[c] = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(mel(r, c), 0.0, 1.0))));
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace mvst::dsp
