#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvst/matrix.hpp"

namespace mvst::dsp {

enum class Window { hann, rectangular };

struct StftConfig {
    int win_length = 256;
    int hop_length = 64;
    int fft_size = 256;
    Window window = Window::hann;

    /// hop ≤ win ≤ fft_size, fft_size a power of two.
    void validate() const;
};

struct MelConfig {
    int n_mels = 128;
    double f_min = 50.0;
    double f_max = 2000.0;
};

/// Everything that determines the spectrogram of a cycle.
struct DspConfig {
    int sample_rate = 4000;
    double cycle_seconds = 8.0;
    StftConfig stft;
    MelConfig mel;
    /// Side of the square output image.
    int out_size = 256;
    double top_db = 80.0;

    /// Stable text form; cache digests are computed over it.
    std::string canonical() const;
};

struct MelFilterbank {
    Matrix weights;  // n_mels × (fft_size/2 + 1)
    std::vector<double> center_freqs;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// M × win matrix; frame i starts at i·hop, M = ⌊(len − win)/hop⌋ + 1.
Matrix frame_signal(std::span<const double> samples, const StftConfig& config);

/// |DFT|² of each windowed, zero-padded frame for bins 0..fft_size/2.
Matrix stft_power(const Matrix& frames, const StftConfig& config);

/// Triangular filters between n_mels+2 points equally spaced in mel.
MelFilterbank mel_filterbank(int fft_size, int n_mels, double f_min, double f_max, int sample_rate);

/// Mel projection, 10·log10(p + 1e-10), clamp at max − top_db, bilinear
/// resize to out_size², min-max normalisation to [0, 1]. Row 0 is the lowest
/// mel band; columns are time.
Matrix mel_spectrogram(const Matrix& power, const MelFilterbank& filterbank, int out_size = 256,
                       double top_db = 80.0);

/// Corner-aligned bilinear interpolation.
Matrix resize_bilinear(const Matrix& input, std::size_t out_rows, std::size_t out_cols);

/// Full chain for one fixed-duration cycle at config.sample_rate.
Matrix compute_mel_spectrogram(std::span<const double> samples, const DspConfig& config);

/// 8-bit binary PGM, highest frequency on top, value round(255·mel).
void write_pgm(const std::filesystem::path& path, const Matrix& mel);

}  // namespace mvst::dsp
