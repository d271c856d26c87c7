#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mvst::audio {

/// Common working rate of the pipeline.
inline constexpr int kDefaultSampleRate = 4000;
/// Fixed breathing-cycle duration fed to the front-end.
inline constexpr double kDefaultCycleSeconds = 8.0;

struct AudioClip {
    std::vector<double> samples;
    int sample_rate = 0;

    double duration() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

struct CycleAnnotation {
    double start_s = 0.0;
    double end_s = 0.0;
    bool crackle = false;
    bool wheeze = false;
};

enum class ClassLabel : int { Normal = 0, Crackle = 1, Wheeze = 2, Both = 3 };
inline constexpr int kNumClasses = 4;

ClassLabel label_from_flags(bool crackle, bool wheeze) noexcept;
std::pair<bool, bool> flags_from_label(ClassLabel label) noexcept;
std::string_view label_name(ClassLabel label) noexcept;
/// Accepts a name ("normal", "crackle", "wheeze", "both") or digit 0..3.
ClassLabel parse_label(std::string_view text);

struct LabeledCycle {
    AudioClip clip;
    ClassLabel label = ClassLabel::Normal;
    std::string recording_id;
    int cycle_index = 0;
};

enum class Split { train, test };
std::string_view split_name(Split s) noexcept;

struct ManifestEntry {
    std::string recording_id;
    int cycle_index = 0;
    ClassLabel label = ClassLabel::Normal;
    Split split = Split::train;
    std::filesystem::path path;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    /// Throws std::invalid_argument on duplicate (recording, cycle) keys or a
    /// recording assigned to both splits.
    void validate() const;
    std::vector<ManifestEntry> select(Split s) const;
    /// Distinct recording ids, sorted.
    std::vector<std::string> recordings() const;
};

// --- WAV -------------------------------------------------------------------

enum class WavErrc { open_failed, malformed_header, unsupported_format, no_samples, non_finite };

class WavError : public std::runtime_error {
public:
    WavError(WavErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    WavErrc code() const noexcept { return code_; }

private:
    WavErrc code_;
};

/// PCM16 or float32 RIFF/WAVE, any channel count; channels are averaged to
/// mono and PCM is scaled by 1/32768.
AudioClip read_wav(const std::filesystem::path& path);

/// 16-bit mono PCM. Samples are clipped to the representable range.
void write_wav_pcm16(const std::filesystem::path& path, const AudioClip& clip);

// --- annotations and cycles ------------------------------------------------

class AnnotationError : public std::runtime_error {
public:
    AnnotationError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Rows of "start end crackle wheeze"; blank lines are ignored.
std::vector<CycleAnnotation> parse_annotations(std::string_view text);
std::vector<CycleAnnotation> read_annotations(const std::filesystem::path& path);

struct SliceResult {
    std::vector<LabeledCycle> cycles;
    /// Annotations lying entirely outside the clip.
    int skipped = 0;
};

/// cycle_index is the annotation's row number, so skipped rows leave gaps.
SliceResult slice_cycles(const AudioClip& clip, const std::vector<CycleAnnotation>& annotations,
                         const std::string& recording_id = {});

/// Linear interpolation at input positions j·source/target; output length
/// round(len·target/source).
AudioClip resample(const AudioClip& clip, int target_rate);

/// Center-crop or repeat-pad to round(seconds·rate) samples.
LabeledCycle fix_duration(LabeledCycle cycle, double seconds);

/// Reads the entry's WAV and its companion annotation file (same stem,
/// ".txt"), then slices, resamples and fixes the duration of one cycle.
LabeledCycle load_cycle(const ManifestEntry& entry, int target_rate = kDefaultSampleRate,
                        double seconds = kDefaultCycleSeconds);

// --- manifests -------------------------------------------------------------

/// Recording-level random split; n_train = round(fraction·recordings),
/// kept within [1, recordings−1].
DatasetManifest split_dataset(DatasetManifest manifest, double train_fraction, std::uint64_t seed);

/// Applies "recording_id train|test" rows verbatim. Every recording in the
/// manifest must be listed.
DatasetManifest apply_split_file(DatasetManifest manifest, std::string_view split_text);

/// Tab-separated: recording_id, cycle_index, label, split, path. Relative
/// paths are written and resolved against the manifest's directory.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

struct ScanReport {
    std::vector<std::filesystem::path> orphan_wavs;
    std::vector<std::filesystem::path> orphan_annotations;
    int skipped_cycles = 0;
};

/// Pairs every <stem>.wav with <stem>.txt in `dir` and lists their cycles.
/// All entries start in the train split.
DatasetManifest scan_directory(const std::filesystem::path& dir, ScanReport& report);

// --- synthetic data --------------------------------------------------------

struct SynthOptions {
    int sample_rate = kDefaultSampleRate;
    double min_cycle_s = 6.0;
    double max_cycle_s = 10.0;
    double train_fraction = 0.6;
};

/// Writes one single-cycle recording per (class, index) with a companion
/// annotation file and `manifest.tsv`. Deterministic for a given seed.
///   Normal: band-limited noise
///   Crackle: noise plus random trains of decaying impulses
///   Wheeze: noise plus a sustained tone in 200-800 Hz
///   Both: noise, impulses and tone
DatasetManifest synth_dataset(int n_per_class, std::uint64_t seed, const std::filesystem::path& out_dir,
                              const SynthOptions& options = {});

}  // namespace mvst::audio
