#pragma once

// Training loop, evaluation and the spectrogram cache.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvst/audio_io.hpp"
#include "mvst/config.hpp"
#include "mvst/matrix.hpp"
#include "mvst/metrics.hpp"
#include "mvst/network.hpp"
#include "mvst/optim.hpp"

namespace mvst {

struct Sample {
    Matrix mel;
    int label = 0;
    std::string recording_id;
    int cycle_index = 0;
};

/// Worker count from MVST_THREADS (0 or unset = hardware concurrency).
int default_thread_count();

/// Loads every entry of `split` and computes its spectrogram, reading from
/// `cache_dir` when given. Output order follows the manifest.
std::vector<Sample> load_samples(const audio::DatasetManifest& manifest, audio::Split split,
                                 const dsp::DspConfig& dsp, const std::filesystem::path& cache_dir = {},
                                 int threads = 1);

// --- spectrogram cache ------------------------------------------------------

class CacheError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kCacheDigestFile = "dsp.digest";

/// Hex FNV-1a of the DSP config's canonical text.
std::string dsp_digest(const dsp::DspConfig& dsp);
std::filesystem::path cache_file(const std::filesystem::path& cache_dir, const audio::ManifestEntry& entry);

/// One file per cycle: "MVSC", u32 rows, u32 cols, u32 low digest bits,
/// then rows·cols little-endian doubles. Writes the digest file first.
void cache_spectrograms(const audio::DatasetManifest& manifest, const dsp::DspConfig& dsp,
                        const std::filesystem::path& cache_dir, int threads = 1);
void write_cached(const std::filesystem::path& path, const Matrix& mel, const dsp::DspConfig& dsp);
/// Throws CacheError when the file or the directory digest does not match `dsp`.
Matrix read_cached(const std::filesystem::path& path, const dsp::DspConfig& dsp);
/// Throws CacheError unless the directory's digest file matches `dsp`.
void check_cache_digest(const std::filesystem::path& cache_dir, const dsp::DspConfig& dsp);

// --- evaluation -------------------------------------------------------------

struct Evaluation {
    ConfusionMatrix confusion;
    std::vector<int> predictions;
    /// Absent when the split lacks normal or abnormal cycles.
    std::optional<Metrics> metrics;
};

/// Argmax per sample; no parameter updates, no tape use.
Evaluation evaluate(const Network& net, const std::vector<Sample>& samples, int threads = 1);

// --- training ---------------------------------------------------------------

/// Per-class loss weights. inverse_frequency gives w_c ∝ 1/count_c,
/// normalized to mean 1 over present classes.
std::vector<double> class_weights(ClassWeighting mode, const std::vector<Sample>& samples, int classes);

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<Metrics> val;
    std::optional<double> wall_seconds;
};

/// "epoch=3 lr=... loss=... train_acc=... [val_sp= val_se= val_as=] [wall_s=]"
std::string format_record(const EpochRecord& r);

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::string text() const;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainOptions {
    /// Final checkpoint path; the best-validation checkpoint goes to
    /// "<path>.best". Empty disables writing.
    std::filesystem::path checkpoint;
    /// Omits wall-clock fields so logs are byte-identical across runs.
    bool deterministic = true;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    Network net;
    AdamWState optimizer;
    TrainLog log;
    int best_epoch = 0;
    std::optional<double> best_as;
};

/// Adam-W over shuffled mini-batches. Each batch's loss is the class-weighted
/// mean cross-entropy; the last partial batch is kept. Throws TrainingError on
/// an empty train set or a non-finite loss.
TrainResult train_network(const RunConfig& config, const std::vector<Sample>& train, const std::vector<Sample>& val,
                          const TrainOptions& options = {});

}  // namespace mvst
