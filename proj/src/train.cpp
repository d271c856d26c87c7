#include "mvst/train.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "mvst/checkpoint.hpp"
#include "mvst/hash.hpp"
#include "mvst/rng.hpp"

namespace mvst {

namespace fs = std::filesystem;

int default_thread_count() {
    int n = 0;
    if (const char* env = std::getenv("MVST_THREADS")) n = std::atoi(env);
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, n);
}

namespace {

/// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first
/// failure. Results must be written to per-index slots.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
    const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

constexpr char kCacheMagic[4] = {'M', 'V', 'S', 'C'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

Matrix compute_sample(const audio::ManifestEntry& entry, const dsp::DspConfig& dsp) {
    const auto cycle = audio::load_cycle(entry, dsp.sample_rate, dsp.cycle_seconds);
    return dsp::compute_mel_spectrogram(cycle.clip.samples, dsp);
}

int argmax(std::span<const double> v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

// --- cache -----------------------------------------------------------------

std::string dsp_digest(const dsp::DspConfig& dsp) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(dsp.canonical())));
    return buf;
}

fs::path cache_file(const fs::path& cache_dir, const audio::ManifestEntry& entry) {
    return cache_dir / (entry.recording_id + "_c" + std::to_string(entry.cycle_index) + ".mel");
}

void check_cache_digest(const fs::path& cache_dir, const dsp::DspConfig& dsp) {
    std::ifstream in(cache_dir / kCacheDigestFile);
    if (!in) throw CacheError("no cache digest in " + cache_dir.string());
    std::string stored;
    in >> stored;
    if (stored != dsp_digest(dsp))
        throw CacheError("stale cache in " + cache_dir.string() + ": built for digest " + stored + ", need " +
                         dsp_digest(dsp));
}

void write_cached(const fs::path& path, const Matrix& mel, const dsp::DspConfig& dsp) {
    std::string bytes(kCacheMagic, 4);
    put_u32(bytes, static_cast<std::uint32_t>(mel.rows));
    put_u32(bytes, static_cast<std::uint32_t>(mel.cols));
    put_u32(bytes, static_cast<std::uint32_t>(fnv1a(dsp.canonical())));
    bytes.reserve(16 + mel.values.size() * 8);
    for (double v : mel.values) {
        const auto u = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CacheError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CacheError("write failed for " + path.string());
}

Matrix read_cached(const fs::path& path, const dsp::DspConfig& dsp) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CacheError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto bytes = ss.str();
    if (bytes.size() < 16 || bytes.compare(0, 4, kCacheMagic, 4) != 0)
        throw CacheError(path.string() + " is not a spectrogram cache file");
    const auto rows = get_u32(bytes.data() + 4), cols = get_u32(bytes.data() + 8);
    if (get_u32(bytes.data() + 12) != static_cast<std::uint32_t>(fnv1a(dsp.canonical())))
        throw CacheError("stale cache file " + path.string());
    if (rows != static_cast<std::uint32_t>(dsp.out_size) || cols != rows)
        throw CacheError("cache file " + path.string() + " has unexpected shape");
    const std::size_t count = std::size_t{rows} * cols;
    if (bytes.size() != 16 + count * 8) throw CacheError("cache file " + path.string() + " has the wrong length");
    Matrix mel(rows, cols);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t u = 0;
        for (int b = 0; b < 8; ++b)
            u |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[16 + i * 8 + b])) << (8 * b);
        mel.values[i] = std::bit_cast<double>(u);
    }
    return mel;
}

void cache_spectrograms(const audio::DatasetManifest& manifest, const dsp::DspConfig& dsp, const fs::path& cache_dir,
                        int threads) {
    fs::create_directories(cache_dir);
    {
        std::ofstream out(cache_dir / kCacheDigestFile, std::ios::trunc);
        if (!out) throw CacheError("cannot write digest in " + cache_dir.string());
        out << dsp_digest(dsp) << '\n';
    }
    parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
        const auto& e = manifest.entries[i];
        write_cached(cache_file(cache_dir, e), compute_sample(e, dsp), dsp);
    });
}

std::vector<Sample> load_samples(const audio::DatasetManifest& manifest, audio::Split split,
                                 const dsp::DspConfig& dsp, const fs::path& cache_dir, int threads) {
    const auto entries = manifest.select(split);
    if (!cache_dir.empty()) check_cache_digest(cache_dir, dsp);
    std::vector<Sample> out(entries.size());
    parallel_for(entries.size(), threads, [&](std::size_t i) {
        const auto& e = entries[i];
        auto& s = out[i];
        s.label = static_cast<int>(e.label);
        s.recording_id = e.recording_id;
        s.cycle_index = e.cycle_index;
        if (!cache_dir.empty()) {
            const auto file = cache_file(cache_dir, e);
            if (fs::exists(file)) {
                s.mel = read_cached(file, dsp);
                return;
            }
            s.mel = compute_sample(e, dsp);
            write_cached(file, s.mel, dsp);
            return;
        }
        s.mel = compute_sample(e, dsp);
    });
    return out;
}

// --- evaluation ------------------------------------------------------------

Evaluation evaluate(const Network& net, const std::vector<Sample>& samples, int threads) {
    Evaluation ev;
    ev.predictions.resize(samples.size());
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        NoGradGuard guard;
        ev.predictions[i] = argmax(net.forward(samples[i].mel).data());
    });
    for (std::size_t i = 0; i < samples.size(); ++i) ev.confusion.add(samples[i].label, ev.predictions[i]);
    try {
        ev.metrics = compute_metrics(ev.confusion);
    } catch (const std::domain_error&) {
        ev.metrics.reset();
    }
    return ev;
}

// --- training --------------------------------------------------------------

std::vector<double> class_weights(ClassWeighting mode, const std::vector<Sample>& samples, int classes) {
    std::vector<double> w(static_cast<std::size_t>(classes), 1.0);
    if (mode == ClassWeighting::uniform) return w;
    std::vector<double> counts(w.size(), 0.0);
    for (const auto& s : samples) counts.at(static_cast<std::size_t>(s.label)) += 1.0;
    double total = 0.0;
    int present = 0;
    for (std::size_t c = 0; c < w.size(); ++c) {
        w[c] = counts[c] > 0.0 ? 1.0 / counts[c] : 0.0;
        total += w[c];
        present += counts[c] > 0.0;
    }
    for (auto& x : w) x *= present / total;
    return w;
}

std::string format_record(const EpochRecord& r) {
    char buf[256];
    int n = std::snprintf(buf, sizeof buf, "epoch=%d lr=%.9g loss=%.9g train_acc=%.6f", r.epoch, r.lr, r.loss,
                          r.train_accuracy);
    std::string line(buf, static_cast<std::size_t>(n));
    if (r.val) {
        n = std::snprintf(buf, sizeof buf, " val_sp=%.6f val_se=%.6f val_as=%.6f", r.val->sp(), r.val->se(),
                          r.val->as_score());
        line.append(buf, static_cast<std::size_t>(n));
    }
    if (r.wall_seconds) {
        n = std::snprintf(buf, sizeof buf, " wall_s=%.3f", *r.wall_seconds);
        line.append(buf, static_cast<std::size_t>(n));
    }
    return line;
}

std::string TrainLog::text() const {
    std::string out;
    for (const auto& r : epochs) out += format_record(r) + "\n";
    return out;
}

TrainResult train_network(const RunConfig& input_config, const std::vector<Sample>& train,
                          const std::vector<Sample>& val, const TrainOptions& options) {
    RunConfig config = input_config;
    config.finalize();
    const auto& tc = config.train;
    if (train.empty()) throw TrainingError("train split is empty");
    const auto n = static_cast<std::size_t>(config.net.model.n);
    for (const auto& s : train)
        if (s.mel.rows != n || s.mel.cols != n) throw TrainingError("train sample does not match the model's side");

    TrainResult result{Network(config.net, tc.seed), {}, {}, 0, std::nullopt};
    auto& net = result.net;
    auto params = net.parameters();
    auto& opt = result.optimizer;
    opt.lr = tc.lr;
    opt.weight_decay = tc.weight_decay;
    opt.init(params);

    const auto weights = class_weights(tc.class_weights, train, config.net.classes);
    const Rng root(tc.seed);
    const Rng shuffle_root = root.split(fnv1a("shuffle"));
    Rng dropout_rng = root.split(fnv1a("dropout"));
    Rng* dropout_ptr = config.net.model.dropout > 0.0 ? &dropout_rng : nullptr;

    const auto batch = static_cast<std::size_t>(tc.batch_size);
    const std::size_t steps_per_epoch = (train.size() + batch - 1) / batch;
    const std::uint64_t total_steps = steps_per_epoch * static_cast<std::uint64_t>(tc.epochs);
    const fs::path best_path = options.checkpoint.empty() ? fs::path{} : fs::path(options.checkpoint.string() + ".best");

    std::vector<std::size_t> order(train.size());
    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = shuffle_root.split(static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        double lr = tc.lr;
        for (std::size_t b = 0; b < steps_per_epoch; ++b) {
            const std::size_t lo = b * batch, hi = std::min(train.size(), lo + batch);
            double denom = 0.0;
            for (std::size_t k = lo; k < hi; ++k) denom += weights[static_cast<std::size_t>(train[order[k]].label)];
            if (denom <= 0.0) continue;

            net.zero_grad();
            double batch_loss = 0.0;
            for (std::size_t k = lo; k < hi; ++k) {
                const auto& s = train[order[k]];
                const int label = s.label;
                try {
                    const auto logits = net.forward(s.mel, dropout_ptr);
                    correct += argmax(logits.data()) == label;
                    const auto ce = cross_entropy(logits, std::span<const int>(&label, 1));
                    const double w = weights[static_cast<std::size_t>(label)] / denom;
                    batch_loss += w * ce.item();
                    backward(scale(ce, w));
                } catch (const NonFiniteError& e) {
                    clear_tape();
                    throw TrainingError("non-finite value at epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(b) + ", sample " + s.recording_id + "/" +
                                        std::to_string(s.cycle_index) + ": " + e.what());
                }
            }
            if (!std::isfinite(batch_loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(b));
            lr = scheduled_lr(tc.lr_schedule, tc.lr, opt.step, total_steps);
            opt.lr = lr;
            adamw_step(params, opt);
            loss_sum += batch_loss * static_cast<double>(hi - lo);
        }
        net.zero_grad();

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.loss = loss_sum / static_cast<double>(train.size());
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
        if (tc.val_every > 0 && epoch % tc.val_every == 0 && !val.empty()) {
            rec.val = evaluate(net, val).metrics;
            if (rec.val && (!result.best_as || rec.val->as_score() > *result.best_as)) {
                result.best_as = rec.val->as_score();
                result.best_epoch = epoch;
                if (!best_path.empty())
                    save_checkpoint(best_path, config, tc.seed, net, opt,
                                    Rng::from_state(shuffle_root.key(), static_cast<std::uint64_t>(epoch)), epoch);
            }
        }
        if (!options.deterministic)
            rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.log.epochs.push_back(rec);
        if (options.on_epoch) options.on_epoch(rec);
    }
    if (!options.checkpoint.empty())
        save_checkpoint(options.checkpoint, config, tc.seed, net, opt,
                        Rng::from_state(shuffle_root.key(), static_cast<std::uint64_t>(tc.epochs)), tc.epochs);
    return result;
}

}  // namespace mvst
