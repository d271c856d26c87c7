// mvst: command-line front end for data preparation, training and evaluation.
//
// Exit codes: 0 success, 1 operational failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvst/audio_io.hpp"
#include "mvst/checkpoint.hpp"
#include "mvst/config.hpp"
#include "mvst/dsp.hpp"
#include "mvst/gradcheck_suite.hpp"
#include "mvst/metrics.hpp"
#include "mvst/train.hpp"

namespace fs = std::filesystem;
using namespace mvst;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Flags shared by commands that need a run configuration.
struct ConfigFlags {
    std::string preset = "full";
    fs::path file;
    std::vector<std::string> sets;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--preset", preset, "Built-in defaults")->check(CLI::IsMember({"full", "desk"}));
        cmd.add_option("--config", file, "key=value run config file")->check(CLI::ExistingFile);
        cmd.add_option("--set", sets, "Override one key, e.g. --set train.epochs=5 (repeatable)");
    }

    RunConfig build() const {
        RunConfig c = default_config(preset == "desk" ? Preset::desk : Preset::full);
        if (!file.empty()) apply_config_text(c, read_text(file));
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
            apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
        }
        return c;
    }
};

int run_prepare(const fs::path& data_dir, const fs::path& out, const fs::path& split_file, double train_frac,
                std::uint64_t seed) {
    audio::ScanReport report;
    auto manifest = audio::scan_directory(data_dir, report);
    for (const auto& p : report.orphan_wavs) std::cerr << "warning: WAV without annotations: " << p.string() << '\n';
    for (const auto& p : report.orphan_annotations)
        std::cerr << "warning: annotations without WAV: " << p.string() << '\n';
    if (report.skipped_cycles > 0)
        std::cerr << "warning: " << report.skipped_cycles << " cycles outside their recordings were skipped\n";
    if (manifest.entries.empty()) throw std::runtime_error("no cycles found in " + data_dir.string());
    manifest = split_file.empty() ? audio::split_dataset(std::move(manifest), train_frac, seed)
                                  : audio::apply_split_file(std::move(manifest), read_text(split_file));
    audio::write_manifest(out, manifest);
    std::cout << "wrote " << manifest.entries.size() << " cycles (" << manifest.select(audio::Split::train).size()
              << " train, " << manifest.select(audio::Split::test).size() << " test) to " << out.string() << '\n';
    return kOk;
}

int run_train(const RunConfig& config, const fs::path& manifest_path, const fs::path& out, fs::path log_path,
              const fs::path& cache_dir, bool deterministic) {
    const auto manifest = audio::read_manifest(manifest_path);
    const int threads = deterministic ? 1 : default_thread_count();
    const auto train = load_samples(manifest, audio::Split::train, config.dsp, cache_dir, threads);
    const auto val = load_samples(manifest, audio::Split::test, config.dsp, cache_dir, threads);
    if (log_path.empty()) log_path = fs::path(out.string() + ".log");
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + log_path.string());

    TrainOptions options;
    options.checkpoint = out;
    options.deterministic = deterministic;
    options.on_epoch = [&](const EpochRecord& r) {
        const auto line = format_record(r);
        log << line << '\n' << std::flush;
        std::cout << line << '\n' << std::flush;
    };
    const auto result = train_network(config, train, val, options);
    std::cout << "checkpoint: " << out.string() << '\n';
    if (result.best_as) std::printf("best validation AS %.2f%% at epoch %d\n", 100.0 * *result.best_as, result.best_epoch);
    return kOk;
}

int run_eval(const fs::path& checkpoint, const fs::path& manifest_path, const std::string& split,
             const fs::path& cache_dir) {
    const auto data = load_checkpoint(checkpoint);
    const auto net = network_from_checkpoint(data);
    const auto manifest = audio::read_manifest(manifest_path);
    const auto samples = load_samples(manifest, split == "train" ? audio::Split::train : audio::Split::test,
                                      data.config.dsp, cache_dir, default_thread_count());
    if (samples.empty()) throw std::runtime_error("split '" + split + "' is empty");
    const auto ev = evaluate(net, samples, default_thread_count());
    std::printf("cycles %lld accuracy %.2f%%\n", static_cast<long long>(ev.confusion.total()),
                100.0 * ev.confusion.accuracy());
    if (!ev.metrics) throw std::runtime_error("split needs both normal and abnormal cycles for SP/SE");
    std::cout << format_percent(*ev.metrics) << '\n';
    std::printf("confusion (rows true, cols predicted: normal crackle wheeze both)\n");
    for (const auto& row : ev.confusion.counts)
        std::printf("  %6lld %6lld %6lld %6lld\n", static_cast<long long>(row[0]), static_cast<long long>(row[1]),
                    static_cast<long long>(row[2]), static_cast<long long>(row[3]));
    return kOk;
}

int run_gradcheck(std::uint64_t seed, int seeds) {
    bool ok = true;
    for (const auto& e : run_op_suite(seed, seeds)) {
        std::printf("%-26s seeds=%d checked=%-5zu max_rel_err=%.3e %s\n", e.op.c_str(), e.seeds, e.checked,
                    e.max_rel_error, e.passed() ? "ok" : "FAIL");
        ok = ok && e.passed();
    }
    const auto e2e = run_end_to_end_check(seed);
    std::printf("%-26s seeds=%d checked=%-5zu max_rel_err=%.3e %s\n", e2e.op.c_str(), e2e.seeds, e2e.checked,
                e2e.max_rel_error, e2e.passed() ? "ok" : "FAIL");
    return ok && e2e.passed() ? kOk : kFailure;
}

int run_export(const RunConfig& config, const fs::path& wav, int cycle_index, const std::string& prefix) {
    audio::ManifestEntry entry{wav.stem().string(), cycle_index, audio::ClassLabel::Normal, audio::Split::train, wav};
    const auto cycle = audio::load_cycle(entry, config.dsp.sample_rate, config.dsp.cycle_seconds);
    const auto mel = dsp::compute_mel_spectrogram(cycle.clip.samples, config.dsp);
    const fs::path out = prefix + "_cycle" + std::to_string(cycle_index) + ".pgm";
    dsp::write_pgm(out, mel);
    std::cout << "wrote " << out.string() << " (" << mel.cols << 'x' << mel.rows << ")\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lung sound cycle classifier: data prep, training, evaluation and checks"};
    app.require_subcommand(1);

    auto* prepare = app.add_subcommand("prepare", "Scan WAV/annotation pairs and write a split manifest");
    fs::path data_dir, manifest_out, split_file;
    double train_frac = 0.6;
    std::uint64_t prepare_seed = 0;
    prepare->add_option("--data-dir", data_dir, "Directory of <id>.wav + <id>.txt pairs")->required();
    prepare->add_option("--out", manifest_out, "Manifest to write")->required();
    prepare->add_option("--split-file", split_file, "Explicit 'recording_id train|test' rows")->check(CLI::ExistingFile);
    prepare->add_option("--train-frac", train_frac, "Recording-level train fraction")->capture_default_str();
    prepare->add_option("--seed", prepare_seed, "Split seed")->capture_default_str();

    auto* synth = app.add_subcommand("synth", "Write a synthetic four-class dataset");
    fs::path synth_out;
    int per_class = 10;
    std::uint64_t synth_seed = 0;
    audio::SynthOptions synth_options;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--per-class", per_class, "Recordings per class")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
    synth->add_option("--train-frac", synth_options.train_fraction, "Recording-level train fraction")
        ->capture_default_str();

    auto* cache = app.add_subcommand("cache", "Precompute mel spectrograms for a manifest");
    ConfigFlags cache_cfg;
    fs::path cache_manifest, cache_out;
    cache->add_option("--manifest", cache_manifest, "Manifest file")->required()->check(CLI::ExistingFile);
    cache->add_option("--out", cache_out, "Cache directory")->required();
    cache_cfg.add_to(*cache);

    auto* train = app.add_subcommand("train", "Train a model and write checkpoints plus a TrainLog");
    ConfigFlags train_cfg;
    fs::path train_manifest, train_out, train_log, train_cache;
    bool deterministic = false;
    std::optional<int> epochs, batch_size;
    std::optional<double> lr;
    std::optional<std::uint64_t> train_seed;
    train->add_option("--manifest", train_manifest, "Manifest file")->required()->check(CLI::ExistingFile);
    train->add_option("--out", train_out, "Checkpoint path; the best one goes to <out>.best")->required();
    train->add_option("--log", train_log, "TrainLog path (default <out>.log)");
    train->add_option("--cache", train_cache, "Spectrogram cache directory");
    train->add_option("--epochs", epochs, "Overrides train.epochs");
    train->add_option("--batch-size", batch_size, "Overrides train.batch_size");
    train->add_option("--lr", lr, "Overrides train.lr");
    train->add_option("--seed", train_seed, "Overrides train.seed");
    train->add_flag("--deterministic", deterministic, "Single worker and no wall-clock fields");
    train_cfg.add_to(*train);

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and print SP/SE/AS");
    fs::path eval_ckpt, eval_manifest, eval_cache;
    std::string eval_split = "test";
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--manifest", eval_manifest, "Manifest file")->required()->check(CLI::ExistingFile);
    eval->add_option("--split", eval_split, "Split to score")->check(CLI::IsMember({"train", "test"}))
        ->capture_default_str();
    eval->add_option("--cache", eval_cache, "Spectrogram cache directory");
    bool eval_deterministic = false;
    eval->add_flag("--deterministic", eval_deterministic, "Accepted for symmetry; evaluation is always deterministic");

    auto* gradcheck = app.add_subcommand("gradcheck", "Run the finite-difference gradient suites");
    std::string scale = "tiny";
    std::uint64_t gc_seed = 0;
    int gc_seeds = 5;
    gradcheck->add_option("--scale", scale, "Problem size")->check(CLI::IsMember({"tiny"}))->capture_default_str();
    gradcheck->add_option("--seed", gc_seed, "Base seed")->capture_default_str();
    gradcheck->add_option("--seeds", gc_seeds, "Random problems per op")->check(CLI::PositiveNumber)
        ->capture_default_str();

    auto* export_spec = app.add_subcommand("export-spec", "Write one cycle's mel spectrogram as an 8-bit PGM");
    ConfigFlags export_cfg;
    fs::path export_wav;
    int cycle_index = 0;
    std::string export_prefix;
    export_spec->add_option("--wav", export_wav, "Recording; annotations are read from <stem>.txt")
        ->required()
        ->check(CLI::ExistingFile);
    export_spec->add_option("--cycle-index", cycle_index, "Annotation row")->required();
    export_spec->add_option("--out", export_prefix, "Output prefix")->required();
    export_cfg.add_to(*export_spec);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*prepare) return run_prepare(data_dir, manifest_out, split_file, train_frac, prepare_seed);
        if (*synth) {
            const auto m = audio::synth_dataset(per_class, synth_seed, synth_out, synth_options);
            std::cout << "wrote " << m.entries.size() << " recordings to " << synth_out.string() << '\n';
            return kOk;
        }
        if (*cache) {
            auto c = cache_cfg.build();
            c.finalize();
            cache_spectrograms(audio::read_manifest(cache_manifest), c.dsp, cache_out, default_thread_count());
            std::cout << "cached spectrograms in " << cache_out.string() << " (digest " << dsp_digest(c.dsp) << ")\n";
            return kOk;
        }
        if (*train) {
            auto c = train_cfg.build();
            if (epochs) c.train.epochs = *epochs;
            if (batch_size) c.train.batch_size = *batch_size;
            if (lr) c.train.lr = *lr;
            if (train_seed) c.train.seed = *train_seed;
            c.finalize();
            return run_train(c, train_manifest, train_out, train_log, train_cache, deterministic);
        }
        if (*eval) return run_eval(eval_ckpt, eval_manifest, eval_split, eval_cache);
        if (*gradcheck) return run_gradcheck(gc_seed, gc_seeds);
        if (*export_spec) {
            auto c = export_cfg.build();
            c.finalize();
            return run_export(c, export_wav, cycle_index, export_prefix);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}
