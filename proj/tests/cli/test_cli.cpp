#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "mvst/audio_io.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out, err;
};

Result cli(const std::string& args) {
    static int counter = 0;
    const auto dir = fs::current_path() / "scratch_cli_io";
    fs::create_directories(dir);
    const auto out = dir / ("out" + std::to_string(counter) + ".txt");
    const auto err = dir / ("err" + std::to_string(counter++) + ".txt");
    const std::string cmd = std::string(MVST_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, oracle::read_bytes(out), oracle::read_bytes(err)};
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

/// Eight synthetic recordings; index 0 trains, index 1 is held out, so both
/// splits hold one cycle of every class.
fs::path small_dataset(const std::string& name) {
    const auto dir = oracle::scratch_dir(name);
    REQUIRE(cli("synth --out " + q(dir / "wav") + " --per-class 2 --seed 3").code == 0);
    std::ofstream split(dir / "split.txt");
    for (const char* label : {"normal", "crackle", "wheeze", "both"}) {
        split << "synth_0000_" << label << " train\n";
        split << "synth_0001_" << label << " test\n";
    }
    split.close();
    REQUIRE(cli("prepare --data-dir " + q(dir / "wav") + " --out " + q(dir / "m.tsv") + " --split-file " +
                q(dir / "split.txt"))
                .code == 0);
    return dir;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(cli("").code == 2);
    CHECK(cli("frobnicate").code == 2);
    CHECK(cli("gradcheck --bogus").code == 2);
    const auto missing = cli("train --out x.bin");
    CHECK(missing.code == 2);
    CHECK(missing.err.find("--manifest") != std::string::npos);
    CHECK(cli("eval --manifest nowhere.tsv").code == 2);
    CHECK(cli("gradcheck --scale huge").code == 2);
    CHECK(cli("synth").code == 2);
    CHECK(cli("cache --manifest nowhere.tsv").code == 2);
    CHECK(cli("export-spec --wav nowhere.wav").code == 2);
    CHECK(cli("prepare --out m.tsv").code == 2);
    CHECK(cli("--help").code == 0);
}

TEST_CASE("operational failures exit 1") {
    const auto empty = oracle::scratch_dir("cli_empty");
    CHECK(cli("prepare --data-dir " + q(empty) + " --out " + q(empty / "m.tsv")).code == 1);
    CHECK(cli("synth --out " + q(empty / "s") + " --per-class 0").code == 1);
}

TEST_CASE("train, eval and cache on a tiny synthetic manifest") {
    const auto dir = small_dataset("cli_train");
    const auto manifest = dir / "m.tsv";

    const auto cached = cli("cache --preset desk --manifest " + q(manifest) + " --out " + q(dir / "cache"));
    CHECK(cached.code == 0);
    CHECK(fs::exists(dir / "cache" / "dsp.digest"));

    const auto trained = cli("train --preset desk --manifest " + q(manifest) + " --cache " + q(dir / "cache") +
                             " --epochs 1 --batch-size 2 --out " + q(dir / "c.bin"));
    REQUIRE(trained.code == 0);
    CHECK(fs::file_size(dir / "c.bin") > 0);
    const auto log = oracle::read_bytes(dir / "c.bin.log");
    CHECK(log.starts_with("epoch=1 "));
    CHECK(std::count(log.begin(), log.end(), '\n') == 1);
    CHECK(trained.out.find("epoch=1 ") != std::string::npos);

    const auto eval = cli("eval --checkpoint " + q(dir / "c.bin") + " --manifest " + q(manifest));
    REQUIRE(eval.code == 0);
    CHECK(std::regex_search(eval.out, std::regex(R"(cycles 4 accuracy \d+\.\d\d%)")));
    CHECK(std::regex_search(eval.out, std::regex(R"(SP \d+\.\d\d% SE \d+\.\d\d% AS \d+\.\d\d%)")));
    const auto again = cli("eval --checkpoint " + q(dir / "c.bin") + " --manifest " + q(manifest) + " --deterministic");
    CHECK(again.out == eval.out);

    // a cache built for another DSP configuration is rejected
    const auto stale = cli("train --preset desk --set dsp.hop_length=32 --manifest " + q(manifest) + " --cache " +
                           q(dir / "cache") + " --epochs 1 --out " + q(dir / "d.bin"));
    CHECK(stale.code == 1);

    // a corrupt checkpoint is an operational failure
    std::ofstream(dir / "junk.bin") << "MVST not really";
    CHECK(cli("eval --checkpoint " + q(dir / "junk.bin") + " --manifest " + q(manifest)).code == 1);
}

TEST_CASE("deterministic training is byte-reproducible") {
    const auto dir = small_dataset("cli_determinism");
    for (const char* tag : {"a", "b"})
        REQUIRE(cli("train --deterministic --preset desk --manifest " + q(dir / "m.tsv") +
                    " --epochs 2 --batch-size 3 --seed 9 --out " + q(dir / (std::string(tag) + ".bin")))
                    .code == 0);
    CHECK(oracle::read_bytes(dir / "a.bin") == oracle::read_bytes(dir / "b.bin"));
    CHECK(oracle::read_bytes(dir / "a.bin.log") == oracle::read_bytes(dir / "b.bin.log"));
    CHECK(oracle::read_bytes(dir / "a.bin.log").find("wall_s") == std::string::npos);
}

TEST_CASE("config files and overrides") {
    const auto dir = small_dataset("cli_config");
    std::ofstream(dir / "bad.cfg") << "[train]\n# comment\nlr=abc\n";
    const auto bad = cli("train --config " + q(dir / "bad.cfg") + " --manifest " + q(dir / "m.tsv") + " --out " +
                         q(dir / "x.bin"));
    CHECK(bad.code == 2);
    CHECK(bad.err.find("config line 3") != std::string::npos);
    CHECK(cli("train --set train.nonsense=1 --manifest " + q(dir / "m.tsv") + " --out " + q(dir / "x.bin")).code == 2);
    CHECK(cli("train --set novalue --manifest " + q(dir / "m.tsv") + " --out " + q(dir / "x.bin")).code == 2);

    // file sets epochs=2, the flag wins with 1
    std::ofstream(dir / "ok.cfg") << "[train]\nepochs=2\nbatch_size=4\n[model]\nd_t=32\nheads=2\n";
    REQUIRE(cli("train --preset desk --config " + q(dir / "ok.cfg") + " --epochs 1 --manifest " + q(dir / "m.tsv") +
                " --out " + q(dir / "y.bin"))
                .code == 0);
    const auto log = oracle::read_bytes(dir / "y.bin.log");
    CHECK(std::count(log.begin(), log.end(), '\n') == 1);
}

TEST_CASE("prepare splits by recording") {
    const auto dir = oracle::scratch_dir("cli_prepare");
    for (int r = 0; r < 10; ++r) {
        const auto id = "rec" + std::to_string(r);
        oracle::write_wav(dir / (id + ".wav"), std::vector<double>(4000 * 4, 0.01), 1, 4000, 1);
        std::ofstream(dir / (id + ".txt")) << "0 2 0 0\n2 4 1 0\n";
    }
    REQUIRE(cli("prepare --data-dir " + q(dir) + " --out " + q(dir / "m.tsv") + " --train-frac 0.6 --seed 1").code == 0);
    const auto m = mvst::audio::read_manifest(dir / "m.tsv");
    CHECK(m.entries.size() == 20);
    std::map<std::string, mvst::audio::Split> split;
    for (const auto& e : m.entries) split[e.recording_id] = e.split;
    int train = 0;
    for (const auto& [id, s] : split) train += s == mvst::audio::Split::train;
    CHECK(train == 6);

    std::ofstream file(dir / "split.list");
    for (int r = 0; r < 10; ++r) file << "rec" << r << (r < 3 ? " train\n" : " test\n");
    file.close();
    for (const char* seed : {"1", "2"}) {
        REQUIRE(cli("prepare --data-dir " + q(dir) + " --out " + q(dir / "f.tsv") + " --seed " + seed +
                    " --split-file " + q(dir / "split.list"))
                    .code == 0);
        for (const auto& e : mvst::audio::read_manifest(dir / "f.tsv").entries)
            CHECK((e.split == mvst::audio::Split::train) == (e.recording_id < std::string("rec3")));
    }

    std::ofstream(dir / "orphan.txt") << "0 1 0 0\n";
    const auto warned = cli("prepare --data-dir " + q(dir) + " --out " + q(dir / "g.tsv"));
    CHECK(warned.code == 0);
    CHECK(warned.err.find("orphan") != std::string::npos);
}

TEST_CASE("gradcheck lists every op once and passes") {
    const auto r = cli("gradcheck --seed 3");
    CHECK(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::set<std::string> ops;
    int count = 0;
    while (std::getline(lines, line)) {
        std::istringstream words(line);
        std::string op;
        words >> op;
        ops.insert(op);
        ++count;
        CHECK(line.ends_with(" ok"));
    }
    CHECK(ops.size() == static_cast<std::size_t>(count));
    for (const char* op : {"matmul", "layer_norm", "softmax_rows", "gelu", "sigmoid", "hadamard", "mean_pool_rows",
                           "cross_entropy", "msa", "encoder_block", "fuse", "classify", "end_to_end_tiny_mvst"})
        CHECK(ops.count(op) == 1);
}

TEST_CASE("export-spec") {
    const auto dir = oracle::scratch_dir("cli_export");
    oracle::write_wav(dir / "silent.wav", std::vector<double>(4000 * 10, 0.0), 1, 4000, 1);
    std::ofstream(dir / "silent.txt") << "0 8 0 0\n";
    REQUIRE(cli("export-spec --wav " + q(dir / "silent.wav") + " --cycle-index 0 --out " + q(dir / "s")).code == 0);
    const auto bytes = oracle::read_bytes(dir / "s_cycle0.pgm");
    const std::string header = "P5\n256 256\n255\n";
    REQUIRE(bytes.size() == header.size() + 256 * 256);
    CHECK(bytes.starts_with(header));
    CHECK(bytes.find_first_not_of('\0', header.size()) == std::string::npos);

    CHECK(cli("export-spec --wav " + q(dir / "silent.wav") + " --cycle-index 1 --out " + q(dir / "s")).code == 1);
    CHECK(cli("export-spec --wav " + q(dir / "silent.wav") + " --cycle-index -1 --out " + q(dir / "s")).code == 1);

    // 500 Hz tone burst: the brightest image row sits on the 500 Hz mel band
    std::vector<double> tone(4000 * 8, 0.0);
    for (std::size_t n = 4000; n < 28000; ++n) tone[n] = 0.5 * std::sin(2.0 * std::numbers::pi * 500.0 * n / 4000.0);
    for (std::size_t n = 0; n < tone.size(); ++n) tone[n] += 0.001 * std::sin(0.37 * n * n);
    oracle::write_wav(dir / "tone.wav", tone, 1, 4000, 1);
    std::ofstream(dir / "tone.txt") << "0 8 0 1\n";
    REQUIRE(cli("export-spec --wav " + q(dir / "tone.wav") + " --cycle-index 0 --out " + q(dir / "t")).code == 0);
    const auto img = oracle::read_bytes(dir / "t_cycle0.pgm").substr(header.size());
    std::size_t best_row = 0;
    long best = -1;
    for (std::size_t r = 0; r < 256; ++r) {
        long s = 0;
        for (std::size_t c = 96; c < 160; ++c) s += static_cast<unsigned char>(img[r * 256 + c]);
        if (s > best) {
            best = s;
            best_row = r;
        }
    }
    // image row 0 is the top (highest band); 128 mel bands span 256 rows
    const double mel_lo = 2595.0 * std::log10(1.0 + 50.0 / 700.0), mel_hi = 2595.0 * std::log10(1.0 + 2000.0 / 700.0);
    const double band = (255.0 - static_cast<double>(best_row)) / 255.0 * 127.0;
    const double mel = mel_lo + (mel_hi - mel_lo) * (band + 1.0) / 129.0;
    const double hz = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
    CAPTURE(best_row);
    CHECK(hz > 450.0);
    CHECK(hz < 550.0);
}
