#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "mvst/audio_io.hpp"
#include "mvst/rng.hpp"
#include "oracles.hpp"

using namespace mvst;
using namespace mvst::audio;
namespace fs = std::filesystem;

TEST_CASE("label mapping is a bijection") {
    std::set<int> seen;
    for (bool c : {false, true})
        for (bool w : {false, true}) {
            const auto l = label_from_flags(c, w);
            seen.insert(static_cast<int>(l));
            CHECK(flags_from_label(l) == std::pair{c, w});
            CHECK(parse_label(label_name(l)) == l);
        }
    CHECK(seen.size() == 4);
    CHECK(label_from_flags(false, false) == ClassLabel::Normal);
    CHECK(label_from_flags(true, false) == ClassLabel::Crackle);
    CHECK(label_from_flags(false, true) == ClassLabel::Wheeze);
    CHECK(label_from_flags(true, true) == ClassLabel::Both);
    CHECK(parse_label("2") == ClassLabel::Wheeze);
    CHECK_THROWS(parse_label("rhonchi"));
}

TEST_CASE("read_wav on oracle-written files") {
    const auto dir = oracle::scratch_dir("wav");
    SUBCASE("single PCM16 sample") {
        oracle::write_wav(dir / "one.wav", {0.5}, 1, 4000, 1);
        const auto clip = read_wav(dir / "one.wav");
        CHECK(clip.sample_rate == 4000);
        REQUIRE(clip.samples.size() == 1);
        CHECK(clip.samples[0] == 0.5);
    }
    SUBCASE("stereo is averaged") {
        oracle::write_wav(dir / "st.wav", {0.2, 0.6}, 2, 4000, 3);
        const auto clip = read_wav(dir / "st.wav");
        REQUIRE(clip.samples.size() == 1);
        CHECK(clip.samples[0] == doctest::Approx(0.4).epsilon(1e-7));
    }
    SUBCASE("ICBHI native rates load") {
        for (int rate : {4000, 10000, 44100}) {
            oracle::write_wav(dir / "r.wav", oracle::random_vector(100, 1, -0.9, 0.9), 1, rate, 1);
            CHECK(read_wav(dir / "r.wav").sample_rate == rate);
        }
    }
    SUBCASE("PCM16 round trip within quantization") {
        const auto x = oracle::random_vector(1000, 7, -0.99, 0.99);
        oracle::write_wav(dir / "rt.wav", x, 1, 4000, 1);
        const auto clip = read_wav(dir / "rt.wav");
        REQUIRE(clip.samples.size() == x.size());
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(clip.samples[i] - x[i]) <= std::ldexp(1.0, -15));
        // and the library writer agrees with the oracle reader path
        write_wav_pcm16(dir / "lib.wav", clip);
        CHECK(read_wav(dir / "lib.wav").samples == clip.samples);
    }
    SUBCASE("distinct error values") {
        const auto code = [](const fs::path& p) {
            try {
                read_wav(p);
            } catch (const WavError& e) {
                return e.code();
            }
            FAIL("no error");
            return WavErrc::open_failed;
        };
        CHECK(code(dir / "missing.wav") == WavErrc::open_failed);
        std::ofstream(dir / "junk.wav") << "not a wav file at all";
        CHECK(code(dir / "junk.wav") == WavErrc::malformed_header);
        oracle::write_wav(dir / "empty.wav", {}, 1, 4000, 1);
        CHECK(code(dir / "empty.wav") == WavErrc::no_samples);
        // 8-bit PCM: rewrite the bits-per-sample field of a valid file
        oracle::write_wav(dir / "b8.wav", {0.1, 0.2}, 1, 4000, 1);
        auto bytes = oracle::read_bytes(dir / "b8.wav");
        bytes[34] = 8;
        std::ofstream(dir / "b8.wav", std::ios::binary) << bytes;
        CHECK(code(dir / "b8.wav") == WavErrc::unsupported_format);
    }
}

TEST_CASE("parse_annotations") {
    const auto a = parse_annotations("0.0 2.5 0 0\n");
    REQUIRE(a.size() == 1);
    CHECK(a[0].start_s == 0.0);
    CHECK(a[0].end_s == 2.5);
    CHECK_FALSE(a[0].crackle);
    CHECK_FALSE(a[0].wheeze);

    const auto b = parse_annotations("0.0 2.0 1 1");
    CHECK(label_from_flags(b[0].crackle, b[0].wheeze) == ClassLabel::Both);

    std::string seven;
    for (int i = 0; i < 7; ++i) seven += std::to_string(i) + " " + std::to_string(i + 1) + " 0 1\n";
    const auto c = parse_annotations(seven);
    REQUIRE(c.size() == 7);
    for (int i = 0; i < 7; ++i) CHECK(c[static_cast<std::size_t>(i)].start_s == i);

    CHECK_THROWS_AS(parse_annotations("0 x 0 0"), AnnotationError);
    CHECK_THROWS_AS(parse_annotations("2 1 0 0"), AnnotationError);
    CHECK_THROWS_AS(parse_annotations("0 1 2 0"), AnnotationError);
    try {
        parse_annotations("0 1 0 0\n\n1 0.5 0 0\n");
        FAIL("expected error");
    } catch (const AnnotationError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("slice_cycles") {
    AudioClip clip{std::vector<double>(40000, 0.0), 4000};
    for (std::size_t i = 0; i < clip.samples.size(); ++i) clip.samples[i] = static_cast<double>(i);
    const auto r = slice_cycles(clip, {{2.0, 4.0, false, false}, {9.5, 12.0, true, false}, {11.0, 12.0, false, true}});
    REQUIRE(r.cycles.size() == 2);
    CHECK(r.cycles[0].clip.samples.size() == 8000);
    CHECK(r.cycles[0].clip.samples.front() == 8000.0);
    CHECK(r.cycles[1].clip.samples.size() == 2000);
    CHECK(r.cycles[1].label == ClassLabel::Crackle);
    CHECK(r.skipped == 1);
    CHECK(slice_cycles(clip, {}).cycles.empty());
}

TEST_CASE("resample") {
    const AudioClip c{{0.1, 0.2, 0.3}, 4000};
    CHECK(resample(c, 4000).samples == c.samples);

    const AudioClip flat{std::vector<double>(800, 0.3), 8000};
    const auto down = resample(flat, 4000);
    CHECK(down.sample_rate == 4000);
    CHECK(down.samples.size() == 400);
    for (double v : down.samples) CHECK(v == doctest::Approx(0.3).epsilon(1e-15));

    // golden: positions j·4/2 on [0,1,2,3], length round(4·2/4)
    const auto ramp = resample(AudioClip{{0, 1, 2, 3}, 4}, 2);
    CHECK(ramp.samples == std::vector<double>{0.0, 2.0});

    const auto up = resample(AudioClip{{0, 1, 2, 3}, 4}, 8);
    CHECK(up.samples == std::vector<double>{0, 0.5, 1, 1.5, 2, 2.5, 3, 3});
}

TEST_CASE("fix_duration") {
    LabeledCycle c;
    c.clip = {std::vector<double>(32000, 1.0), 4000};
    CHECK(fix_duration(c, 8.0).clip.samples == c.clip.samples);

    c.clip.samples = {1, 2, 3, 4, 5, 6, 7, 8};
    c.clip.sample_rate = 4;
    const auto tiled = fix_duration(c, 8.0);
    REQUIRE(tiled.clip.samples.size() == 32);
    for (std::size_t i = 0; i < 32; ++i) CHECK(tiled.clip.samples[i] == static_cast<double>(i % 8 + 1));

    c.clip.samples.resize(40);
    for (std::size_t i = 0; i < 40; ++i) c.clip.samples[i] = static_cast<double>(i);
    const auto crop = fix_duration(c, 8.0);
    REQUIRE(crop.clip.samples.size() == 32);
    CHECK(crop.clip.samples.front() == 4.0);  // [1 s, 9 s) at 4 Hz
    CHECK(crop.clip.samples.back() == 35.0);

    for (std::uint64_t s = 0; s < 50; ++s) {
        Rng r(s);
        c.clip = {std::vector<double>(1 + r.below(5000), 0.25), static_cast<int>(1000 + r.below(9000))};
        const double secs = r.uniform(0.1, 3.0);
        CHECK(fix_duration(c, secs).clip.samples.size() ==
              static_cast<std::size_t>(std::llround(secs * c.clip.sample_rate)));
    }
    c.clip.samples.clear();
    CHECK_THROWS(fix_duration(c, 8.0));
}

namespace {

DatasetManifest toy_manifest(int recordings, int cycles) {
    DatasetManifest m;
    for (int r = 0; r < recordings; ++r)
        for (int c = 0; c < cycles; ++c)
            m.entries.push_back({"rec" + std::to_string(r), c, ClassLabel::Normal, Split::train, "x.wav"});
    return m;
}

}  // namespace

TEST_CASE("split_dataset") {
    const auto m = split_dataset(toy_manifest(10, 3), 0.6, 123);
    std::set<std::string> train, test;
    for (const auto& e : m.entries) (e.split == Split::train ? train : test).insert(e.recording_id);
    CHECK(train.size() == 6);
    CHECK(test.size() == 4);

    const auto again = split_dataset(toy_manifest(10, 3), 0.6, 123);
    for (std::size_t i = 0; i < m.entries.size(); ++i) CHECK(m.entries[i].split == again.entries[i].split);

    CHECK_THROWS(split_dataset(toy_manifest(1, 3), 0.6, 0));
    CHECK_THROWS(split_dataset(toy_manifest(5, 3), 1.0, 0));
}

TEST_CASE("recording-level split holds over 1000 random manifests") {
    for (std::uint64_t s = 0; s < 1000; ++s) {
        Rng r(s);
        DatasetManifest m = toy_manifest(2 + static_cast<int>(r.below(20)), 1);
        for (auto& e : m.entries) e.cycle_index = 0;
        for (int extra = 0; extra < 10; ++extra)
            m.entries.push_back({"rec" + std::to_string(r.below(2)), 1 + extra, ClassLabel::Crackle, Split::train, "x"});
        const auto out = split_dataset(m, r.uniform(0.05, 0.95), s);
        std::map<std::string, Split> seen;
        for (const auto& e : out.entries) {
            auto [it, fresh] = seen.emplace(e.recording_id, e.split);
            REQUIRE((fresh || it->second == e.split));
        }
    }
}

TEST_CASE("split file overrides randomization") {
    const auto m = apply_split_file(toy_manifest(3, 2), "rec0 test\nrec1 train\n\nrec2 test\n");
    for (const auto& e : m.entries) CHECK(e.split == (e.recording_id == "rec1" ? Split::train : Split::test));
    CHECK_THROWS(apply_split_file(toy_manifest(3, 2), "rec0 test\n"));
    CHECK_THROWS_AS(apply_split_file(toy_manifest(1, 1), "rec0 validate\n"), AnnotationError);
}

TEST_CASE("manifest validation") {
    auto m = toy_manifest(2, 2);
    CHECK_NOTHROW(m.validate());
    m.entries.push_back(m.entries.front());
    CHECK_THROWS(m.validate());
    m = toy_manifest(1, 2);
    m.entries[1].split = Split::test;
    CHECK_THROWS(m.validate());
}

TEST_CASE("manifest round trip with relative paths") {
    const auto dir = oracle::scratch_dir("manifest");
    DatasetManifest m;
    m.entries.push_back({"a", 0, ClassLabel::Wheeze, Split::train, dir / "a.wav"});
    m.entries.push_back({"b", 3, ClassLabel::Both, Split::test, dir / "sub" / "b.wav"});
    write_manifest(dir / "m.tsv", m);
    const auto text = oracle::read_bytes(dir / "m.tsv");
    CHECK(text == "a\t0\twheeze\ttrain\ta.wav\nb\t3\tboth\ttest\tsub/b.wav\n");
    const auto back = read_manifest(dir / "m.tsv");
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[1].path == dir / "sub" / "b.wav");
    CHECK(back.entries[1].cycle_index == 3);
    CHECK(back.entries[1].label == ClassLabel::Both);
}

TEST_CASE("scan_directory pairs files and reports orphans") {
    const auto dir = oracle::scratch_dir("scan");
    for (const char* id : {"r1", "r2"}) {
        oracle::write_wav(dir / (std::string(id) + ".wav"), std::vector<double>(4000 * 6, 0.01), 1, 4000, 1);
        std::ofstream(dir / (std::string(id) + ".txt")) << "0 2 0 0\n2 4 1 0\n4 6 0 1\n";
    }
    oracle::write_wav(dir / "lonely.wav", {0.1}, 1, 4000, 1);
    std::ofstream(dir / "stray.txt") << "0 1 0 0\n";
    ScanReport report;
    const auto m = scan_directory(dir, report);
    CHECK(m.entries.size() == 6);
    CHECK(report.orphan_wavs == std::vector<fs::path>{dir / "lonely.wav"});
    CHECK(report.orphan_annotations == std::vector<fs::path>{dir / "stray.txt"});
}

TEST_CASE("load_cycle resamples and fixes the duration") {
    const auto dir = oracle::scratch_dir("load");
    oracle::write_wav(dir / "r.wav", std::vector<double>(10000 * 5, 0.25), 1, 10000, 1);
    std::ofstream(dir / "r.txt") << "0.5 3.5 1 0\n";
    const auto c = load_cycle({"r", 0, ClassLabel::Crackle, Split::train, dir / "r.wav"});
    CHECK(c.clip.sample_rate == 4000);
    CHECK(c.clip.samples.size() == 32000);
    CHECK(c.clip.samples[123] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK_THROWS_AS(load_cycle({"r", 1, ClassLabel::Crackle, Split::train, dir / "r.wav"}), std::out_of_range);
}

TEST_CASE("synth_dataset") {
    const auto d1 = oracle::scratch_dir("synth1"), d2 = oracle::scratch_dir("synth2");
    const auto m1 = synth_dataset(3, 7, d1), m2 = synth_dataset(3, 7, d2);
    CHECK(oracle::read_bytes(d1 / "manifest.tsv") == oracle::read_bytes(d2 / "manifest.tsv"));
    for (const auto& e : m1.entries) {
        CHECK(oracle::read_bytes(d1 / e.path.filename()) == oracle::read_bytes(d2 / e.path.filename()));
        CHECK(oracle::read_bytes(fs::path(d1 / e.path.filename()).replace_extension(".txt")) ==
              oracle::read_bytes(fs::path(d2 / e.path.filename()).replace_extension(".txt")));
    }

    const auto d3 = oracle::scratch_dir("synth50");
    const auto big = synth_dataset(50, 1, d3);
    CHECK(big.entries.size() == 200);
    std::map<ClassLabel, int> counts;
    for (const auto& e : big.entries) ++counts[e.label];
    for (int k = 0; k < 4; ++k) CHECK(counts[static_cast<ClassLabel>(k)] == 50);
    const auto train = big.select(Split::train).size();
    CHECK(train == 120);
    CHECK_THROWS(synth_dataset(0, 1, d3));
}

TEST_CASE("synthetic wheeze peaks inside 200-800 Hz") {
    const auto dir = oracle::scratch_dir("synth_wheeze");
    const auto m = synth_dataset(4, 11, dir);
    for (const auto& e : m.entries) {
        if (e.label != ClassLabel::Wheeze) continue;
        const auto cycle = load_cycle(e);
        const auto& x = cycle.clip.samples;
        // brute-force DFT on a 5 Hz probe grid across the whole band
        double best_hz = 0, best = -1;
        for (double hz = 50; hz <= 1995; hz += 5) {
            const double p = oracle::dft_power_at(std::vector<double>(x.begin(), x.begin() + 8000), hz, 4000);
            if (p > best) {
                best = p;
                best_hz = hz;
            }
        }
        CAPTURE(e.recording_id);
        CHECK(best_hz >= 200);
        CHECK(best_hz <= 800);
    }
}
