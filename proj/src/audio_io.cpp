#include "mvst/audio_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "mvst/rng.hpp"

namespace mvst::audio {

namespace fs = std::filesystem;

ClassLabel label_from_flags(bool crackle, bool wheeze) noexcept {
    if (crackle && wheeze) return ClassLabel::Both;
    if (crackle) return ClassLabel::Crackle;
    if (wheeze) return ClassLabel::Wheeze;
    return ClassLabel::Normal;
}

std::pair<bool, bool> flags_from_label(ClassLabel label) noexcept {
    switch (label) {
        case ClassLabel::Crackle: return {true, false};
        case ClassLabel::Wheeze: return {false, true};
        case ClassLabel::Both: return {true, true};
        default: return {false, false};
    }
}

std::string_view label_name(ClassLabel label) noexcept {
    switch (label) {
        case ClassLabel::Crackle: return "crackle";
        case ClassLabel::Wheeze: return "wheeze";
        case ClassLabel::Both: return "both";
        default: return "normal";
    }
}

ClassLabel parse_label(std::string_view text) {
    for (int k = 0; k < kNumClasses; ++k) {
        const auto label = static_cast<ClassLabel>(k);
        if (text == label_name(label) || (text.size() == 1 && text[0] == '0' + k)) return label;
    }
    throw std::invalid_argument("unknown class label '" + std::string(text) + "'");
}

std::string_view split_name(Split s) noexcept { return s == Split::train ? "train" : "test"; }

void DatasetManifest::validate() const {
    std::set<std::pair<std::string, int>> keys;
    std::map<std::string, Split> split_of;
    for (const auto& e : entries) {
        if (!keys.emplace(e.recording_id, e.cycle_index).second)
            throw std::invalid_argument("duplicate manifest entry " + e.recording_id + "#" +
                                        std::to_string(e.cycle_index));
        auto [it, inserted] = split_of.emplace(e.recording_id, e.split);
        if (!inserted && it->second != e.split)
            throw std::invalid_argument("recording " + e.recording_id + " appears in both splits");
    }
}

std::vector<ManifestEntry> DatasetManifest::select(Split s) const {
    std::vector<ManifestEntry> out;
    std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
                 [s](const ManifestEntry& e) { return e.split == s; });
    return out;
}

std::vector<std::string> DatasetManifest::recordings() const {
    std::set<std::string> ids;
    for (const auto& e : entries) ids.insert(e.recording_id);
    return {ids.begin(), ids.end()};
}

// --- WAV -------------------------------------------------------------------

namespace {

std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}
void put32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

AudioClip read_wav(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WavError(WavErrc::open_failed, "cannot open " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto malformed = [&](const std::string& why) {
        return WavError(WavErrc::malformed_header, path.string() + ": " + why);
    };
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw malformed("not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t size = le32(chunk + 4);
        const std::size_t body = pos + 8;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16 || body + size > bytes.size()) throw malformed("truncated fmt chunk");
            format = le16(bytes.data() + body);
            channels = le16(bytes.data() + body + 2);
            rate = le32(bytes.data() + body + 4);
            bits = le16(bytes.data() + body + 14);
            if (format == kFormatExtensible) {
                if (size < 40) throw malformed("truncated extensible fmt chunk");
                format = le16(bytes.data() + body + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            if (!have_fmt) throw malformed("data chunk before fmt chunk");
            data = bytes.data() + body;
            data_size = std::min<std::size_t>(size, bytes.size() - body);
            break;
        }
        pos = body + size + (size & 1);
    }
    if (!have_fmt) throw malformed("missing fmt chunk");
    if (data == nullptr) throw malformed("missing data chunk");
    if (channels == 0 || rate == 0) throw malformed("zero channels or sample rate");

    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool float32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !float32)
        throw WavError(WavErrc::unsupported_format, path.string() + ": unsupported codec " + std::to_string(format) +
                                                        " with " + std::to_string(bits) + " bits");

    const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
    const std::size_t frames = data_size / frame_bytes;
    if (frames == 0) throw WavError(WavErrc::no_samples, path.string() + ": no samples");

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    clip.samples.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + f * frame_bytes + c * (bits / 8);
            if (pcm16) {
                acc += static_cast<std::int16_t>(le16(p)) / 32768.0;
            } else {
                const float v = std::bit_cast<float>(le32(p));
                if (!std::isfinite(v)) throw WavError(WavErrc::non_finite, path.string() + ": non-finite sample");
                acc += std::clamp(static_cast<double>(v), -1.0, 1.0);
            }
        }
        clip.samples[f] = acc / channels;
    }
    return clip;
}

void write_wav_pcm16(const fs::path& path, const AudioClip& clip) {
    std::string out;
    const auto n = static_cast<std::uint32_t>(clip.samples.size());
    out.reserve(44 + 2 * n);
    out += "RIFF";
    put32(out, 36 + 2 * n);
    out += "WAVEfmt ";
    put32(out, 16);
    put16(out, kFormatPcm);
    put16(out, 1);
    put32(out, static_cast<std::uint32_t>(clip.sample_rate));
    put32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
    put16(out, 2);
    put16(out, 16);
    out += "data";
    put32(out, 2 * n);
    for (double s : clip.samples) {
        const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
        put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

// --- annotations and cycles ------------------------------------------------

namespace {

double parse_double(std::string_view tok, int line) {
    double v = 0.0;
    const auto* end = tok.data() + tok.size();
    auto [p, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc() || p != end || !std::isfinite(v))
        throw AnnotationError(line, "non-numeric field '" + std::string(tok) + "'");
    return v;
}

bool parse_flag(std::string_view tok, int line) {
    if (tok == "0") return false;
    if (tok == "1") return true;
    throw AnnotationError(line, "flag must be 0 or 1, got '" + std::string(tok) + "'");
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::vector<CycleAnnotation> parse_annotations(std::string_view text) {
    std::vector<CycleAnnotation> out;
    std::istringstream in{std::string(text)};
    std::string row;
    int line = 0;
    while (std::getline(in, row)) {
        ++line;
        std::istringstream fields(row);
        std::vector<std::string> tok;
        for (std::string t; fields >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        if (tok.size() != 4) throw AnnotationError(line, "expected 4 fields, got " + std::to_string(tok.size()));
        CycleAnnotation a;
        a.start_s = parse_double(tok[0], line);
        a.end_s = parse_double(tok[1], line);
        a.crackle = parse_flag(tok[2], line);
        a.wheeze = parse_flag(tok[3], line);
        if (a.start_s < 0.0) throw AnnotationError(line, "negative start time");
        if (a.end_s <= a.start_s) throw AnnotationError(line, "end time must exceed start time");
        out.push_back(a);
    }
    return out;
}

std::vector<CycleAnnotation> read_annotations(const fs::path& path) { return parse_annotations(slurp(path)); }

SliceResult slice_cycles(const AudioClip& clip, const std::vector<CycleAnnotation>& annotations,
                         const std::string& recording_id) {
    SliceResult result;
    const auto len = clip.samples.size();
    for (std::size_t i = 0; i < annotations.size(); ++i) {
        const auto& a = annotations[i];
        const auto begin = static_cast<std::size_t>(std::floor(a.start_s * clip.sample_rate));
        const auto end = std::min(len, static_cast<std::size_t>(std::floor(a.end_s * clip.sample_rate)));
        if (begin >= end) {
            ++result.skipped;
            continue;
        }
        LabeledCycle cycle;
        cycle.clip.sample_rate = clip.sample_rate;
        cycle.clip.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                  clip.samples.begin() + static_cast<std::ptrdiff_t>(end));
        cycle.label = label_from_flags(a.crackle, a.wheeze);
        cycle.recording_id = recording_id;
        cycle.cycle_index = static_cast<int>(i);
        result.cycles.push_back(std::move(cycle));
    }
    return result;
}

AudioClip resample(const AudioClip& clip, int target_rate) {
    if (target_rate <= 0) throw std::invalid_argument("resample: target rate must be positive");
    if (clip.sample_rate <= 0) throw std::invalid_argument("resample: source rate must be positive");
    if (target_rate == clip.sample_rate || clip.samples.empty()) {
        AudioClip same = clip;
        same.sample_rate = target_rate;
        return same;
    }
    const auto len = clip.samples.size();
    const double ratio = static_cast<double>(clip.sample_rate) / target_rate;
    const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(len) / ratio));
    AudioClip out;
    out.sample_rate = target_rate;
    out.samples.resize(out_len);
    for (std::size_t j = 0; j < out_len; ++j) {
        const double pos = static_cast<double>(j) * ratio;
        const auto i0 = static_cast<std::size_t>(pos);
        if (i0 + 1 >= len) {
            out.samples[j] = clip.samples[len - 1];
            continue;
        }
        const double frac = pos - static_cast<double>(i0);
        out.samples[j] = clip.samples[i0] + frac * (clip.samples[i0 + 1] - clip.samples[i0]);
    }
    return out;
}

LabeledCycle fix_duration(LabeledCycle cycle, double seconds) {
    if (seconds <= 0.0) throw std::invalid_argument("fix_duration: duration must be positive");
    auto& s = cycle.clip.samples;
    if (s.empty()) throw std::invalid_argument("fix_duration: empty cycle");
    const auto target = static_cast<std::size_t>(std::llround(seconds * cycle.clip.sample_rate));
    if (target == 0) throw std::invalid_argument("fix_duration: duration shorter than one sample");
    if (s.size() > target) {
        const auto start = (s.size() - target) / 2;
        s = std::vector<double>(s.begin() + static_cast<std::ptrdiff_t>(start),
                                s.begin() + static_cast<std::ptrdiff_t>(start + target));
    } else if (s.size() < target) {
        std::vector<double> tiled(target);
        for (std::size_t i = 0; i < target; ++i) tiled[i] = s[i % s.size()];
        s = std::move(tiled);
    }
    return cycle;
}

LabeledCycle load_cycle(const ManifestEntry& entry, int target_rate, double seconds) {
    const auto clip = read_wav(entry.path);
    auto annotations = read_annotations(fs::path(entry.path).replace_extension(".txt"));
    if (entry.cycle_index < 0 || static_cast<std::size_t>(entry.cycle_index) >= annotations.size())
        throw std::out_of_range(entry.path.string() + ": cycle index " + std::to_string(entry.cycle_index) +
                                " out of range");
    auto sliced = slice_cycles(clip, {annotations[static_cast<std::size_t>(entry.cycle_index)]}, entry.recording_id);
    if (sliced.cycles.empty())
        throw std::out_of_range(entry.path.string() + ": cycle " + std::to_string(entry.cycle_index) +
                                " lies outside the recording");
    auto cycle = std::move(sliced.cycles.front());
    cycle.cycle_index = entry.cycle_index;
    cycle.clip = resample(cycle.clip, target_rate);
    return fix_duration(std::move(cycle), seconds);
}

// --- manifests -------------------------------------------------------------

namespace {

DatasetManifest assign(DatasetManifest manifest, const std::map<std::string, Split>& split_of) {
    for (auto& e : manifest.entries) e.split = split_of.at(e.recording_id);
    manifest.validate();
    return manifest;
}

}  // namespace

DatasetManifest split_dataset(DatasetManifest manifest, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split_dataset: train fraction must lie in (0, 1)");
    auto ids = manifest.recordings();
    if (ids.size() < 2) throw std::invalid_argument("split_dataset: need at least two recordings");

    Rng rng(seed);
    for (std::size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[rng.below(i + 1)]);

    const auto n = static_cast<long long>(ids.size());
    const auto n_train = std::clamp<long long>(std::llround(train_fraction * static_cast<double>(n)), 1, n - 1);
    std::map<std::string, Split> split_of;
    for (long long i = 0; i < n; ++i)
        split_of[ids[static_cast<std::size_t>(i)]] = i < n_train ? Split::train : Split::test;
    return assign(std::move(manifest), split_of);
}

DatasetManifest apply_split_file(DatasetManifest manifest, std::string_view split_text) {
    std::map<std::string, Split> split_of;
    std::istringstream in{std::string(split_text)};
    std::string row;
    int line = 0;
    while (std::getline(in, row)) {
        ++line;
        std::istringstream fields(row);
        std::string id, which;
        if (!(fields >> id)) continue;
        if (!(fields >> which)) throw AnnotationError(line, "split row needs 'recording_id train|test'");
        if (which == "train") split_of[id] = Split::train;
        else if (which == "test") split_of[id] = Split::test;
        else throw AnnotationError(line, "unknown split '" + which + "'");
    }
    for (const auto& id : manifest.recordings())
        if (!split_of.contains(id)) throw std::invalid_argument("split file does not list recording " + id);
    return assign(std::move(manifest), split_of);
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
    const auto base = fs::absolute(path).parent_path();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& e : manifest.entries) {
        auto p = fs::absolute(e.path).lexically_normal();
        auto rel = p.lexically_relative(base);
        const bool use_rel = !rel.empty() && *rel.begin() != "..";
        out << e.recording_id << '\t' << e.cycle_index << '\t' << label_name(e.label) << '\t' << split_name(e.split)
            << '\t' << (use_rel ? rel : p).generic_string() << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

DatasetManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path.string());
    const auto base = fs::absolute(path).parent_path();
    DatasetManifest m;
    std::string row;
    int line = 0;
    while (std::getline(in, row)) {
        ++line;
        if (row.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(row);
        for (std::string c; std::getline(ss, c, '\t');) cols.push_back(c);
        if (cols.size() != 5) throw AnnotationError(line, "manifest rows need 5 tab-separated fields");
        ManifestEntry e;
        e.recording_id = cols[0];
        try {
            e.cycle_index = std::stoi(cols[1]);
            e.label = parse_label(cols[2]);
        } catch (const std::exception& ex) {
            throw AnnotationError(line, ex.what());
        }
        if (cols[3] == "train") e.split = Split::train;
        else if (cols[3] == "test") e.split = Split::test;
        else throw AnnotationError(line, "unknown split '" + cols[3] + "'");
        fs::path p(cols[4]);
        e.path = p.is_absolute() ? p : (base / p).lexically_normal();
        m.entries.push_back(std::move(e));
    }
    m.validate();
    return m;
}

DatasetManifest scan_directory(const fs::path& dir, ScanReport& report) {
    if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + " is not a directory");
    std::set<fs::path> wavs, txts;
    for (const auto& item : fs::directory_iterator(dir)) {
        if (!item.is_regular_file()) continue;
        const auto ext = item.path().extension();
        if (ext == ".wav") wavs.insert(item.path());
        else if (ext == ".txt") txts.insert(item.path());
    }
    DatasetManifest m;
    for (const auto& wav : wavs) {
        auto txt = fs::path(wav).replace_extension(".txt");
        if (!txts.erase(txt)) {
            report.orphan_wavs.push_back(wav);
            continue;
        }
        const auto clip = read_wav(wav);
        const auto annotations = read_annotations(txt);
        const auto id = wav.stem().string();
        auto sliced = slice_cycles(clip, annotations, id);
        report.skipped_cycles += sliced.skipped;
        for (const auto& c : sliced.cycles)
            m.entries.push_back({id, c.cycle_index, c.label, Split::train, wav});
    }
    report.orphan_annotations.assign(txts.begin(), txts.end());
    return m;
}

// --- synthetic data --------------------------------------------------------

namespace {

/// AR(2) resonator driven by white noise: energy concentrated around
/// `center_hz` with bandwidth set by `radius`.
void add_band_noise(std::vector<double>& x, Rng& rng, int rate, double center_hz, double radius, double amplitude) {
    const double w = 2.0 * std::numbers::pi * center_hz / rate;
    const double a1 = 2.0 * radius * std::cos(w), a2 = -radius * radius;
    double y1 = 0.0, y2 = 0.0;
    std::vector<double> y(x.size());
    double energy = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double v = rng.normal() + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = v;
        y[n] = v;
        energy += v * v;
    }
    const double gain = amplitude / std::sqrt(energy / static_cast<double>(x.size()) + 1e-30);
    for (std::size_t n = 0; n < x.size(); ++n) x[n] += gain * y[n];
}

void add_crackles(std::vector<double>& x, Rng& rng, int rate, std::size_t begin, std::size_t end) {
    const double seconds = static_cast<double>(end - begin) / rate;
    const int count = static_cast<int>(std::lround(seconds * rng.uniform(5.0, 10.0)));
    const std::size_t span = static_cast<std::size_t>(0.03 * rate);
    for (int c = 0; c < count; ++c) {
        const std::size_t at = begin + rng.below(end - begin - span);
        const double amp = rng.uniform(0.3, 0.6) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        const double freq = rng.uniform(900.0, 1600.0);
        const double tau = rng.uniform(0.003, 0.006) * rate;
        for (std::size_t k = 0; k < span; ++k) {
            const double t = static_cast<double>(k);
            x[at + k] += amp * std::exp(-t / tau) * std::sin(2.0 * std::numbers::pi * freq * t / rate);
        }
    }
}

void add_wheeze(std::vector<double>& x, Rng& rng, int rate, std::size_t begin, std::size_t end) {
    const double freq = rng.uniform(250.0, 750.0);
    const double amp = rng.uniform(0.15, 0.25);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const std::size_t len = end - begin;
    const std::size_t on = begin + len / 10, off = end - len / 10;
    const std::size_t ramp = static_cast<std::size_t>(0.05 * rate);
    for (std::size_t n = on; n < off; ++n) {
        const double up = std::min(1.0, static_cast<double>(n - on) / ramp);
        const double down = std::min(1.0, static_cast<double>(off - n) / ramp);
        x[n] += amp * up * down * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(n) / rate + phase);
    }
}

}  // namespace

DatasetManifest synth_dataset(int n_per_class, std::uint64_t seed, const fs::path& out_dir,
                              const SynthOptions& options) {
    if (n_per_class < 1) throw std::invalid_argument("synth_dataset: n_per_class must be at least 1");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw std::runtime_error("cannot create directory " + out_dir.string());

    const int rate = options.sample_rate;
    const Rng root(seed);
    DatasetManifest m;
    for (int i = 0; i < n_per_class; ++i) {
        for (int k = 0; k < kNumClasses; ++k) {
            const auto label = static_cast<ClassLabel>(k);
            Rng rng = root.split(static_cast<std::uint64_t>(i) * kNumClasses + static_cast<std::uint64_t>(k));
            const double cycle_s = rng.uniform(options.min_cycle_s, options.max_cycle_s);
            const double lead_s = 0.25, tail_s = 0.25;
            const auto begin = static_cast<std::size_t>(lead_s * rate);
            const auto end = begin + static_cast<std::size_t>(cycle_s * rate);
            std::vector<double> x(end + static_cast<std::size_t>(tail_s * rate), 0.0);

            add_band_noise(x, rng, rate, rng.uniform(150.0, 400.0), 0.7, 0.04);
            add_band_noise(x, rng, rate, rng.uniform(600.0, 1000.0), 0.6, 0.02);
            const auto [crackle, wheeze] = flags_from_label(label);
            if (crackle) add_crackles(x, rng, rate, begin, end);
            if (wheeze) add_wheeze(x, rng, rate, begin, end);
            for (auto& v : x) v = std::clamp(v, -0.99, 0.99);

            std::ostringstream id;
            id << "synth_" << std::setw(4) << std::setfill('0') << i << '_' << label_name(label);
            const auto wav = out_dir / (id.str() + ".wav");
            write_wav_pcm16(wav, AudioClip{std::move(x), rate});

            std::ofstream ann(fs::path(wav).replace_extension(".txt"), std::ios::binary);
            if (!ann) throw std::runtime_error("cannot write annotation for " + wav.string());
            ann << std::fixed << std::setprecision(3) << lead_s << '\t' << lead_s + static_cast<double>(end - begin) / rate
                << '\t' << (crackle ? 1 : 0) << '\t' << (wheeze ? 1 : 0) << '\n';

            m.entries.push_back({id.str(), 0, label, Split::train, wav});
        }
    }
    m = split_dataset(std::move(m), options.train_fraction, seed);
    write_manifest(out_dir / "manifest.tsv", m);
    return m;
}

}  // namespace mvst::audio
