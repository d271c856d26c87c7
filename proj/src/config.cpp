#include "mvst/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

namespace mvst {

void TrainConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train config: lr must be non-negative");
    if (weight_decay < 0.0) throw std::invalid_argument("train config: weight_decay must be non-negative");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be positive");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be positive");
    if (val_every < 0) throw std::invalid_argument("train config: val_every must be non-negative");
}

void RunConfig::finalize() {
    dsp.out_size = net.model.n;
    dsp.stft.validate();
    net.validate();
    train.validate();
}

RunConfig default_config(Preset preset) {
    RunConfig c;
    if (preset == Preset::desk) c.net.model = model::ModelConfig::desk_scale();
    c.finalize();
    return c;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto* end = value.data() + value.size();
    auto [p, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || p != end)
        throw ConfigError(0, "invalid value '" + std::string(value) + "' for " + std::string(key));
    return out;
}

std::vector<int> parse_int_list(std::string_view key, std::string_view value) {
    std::vector<int> out;
    std::string item;
    std::stringstream ss{std::string(value)};
    while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
    if (out.empty()) throw ConfigError(0, std::string(key) + " needs at least one entry");
    return out;
}

[[noreturn]] void bad_choice(std::string_view key, std::string_view value) {
    throw ConfigError(0, "invalid value '" + std::string(value) + "' for " + std::string(key));
}

}  // namespace

void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
    auto& d = c.dsp;
    auto& m = c.net.model;
    auto& t = c.train;
    if (key == "dsp.sample_rate") d.sample_rate = parse_number<int>(key, value);
    else if (key == "dsp.cycle_seconds") d.cycle_seconds = parse_number<double>(key, value);
    else if (key == "dsp.win_length") d.stft.win_length = parse_number<int>(key, value);
    else if (key == "dsp.hop_length") d.stft.hop_length = parse_number<int>(key, value);
    else if (key == "dsp.fft_size") d.stft.fft_size = parse_number<int>(key, value);
    else if (key == "dsp.window") {
        if (value == "hann") d.stft.window = dsp::Window::hann;
        else if (value == "rectangular") d.stft.window = dsp::Window::rectangular;
        else bad_choice(key, value);
    } else if (key == "dsp.n_mels") d.mel.n_mels = parse_number<int>(key, value);
    else if (key == "dsp.f_min") d.mel.f_min = parse_number<double>(key, value);
    else if (key == "dsp.f_max") d.mel.f_max = parse_number<double>(key, value);
    else if (key == "dsp.top_db") d.top_db = parse_number<double>(key, value);
    else if (key == "model.n") m.n = parse_number<int>(key, value);
    else if (key == "model.d_t") m.d_t = parse_number<int>(key, value);
    else if (key == "model.depth") m.depth = parse_number<int>(key, value);
    else if (key == "model.heads") m.heads = parse_number<int>(key, value);
    else if (key == "model.mlp_ratio") m.mlp_ratio = parse_number<int>(key, value);
    else if (key == "model.views") m.views = parse_int_list(key, value);
    else if (key == "model.mlp_gelu") {
        if (value == "outer") m.mlp_gelu = model::MlpGelu::outer;
        else if (value == "inner") m.mlp_gelu = model::MlpGelu::inner;
        else bad_choice(key, value);
    } else if (key == "model.dropout") m.dropout = parse_number<double>(key, value);
    else if (key == "model.ln_eps") m.ln_eps = parse_number<double>(key, value);
    else if (key == "model.init_std") c.net.init_std = parse_number<double>(key, value);
    else if (key == "model.gate_mode") {
        if (value == "per_view") c.net.gate_mode = fusion::GateMode::per_view;
        else if (value == "shared_sum") c.net.gate_mode = fusion::GateMode::shared_sum;
        else bad_choice(key, value);
    } else if (key == "model.pool") {
        if (value != "mean") bad_choice(key, value);
    } else if (key == "train.lr") t.lr = parse_number<double>(key, value);
    else if (key == "train.weight_decay") t.weight_decay = parse_number<double>(key, value);
    else if (key == "train.epochs") t.epochs = parse_number<int>(key, value);
    else if (key == "train.batch_size") t.batch_size = parse_number<int>(key, value);
    else if (key == "train.seed") t.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "train.val_every") t.val_every = parse_number<int>(key, value);
    else if (key == "train.lr_schedule") {
        if (value == "constant") t.lr_schedule = LrSchedule::constant;
        else if (value == "cosine") t.lr_schedule = LrSchedule::cosine;
        else bad_choice(key, value);
    } else if (key == "train.class_weights") {
        if (value == "uniform") t.class_weights = ClassWeighting::uniform;
        else if (value == "inverse_frequency") t.class_weights = ClassWeighting::inverse_frequency;
        else bad_choice(key, value);
    } else {
        throw ConfigError(0, "unknown key '" + std::string(key) + "'");
    }
}

void apply_config_text(RunConfig& config, std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const auto row = trim(raw);
        if (row.empty()) continue;
        if (row.front() == '[') {
            if (row.back() != ']') throw ConfigError(line, "unterminated section header");
            section = trim(std::string_view(row).substr(1, row.size() - 2));
            if (section != "dsp" && section != "model" && section != "train")
                throw ConfigError(line, "unknown section '" + section + "'");
            continue;
        }
        const auto eq = row.find('=');
        if (eq == std::string::npos) throw ConfigError(line, "expected key=value");
        auto key = trim(std::string_view(row).substr(0, eq));
        const auto value = trim(std::string_view(row).substr(eq + 1));
        if (key.find('.') == std::string::npos) {
            if (section.empty()) throw ConfigError(line, "key '" + key + "' outside a section");
            key = section + "." + key;
        }
        try {
            apply_setting(config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(line, e.what());
        }
    }
}

std::string to_text(const RunConfig& c) {
    std::ostringstream os;
    os.precision(17);
    const auto& d = c.dsp;
    const auto& m = c.net.model;
    const auto& t = c.train;
    os << "[dsp]\n"
       << "sample_rate=" << d.sample_rate << "\ncycle_seconds=" << d.cycle_seconds << "\nwin_length=" << d.stft.win_length
       << "\nhop_length=" << d.stft.hop_length << "\nfft_size=" << d.stft.fft_size
       << "\nwindow=" << (d.stft.window == dsp::Window::hann ? "hann" : "rectangular") << "\nn_mels=" << d.mel.n_mels
       << "\nf_min=" << d.mel.f_min << "\nf_max=" << d.mel.f_max << "\ntop_db=" << d.top_db << "\n";
    os << "[model]\n"
       << "n=" << m.n << "\nd_t=" << m.d_t << "\ndepth=" << m.depth << "\nheads=" << m.heads
       << "\nmlp_ratio=" << m.mlp_ratio << "\nviews=";
    for (std::size_t i = 0; i < m.views.size(); ++i) os << (i ? "," : "") << m.views[i];
    os << "\nmlp_gelu=" << (m.mlp_gelu == model::MlpGelu::outer ? "outer" : "inner") << "\ndropout=" << m.dropout
       << "\nln_eps=" << m.ln_eps << "\ninit_std=" << c.net.init_std
       << "\ngate_mode=" << (c.net.gate_mode == fusion::GateMode::per_view ? "per_view" : "shared_sum")
       << "\npool=mean\n";
    os << "[train]\n"
       << "lr=" << t.lr << "\nweight_decay=" << t.weight_decay << "\nepochs=" << t.epochs
       << "\nbatch_size=" << t.batch_size << "\nseed=" << t.seed
       << "\nlr_schedule=" << (t.lr_schedule == LrSchedule::cosine ? "cosine" : "constant")
       << "\nclass_weights=" << (t.class_weights == ClassWeighting::uniform ? "uniform" : "inverse_frequency")
       << "\nval_every=" << t.val_every << "\n";
    return os.str();
}

}  // namespace mvst
