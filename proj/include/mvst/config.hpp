#pragma once

// Run configuration: plain-text key=value with [dsp], [model] and [train]
// sections. Precedence is flags > file > built-in defaults.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "mvst/dsp.hpp"
#include "mvst/network.hpp"
#include "mvst/optim.hpp"

namespace mvst {

enum class ClassWeighting { uniform, inverse_frequency };

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 1e-5;
    int epochs = 100;
    int batch_size = 64;
    std::uint64_t seed = 0;
    LrSchedule lr_schedule = LrSchedule::cosine;
    ClassWeighting class_weights = ClassWeighting::uniform;
    /// Validate on the test split every k epochs; 0 disables.
    int val_every = 1;

    void validate() const;
};

struct RunConfig {
    dsp::DspConfig dsp;
    NetworkConfig net;
    TrainConfig train;

    /// Keeps dsp.out_size equal to the model's side and validates all parts.
    void finalize();
};

enum class Preset { full, desk };

RunConfig default_config(Preset preset = Preset::full);

class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, const std::string& what)
        : std::runtime_error(line > 0 ? "config line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// `key` is "section.name"; throws ConfigError for unknown keys or bad values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
/// Parses a whole file; '#' starts a comment, "[section]" sets the prefix.
void apply_config_text(RunConfig& config, std::string_view text);
/// Every key with its current value, parseable by apply_config_text.
std::string to_text(const RunConfig& config);

}  // namespace mvst
