#pragma once

// Binary checkpoints. All integers and doubles are little-endian:
//
//   "MVST"  u32 version
//   u64 length, run-config text (to_text)
//   u64 seed used for initialization
//   u64 tensor count, then per tensor:
//       u32 name length, name, u32 ndim, u64 dims[ndim], f64 data[size]
//   AdamW: u64 step, f64 lr, beta1, beta2, eps, weight_decay,
//          u8 has_moments, then f64 m[size], v[size] per tensor
//   u64 rng key, u64 rng counter, i64 epoch
//   u64 FNV-1a digest of every preceding byte

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvst/config.hpp"
#include "mvst/network.hpp"
#include "mvst/optim.hpp"
#include "mvst/rng.hpp"

namespace mvst {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StoredTensor {
    std::string name;
    Shape shape;
    std::vector<double> data;
};

struct CheckpointData {
    RunConfig config;
    std::uint64_t init_seed = 0;
    std::vector<StoredTensor> tensors;
    AdamWState optimizer;
    std::uint64_t rng_key = 0;
    std::uint64_t rng_counter = 0;
    std::int64_t epoch = 0;
};

std::string encode_checkpoint(const RunConfig& config, std::uint64_t init_seed, const Network& net,
                              const AdamWState& optimizer, const Rng& rng, std::int64_t epoch);
CheckpointData decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, std::uint64_t init_seed,
                     const Network& net, const AdamWState& optimizer, const Rng& rng, std::int64_t epoch);
CheckpointData load_checkpoint(const std::filesystem::path& path);

/// Copies stored values into `net`. Throws CheckpointError when names or
/// shapes differ from the network's architecture.
void restore_parameters(const CheckpointData& data, Network& net);

/// Builds the network described by the stored config and restores it.
Network network_from_checkpoint(const CheckpointData& data);

}  // namespace mvst
