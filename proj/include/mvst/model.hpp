#pragma once

// Multi-view patch splitting and the per-view transformer encoders.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mvst/matrix.hpp"
#include "mvst/tensor.hpp"

namespace mvst {
class Rng;
}

namespace mvst::model {

/// Patch shape of view `level` on an N×N spectrogram: μ = N/2^level mel rows
/// by ν = 2^level time columns. Every view yields N tokens of dimension N.
class ViewConfig {
public:
    ViewConfig(int n, int level);

    int level() const noexcept { return level_; }
    int side() const noexcept { return n_; }
    int patch_freq() const noexcept { return n_ >> level_; }
    int patch_time() const noexcept { return 1 << level_; }
    int bands() const noexcept { return n_ / patch_freq(); }
    int time_steps() const noexcept { return n_ / patch_time(); }
    int token_count() const noexcept { return bands() * time_steps(); }
    int token_dim() const noexcept { return patch_freq() * patch_time(); }

    /// Highest valid level: the square patch (μ = ν), or μ > ν for odd log2 N.
    static int max_level(int n);

private:
    int n_;
    int level_;
};

enum class MlpGelu { outer, inner };

struct ModelConfig {
    int n = 256;
    int d_t = 768;
    int depth = 12;
    int heads = 12;
    int mlp_ratio = 4;
    std::vector<int> views{0, 1, 2, 3, 4};
    MlpGelu mlp_gelu = MlpGelu::outer;
    double dropout = 0.0;
    double ln_eps = 1e-5;

    /// Throws std::invalid_argument when inconsistent.
    void validate() const;

    /// ViT-Base-like widths on 256×256 spectrograms, all five views.
    static ModelConfig full_scale();
    /// d_T=64, L=2, h=4, r=2 on 64×64 spectrograms, views 0..3.
    static ModelConfig desk_scale();
};

struct LayerNormParams {
    Tensor gain;
    Tensor bias;
};

struct BlockParams {
    LayerNormParams ln1;
    LayerNormParams ln2;
    Tensor wq, wk, wv, wo;      // d_T × d_T, applied as X·W
    Tensor fc1_w, fc1_b;        // d_T × r·d_T
    Tensor fc2_w, fc2_b;        // r·d_T × d_T
};

struct ViewParams {
    ViewConfig view;
    Tensor embed_w;  // μν × d_T
    Tensor embed_b;  // d_T
    Tensor pos;      // n_T × d_T, learned
    std::vector<BlockParams> blocks;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Allocates parameters with the standard transformer init: truncated normal
/// (std 0.02) for matrices and positional tables, zero biases, unit LN gains.
/// Each tensor is drawn from a stream keyed by its name, so the same view in
/// differently configured models starts identical.
ViewParams init_view(const ModelConfig& config, int level, std::uint64_t seed, double init_std = 0.02);
void append_named(const ViewParams& params, NamedTensors& out);

/// Non-overlapping μ×ν tiles in frequency-major raster order; pixels of a
/// tile flattened row-major (frequency rows, time columns).
Tensor split_patches(const Matrix& mel, const ViewConfig& view);

/// tokens·W_E + b_E + P
Tensor embed_tokens(const Tensor& tokens, const ViewParams& params);

struct BlockOptions {
    int heads = 1;
    MlpGelu mlp_gelu = MlpGelu::outer;
    double ln_eps = 1e-5;
    double dropout = 0.0;
    Rng* rng = nullptr;                        // needed when dropout > 0
    std::vector<Tensor>* attention = nullptr;  // receives per-head weights
};

/// MSA(LN(F)) + F
Tensor msa(const Tensor& tokens, const BlockParams& block, const BlockOptions& options);

/// Z = MSA(LN(F)) + F, then GELU(MLP(LN(Z))) + Z (outer) or
/// MLP-with-inner-GELU(LN(Z)) + Z (inner).
Tensor encoder_block(const Tensor& tokens, const BlockParams& block, const BlockOptions& options);

/// Chains `depth` blocks; depth ≤ 0 means all of them.
Tensor encode_view(const Tensor& embedded, const ViewParams& params, const BlockOptions& options, int depth = 0);

/// split → embed → encode for every active view, ascending level.
std::vector<Tensor> forward_all_views(const Matrix& mel, const std::vector<ViewParams>& views,
                                      const ModelConfig& config, Rng* dropout_rng = nullptr);

}  // namespace mvst::model
