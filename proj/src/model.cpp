#include "mvst/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "mvst/hash.hpp"
#include "mvst/rng.hpp"

namespace mvst::model {

ViewConfig::ViewConfig(int n, int level) : n_(n), level_(level) {
    if (n < 2 || !std::has_single_bit(static_cast<unsigned>(n)))
        throw std::invalid_argument("spectrogram side must be a power of two >= 2, got " + std::to_string(n));
    if (level < 0 || level > max_level(n))
        throw std::invalid_argument("view level " + std::to_string(level) + " invalid for N=" + std::to_string(n));
}

int ViewConfig::max_level(int n) { return (std::bit_width(static_cast<unsigned>(n)) - 1) / 2; }

void ModelConfig::validate() const {
    if (d_t <= 0 || depth < 1 || heads < 1 || mlp_ratio < 1)
        throw std::invalid_argument("model config: d_t, depth, heads and mlp_ratio must be positive");
    if (d_t % heads != 0) throw std::invalid_argument("model config: d_t must be divisible by heads");
    if (views.empty()) throw std::invalid_argument("model config: no active views");
    if (!std::is_sorted(views.begin(), views.end()) || std::adjacent_find(views.begin(), views.end()) != views.end())
        throw std::invalid_argument("model config: views must be strictly ascending");
    for (int v : views) ViewConfig(n, v);
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("model config: dropout must lie in [0, 1)");
    if (ln_eps <= 0.0) throw std::invalid_argument("model config: ln_eps must be positive");
}

ModelConfig ModelConfig::full_scale() { return ModelConfig{}; }

ModelConfig ModelConfig::desk_scale() {
    ModelConfig c;
    c.n = 64;
    c.d_t = 64;
    c.depth = 2;
    c.heads = 4;
    c.mlp_ratio = 2;
    c.views = {0, 1, 2, 3};
    return c;
}

// --- parameters ------------------------------------------------------------

void append_named(const ViewParams& params, NamedTensors& out) {
    const std::string prefix = "view" + std::to_string(params.view.level()) + ".";
    out.emplace_back(prefix + "embed_w", params.embed_w);
    out.emplace_back(prefix + "embed_b", params.embed_b);
    out.emplace_back(prefix + "pos", params.pos);
    for (std::size_t j = 0; j < params.blocks.size(); ++j) {
        const auto& b = params.blocks[j];
        const std::string p = prefix + "block" + std::to_string(j) + ".";
        out.emplace_back(p + "ln1.gain", b.ln1.gain);
        out.emplace_back(p + "ln1.bias", b.ln1.bias);
        out.emplace_back(p + "wq", b.wq);
        out.emplace_back(p + "wk", b.wk);
        out.emplace_back(p + "wv", b.wv);
        out.emplace_back(p + "wo", b.wo);
        out.emplace_back(p + "ln2.gain", b.ln2.gain);
        out.emplace_back(p + "ln2.bias", b.ln2.bias);
        out.emplace_back(p + "fc1_w", b.fc1_w);
        out.emplace_back(p + "fc1_b", b.fc1_b);
        out.emplace_back(p + "fc2_w", b.fc2_w);
        out.emplace_back(p + "fc2_b", b.fc2_b);
    }
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void init_named(NamedTensors& named, std::uint64_t seed, double init_std) {
    const Rng root(seed);
    for (auto& [name, t] : named) {
        auto values = t.mutable_data();
        if (ends_with(name, ".gain")) {
            std::fill(values.begin(), values.end(), 1.0);
        } else if (ends_with(name, "_b") || ends_with(name, ".bias")) {
            std::fill(values.begin(), values.end(), 0.0);
        } else {
            Rng rng = root.split(fnv1a(name));
            for (auto& v : values) v = rng.truncated_normal(init_std);
        }
    }
}

Tensor param(Shape shape) { return Tensor::zeros(std::move(shape), true); }

}  // namespace

ViewParams init_view(const ModelConfig& config, int level, std::uint64_t seed, double init_std) {
    const ViewConfig view(config.n, level);
    const auto d = static_cast<std::size_t>(config.d_t);
    const auto hidden = d * static_cast<std::size_t>(config.mlp_ratio);
    ViewParams p{view, param({static_cast<std::size_t>(view.token_dim()), d}), param({d}),
                 param({static_cast<std::size_t>(view.token_count()), d}), {}};
    for (int j = 0; j < config.depth; ++j) {
        BlockParams b;
        b.ln1 = {param({d}), param({d})};
        b.ln2 = {param({d}), param({d})};
        b.wq = param({d, d});
        b.wk = param({d, d});
        b.wv = param({d, d});
        b.wo = param({d, d});
        b.fc1_w = param({d, hidden});
        b.fc1_b = param({hidden});
        b.fc2_w = param({hidden, d});
        b.fc2_b = param({d});
        p.blocks.push_back(std::move(b));
    }
    NamedTensors named;
    append_named(p, named);
    init_named(named, seed, init_std);
    return p;
}

// --- forward ---------------------------------------------------------------

Tensor split_patches(const Matrix& mel, const ViewConfig& view) {
    const auto n = static_cast<std::size_t>(view.side());
    if (mel.rows != n || mel.cols != n)
        throw std::invalid_argument("split_patches: expected " + std::to_string(n) + "x" + std::to_string(n) +
                                    " spectrogram, got " + std::to_string(mel.rows) + "x" + std::to_string(mel.cols));
    const auto mu = static_cast<std::size_t>(view.patch_freq());
    const auto nu = static_cast<std::size_t>(view.patch_time());
    const auto steps = static_cast<std::size_t>(view.time_steps());
    const auto tokens = static_cast<std::size_t>(view.token_count());
    const auto dim = mu * nu;
    std::vector<double> out(tokens * dim);
    for (std::size_t t = 0; t < tokens; ++t) {
        const std::size_t band = t / steps, step = t % steps;
        for (std::size_t r = 0; r < mu; ++r)
            for (std::size_t c = 0; c < nu; ++c) out[t * dim + r * nu + c] = mel(band * mu + r, step * nu + c);
    }
    return Tensor::from({tokens, dim}, std::move(out));
}

Tensor embed_tokens(const Tensor& tokens, const ViewParams& params) {
    if (tokens.cols() != params.embed_w.rows() || tokens.rows() != params.pos.rows())
        throw TensorError("embed_tokens: token matrix does not match the view's embedding");
    return add(add_row(matmul(tokens, params.embed_w), params.embed_b), params.pos);
}

Tensor msa(const Tensor& tokens, const BlockParams& block, const BlockOptions& options) {
    const auto d = tokens.cols();
    const auto heads = static_cast<std::size_t>(options.heads);
    if (heads == 0 || d % heads != 0) throw TensorError("msa: token dimension not divisible by head count");
    const auto head_dim = d / heads;
    const double scale_factor = 1.0 / std::sqrt(static_cast<double>(head_dim));

    const auto x = layer_norm(tokens, block.ln1.gain, block.ln1.bias, options.ln_eps);
    const auto q = matmul(x, block.wq);
    const auto k = matmul(x, block.wk);
    const auto v = matmul(x, block.wv);
    std::vector<Tensor> head_out;
    head_out.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const auto qh = slice_cols(q, h * head_dim, head_dim);
        const auto kh = slice_cols(k, h * head_dim, head_dim);
        const auto vh = slice_cols(v, h * head_dim, head_dim);
        const auto attn = softmax_rows(scale(matmul(qh, transpose(kh)), scale_factor));
        if (options.attention) options.attention->push_back(attn);
        head_out.push_back(matmul(attn, vh));
    }
    auto projected = matmul(concat_cols(head_out), block.wo);
    if (options.dropout > 0.0) projected = dropout(projected, options.dropout, *options.rng);
    return add(projected, tokens);
}

Tensor encoder_block(const Tensor& tokens, const BlockParams& block, const BlockOptions& options) {
    const auto z = msa(tokens, block, options);
    const auto y = layer_norm(z, block.ln2.gain, block.ln2.bias, options.ln_eps);
    const auto hidden = add_row(matmul(y, block.fc1_w), block.fc1_b);
    Tensor mlp;
    if (options.mlp_gelu == MlpGelu::outer)
        mlp = gelu(add_row(matmul(hidden, block.fc2_w), block.fc2_b));
    else
        mlp = add_row(matmul(gelu(hidden), block.fc2_w), block.fc2_b);
    if (options.dropout > 0.0) mlp = dropout(mlp, options.dropout, *options.rng);
    return add(mlp, z);
}

Tensor encode_view(const Tensor& embedded, const ViewParams& params, const BlockOptions& options, int depth) {
    const auto blocks = depth <= 0 ? params.blocks.size() : static_cast<std::size_t>(depth);
    if (blocks == 0 || blocks > params.blocks.size()) throw TensorError("encode_view: invalid depth");
    Tensor f = embedded;
    for (std::size_t j = 0; j < blocks; ++j) f = encoder_block(f, params.blocks[j], options);
    return f;
}

std::vector<Tensor> forward_all_views(const Matrix& mel, const std::vector<ViewParams>& views,
                                      const ModelConfig& config, Rng* dropout_rng) {
    if (views.empty()) throw std::invalid_argument("forward_all_views: no active views");
    if (config.dropout > 0.0 && dropout_rng == nullptr)
        throw std::invalid_argument("forward_all_views: dropout needs an RNG");
    BlockOptions options{config.heads, config.mlp_gelu, config.ln_eps, dropout_rng ? config.dropout : 0.0,
                         dropout_rng, nullptr};
    std::vector<Tensor> out;
    out.reserve(views.size());
    for (const auto& v : views) out.push_back(encode_view(embed_tokens(split_patches(mel, v.view), v), v, options));
    return out;
}

}  // namespace mvst::model
