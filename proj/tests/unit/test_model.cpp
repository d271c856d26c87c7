#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mvst/model.hpp"
#include "mvst/network.hpp"
#include "mvst/rng.hpp"
#include "oracles.hpp"

using namespace mvst;
using namespace mvst::model;

namespace {

Matrix random_mel(std::size_t n, std::uint64_t seed) { return Matrix(n, n, oracle::random_vector(n * n, seed, 0, 1)); }

ModelConfig small_config() {
    ModelConfig c;
    c.n = 16;
    c.d_t = 8;
    c.depth = 2;
    c.heads = 2;
    c.mlp_ratio = 2;
    c.views = {0, 1, 2};
    return c;
}

void zero_out(BlockParams& b) {
    for (Tensor* t : {&b.wq, &b.wk, &b.wv, &b.wo, &b.fc1_w, &b.fc1_b, &b.fc2_w, &b.fc2_b})
        std::fill(t->mutable_data().begin(), t->mutable_data().end(), 0.0);
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
    std::vector<double> out(x.size());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) out[r * x.cols() + c] = x.at(perm[r], c);
    return Tensor::from(x.shape(), std::move(out));
}

std::vector<std::size_t> random_perm(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    Rng r(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[r.below(i)]);
    return p;
}

}  // namespace

TEST_CASE("view geometry") {
    for (int level = 0; level <= 4; ++level) {
        const ViewConfig v(256, level);
        CHECK(v.patch_freq() == 256 >> level);
        CHECK(v.patch_time() == 1 << level);
        CHECK(v.token_count() == 256);
        CHECK(v.token_dim() == 256);
    }
    CHECK(ViewConfig::max_level(256) == 4);
    CHECK(ViewConfig::max_level(64) == 3);
    CHECK(ViewConfig::max_level(32) == 2);
    CHECK_THROWS(ViewConfig(256, 5));
    CHECK_THROWS(ViewConfig(48, 0));
}

TEST_CASE("patch split is a lossless tiling") {
    for (int level = 0; level <= 4; ++level) {
        const ViewConfig v(256, level);
        const auto mel = random_mel(256, 40 + level);
        const auto tokens = split_patches(mel, v);
        CHECK(tokens.rows() == 256);
        CHECK(tokens.cols() == 256);
        const std::vector<double> flat(tokens.data().begin(), tokens.data().end());
        CHECK(oracle::reassemble(flat, 256, v.patch_freq(), v.patch_time()) == mel);
    }
    CHECK_THROWS(split_patches(Matrix(64, 32), ViewConfig(64, 1)));
}

TEST_CASE("patch ordering golden on 4x4") {
    Matrix m(4, 4);
    for (std::size_t i = 0; i < 16; ++i) m.values[i] = static_cast<double>(i);
    // level 1: 2x2 tiles, frequency-major
    const auto t = split_patches(m, ViewConfig(4, 1));
    const std::vector<double> expect{0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15};
    CHECK(std::vector<double>(t.data().begin(), t.data().end()) == expect);
    // level 0: one full-height column per token
    const auto c = split_patches(m, ViewConfig(4, 0));
    CHECK(c.at(1, 0) == 1.0);
    CHECK(c.at(1, 3) == 13.0);
}

TEST_CASE("constant spectrogram gives identical tokens") {
    const auto t = split_patches(Matrix(64, 64, 0.7), ViewConfig(64, 2));
    for (double v : t.data()) CHECK(v == 0.7);
}

TEST_CASE("embedding of zero tokens is the positional table") {
    const auto cfg = small_config();
    auto p = init_view(cfg, 1, 3, 0.2);
    std::fill(p.embed_b.mutable_data().begin(), p.embed_b.mutable_data().end(), 0.0);
    const auto e = embed_tokens(Tensor::zeros({16, 16}), p);
    CHECK(std::vector<double>(e.data().begin(), e.data().end()) ==
          std::vector<double>(p.pos.data().begin(), p.pos.data().end()));
}

TEST_CASE("positional table breaks permutation symmetry") {
    const auto cfg = small_config();
    const auto p = init_view(cfg, 1, 3, 0.2);
    const auto tokens = split_patches(random_mel(16, 1), p.view);
    const auto perm = random_perm(16, 2);
    const auto a = permute_rows(embed_tokens(tokens, p), perm);
    const auto b = embed_tokens(permute_rows(tokens, perm), p);
    double diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a.at(i) - b.at(i)));
    CHECK(diff > 1e-3);
}

TEST_CASE("self-attention is permutation equivariant") {
    const auto cfg = small_config();
    const auto p = init_view(cfg, 0, 5, 0.3);
    const BlockOptions opt{cfg.heads};
    const auto x = Tensor::from({16, 8}, oracle::random_vector(128, 8));
    const auto perm = random_perm(16, 9);
    const auto a = permute_rows(msa(x, p.blocks[0], opt), perm);
    const auto b = msa(permute_rows(x, perm), p.blocks[0], opt);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.at(i) == doctest::Approx(b.at(i)).epsilon(1e-12));
    const auto c = permute_rows(encoder_block(x, p.blocks[0], opt), perm);
    const auto d = encoder_block(permute_rows(x, perm), p.blocks[0], opt);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c.at(i) == doctest::Approx(d.at(i)).epsilon(1e-12));
}

TEST_CASE("attention weights are row-stochastic") {
    const auto cfg = small_config();
    const auto p = init_view(cfg, 2, 6, 0.5);
    std::vector<Tensor> attn;
    BlockOptions opt{cfg.heads};
    opt.attention = &attn;
    msa(Tensor::from({16, 8}, oracle::random_vector(128, 3, -3, 3)), p.blocks[0], opt);
    REQUIRE(attn.size() == 2);
    for (const auto& a : attn) {
        CHECK(a.rows() == 16);
        CHECK(a.cols() == 16);
        for (std::size_t r = 0; r < 16; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < 16; ++c) {
                CHECK(a.at(r, c) >= 0.0);
                s += a.at(r, c);
            }
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("a single token attends only to itself") {
    auto cfg = small_config();
    const auto p = init_view(cfg, 0, 1, 0.5);
    std::vector<Tensor> attn;
    BlockOptions opt{cfg.heads};
    opt.attention = &attn;
    msa(Tensor::from({1, 8}, oracle::random_vector(8, 4)), p.blocks[0], opt);
    for (const auto& a : attn) CHECK(a.item() == 1.0);
}

TEST_CASE("zeroed blocks are exact identities") {
    const auto cfg = small_config();
    auto p = init_view(cfg, 1, 7, 0.2);
    const auto x = Tensor::from({16, 8}, oracle::random_vector(128, 5));
    const BlockOptions opt{cfg.heads};
    auto zero = p.blocks[0];
    zero_out(zero);
    for (const auto gelu : {MlpGelu::outer, MlpGelu::inner}) {
        BlockOptions o = opt;
        o.mlp_gelu = gelu;
        const auto y = encoder_block(x, zero, o);
        CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>(x.data().begin(), x.data().end()));
    }
    zero_out(p.blocks[1]);
    const auto one = encode_view(x, p, opt, 1), two = encode_view(x, p, opt, 2);
    CHECK(std::vector<double>(one.data().begin(), one.data().end()) ==
          std::vector<double>(two.data().begin(), two.data().end()));
}

TEST_CASE("GELU placement changes the block") {
    const auto cfg = small_config();
    const auto p = init_view(cfg, 1, 7, 0.3);
    const auto x = Tensor::from({16, 8}, oracle::random_vector(128, 5));
    BlockOptions outer{cfg.heads}, inner{cfg.heads};
    inner.mlp_gelu = MlpGelu::inner;
    const auto a = encoder_block(x, p.blocks[0], outer), b = encoder_block(x, p.blocks[0], inner);
    double diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a.at(i) - b.at(i)));
    CHECK(diff > 1e-4);
}

TEST_CASE("init follows the transformer recipe") {
    ModelConfig cfg = ModelConfig::desk_scale();
    const auto p = init_view(cfg, 2, 11);
    NamedTensors named;
    append_named(p, named);
    for (const auto& [name, t] : named) {
        CAPTURE(name);
        const auto v = t.data();
        if (name.ends_with(".gain")) {
            for (double x : v) CHECK(x == 1.0);
        } else if (name.ends_with("_b") || name.ends_with(".bias")) {
            for (double x : v) CHECK(x == 0.0);
        } else {
            double ss = 0;
            for (double x : v) {
                CHECK(std::abs(x) <= 0.04);
                ss += x * x;
            }
            // std of a normal truncated at ±2σ is 0.8796σ
            CHECK(std::sqrt(ss / v.size()) == doctest::Approx(0.8796 * 0.02).epsilon(0.1));
        }
    }
    // same name and seed -> same draw, regardless of the other views
    const auto q = init_view(cfg, 2, 11);
    CHECK(std::vector<double>(q.blocks[1].wk.data().begin(), q.blocks[1].wk.data().end()) ==
          std::vector<double>(p.blocks[1].wk.data().begin(), p.blocks[1].wk.data().end()));
}

TEST_CASE("model config validation") {
    auto c = ModelConfig::desk_scale();
    CHECK_NOTHROW(c.validate());
    c.heads = 3;
    CHECK_THROWS(c.validate());
    c = ModelConfig::desk_scale();
    c.views = {1, 0};
    CHECK_THROWS(c.validate());
    c.views = {4};
    CHECK_THROWS(c.validate());
    c.views = {};
    CHECK_THROWS(c.validate());
}

TEST_CASE("views are isolated until fusion") {
    const auto cfg = small_config();
    std::vector<ViewParams> views;
    for (int l : cfg.views) views.push_back(init_view(cfg, l, 21, 0.2));
    const auto feats = forward_all_views(random_mel(16, 3), views, cfg);
    REQUIRE(feats.size() == 3);
    for (const auto& f : feats) {
        CHECK(f.rows() == 16);
        CHECK(f.cols() == 8);
    }
    backward(sum(feats[1]));
    NamedTensors named;
    for (const auto& v : views) append_named(v, named);
    for (const auto& [name, t] : named) {
        CAPTURE(name);
        const auto g = t.has_grad() ? t.grad() : std::vector<double>{};
        const bool touched = std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; });
        if (name.starts_with("view1.")) {
            CHECK(touched);
        } else {
            CHECK_FALSE(touched);
        }
    }
}

TEST_CASE("every network parameter receives a finite gradient") {
    NetworkConfig nc;
    nc.model = small_config();
    nc.init_std = 0.2;
    Network net(nc, 4);
    const int label = 2;
    backward(cross_entropy(net.forward(random_mel(16, 6)), std::span(&label, 1)));
    for (const auto& [name, t] : net.named_parameters()) {
        CAPTURE(name);
        REQUIRE(t.has_grad());
        const auto grad = t.grad();
        for (double g : grad) CHECK(std::isfinite(g));
        CHECK(std::any_of(grad.begin(), grad.end(), [](double g) { return g != 0.0; }));
    }
}
