#include "mvst/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "mvst/hash.hpp"

namespace mvst {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'S', 'T'};

class Writer {
public:
    template <typename T>
    void uint(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::string_view s) { out_.append(s); }
    void doubles(std::span<const double> v) {
        for (double x : v) f64(x);
    }
    std::string& str() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    template <typename T>
    T uint() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return v;
    }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::vector<double> doubles(std::size_t n) {
        need(n * 8);
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
    }
    std::string_view in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const RunConfig& config, std::uint64_t init_seed, const Network& net,
                              const AdamWState& optimizer, const Rng& rng, std::int64_t epoch) {
    const auto named = net.named_parameters();
    const bool has_moments = !optimizer.m.empty();
    if (has_moments && (optimizer.m.size() != named.size() || optimizer.v.size() != named.size()))
        throw CheckpointError("optimizer moments do not match the parameter list");

    Writer w;
    w.bytes(std::string_view(kMagic, 4));
    w.uint(kCheckpointVersion);
    const auto text = to_text(config);
    w.uint<std::uint64_t>(text.size());
    w.bytes(text);
    w.uint(init_seed);
    w.uint<std::uint64_t>(named.size());
    for (const auto& [name, t] : named) {
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(t.dim()));
        for (auto d : t.shape()) w.uint<std::uint64_t>(d);
        w.doubles(t.data());
    }
    w.uint(optimizer.step);
    w.f64(optimizer.lr);
    w.f64(optimizer.beta1);
    w.f64(optimizer.beta2);
    w.f64(optimizer.eps);
    w.f64(optimizer.weight_decay);
    w.uint<std::uint8_t>(has_moments ? 1 : 0);
    if (has_moments)
        for (std::size_t i = 0; i < named.size(); ++i) {
            if (optimizer.m[i].size() != named[i].second.size() || optimizer.v[i].size() != named[i].second.size())
                throw CheckpointError("optimizer moment size differs for " + named[i].first);
            w.doubles(optimizer.m[i]);
            w.doubles(optimizer.v[i]);
        }
    w.uint(rng.key());
    w.uint(rng.counter());
    w.uint(static_cast<std::uint64_t>(epoch));
    w.uint(fnv1a(w.str()));
    return std::move(w.str());
}

CheckpointData decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < 16 || bytes.compare(0, 4, kMagic, 4) != 0) throw CheckpointError("not an MVST checkpoint");
    const std::string_view body(bytes.data(), bytes.size() - 8);
    Reader tail(std::string_view(bytes).substr(bytes.size() - 8));
    if (tail.uint<std::uint64_t>() != fnv1a(body)) throw CheckpointError("checkpoint digest mismatch");

    Reader r(body);
    r.bytes(4);
    if (const auto version = r.uint<std::uint32_t>(); version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

    CheckpointData data;
    const auto text = r.bytes(r.uint<std::uint64_t>());
    data.config = RunConfig{};
    apply_config_text(data.config, text);
    data.config.finalize();
    data.init_seed = r.uint<std::uint64_t>();

    const auto count = r.uint<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
        StoredTensor t;
        t.name = r.bytes(r.uint<std::uint32_t>());
        const auto ndim = r.uint<std::uint32_t>();
        std::size_t size = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            t.shape.push_back(static_cast<std::size_t>(r.uint<std::uint64_t>()));
            size *= t.shape.back();
        }
        if (size * 8 > r.remaining()) throw CheckpointError("checkpoint truncated in tensor " + t.name);
        t.data = r.doubles(size);
        data.tensors.push_back(std::move(t));
    }

    auto& opt = data.optimizer;
    opt.step = r.uint<std::uint64_t>();
    opt.lr = r.f64();
    opt.beta1 = r.f64();
    opt.beta2 = r.f64();
    opt.eps = r.f64();
    opt.weight_decay = r.f64();
    if (r.uint<std::uint8_t>() != 0)
        for (const auto& t : data.tensors) {
            opt.m.push_back(r.doubles(t.data.size()));
            opt.v.push_back(r.doubles(t.data.size()));
        }
    data.rng_key = r.uint<std::uint64_t>();
    data.rng_counter = r.uint<std::uint64_t>();
    data.epoch = static_cast<std::int64_t>(r.uint<std::uint64_t>());
    if (r.remaining() != 0) throw CheckpointError("trailing bytes in checkpoint");
    return data;
}

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, std::uint64_t init_seed,
                     const Network& net, const AdamWState& optimizer, const Rng& rng, std::int64_t epoch) {
    const auto bytes = encode_checkpoint(config, init_seed, net, optimizer, rng, epoch);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw CheckpointError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_checkpoint(ss.str());
}

void restore_parameters(const CheckpointData& data, Network& net) {
    auto named = net.named_parameters();
    if (named.size() != data.tensors.size())
        throw CheckpointError("architecture mismatch: checkpoint has " + std::to_string(data.tensors.size()) +
                              " tensors, network has " + std::to_string(named.size()));
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto& stored = data.tensors[i];
        const auto& name = named[i].first;
        const auto& t = named[i].second;
        if (stored.name != name || stored.shape != t.shape())
            throw CheckpointError("architecture mismatch at tensor " + std::to_string(i) + ": checkpoint has '" +
                                  stored.name + "', network expects '" + name + "'");
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
        auto dst = named[i].second.mutable_data();
        std::copy(data.tensors[i].data.begin(), data.tensors[i].data.end(), dst.begin());
    }
}

Network network_from_checkpoint(const CheckpointData& data) {
    Network net(data.config.net, data.init_seed);
    restore_parameters(data, net);
    return net;
}

}  // namespace mvst
