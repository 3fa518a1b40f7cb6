#include "swapgt/cache.hpp"

#include "swapgt/config.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace swapgt {

namespace {

// explicit little-endian scalar I/O keeps the format stable across hosts

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in) {
    const std::uint64_t bits = get_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_i32_array(std::ostream& out, const std::vector<std::int32_t>& a) {
    put_u64(out, a.size());
    for (std::int32_t v : a) put_u32(out, static_cast<std::uint32_t>(v));
}

std::vector<std::int32_t> get_i32_array(std::istream& in) {
    const std::uint64_t len = get_u64(in);
    std::vector<std::int32_t> a(len);
    for (auto& v : a) v = static_cast<std::int32_t>(get_u32(in));
    return a;
}

void put_string(std::ostream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const std::uint64_t len = get_u64(in);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    return s;
}

void put_header(std::ostream& out, const CacheHeader& h) {
    out.write(h.magic, 4);
    put_u32(out, h.version);
    put_u64(out, h.n);
    put_u64(out, h.d);
    put_u64(out, h.k);
    put_u64(out, h.s);
    put_u64(out, h.seed);
    put_u64(out, h.digest);
}

bool get_header(std::istream& in, CacheHeader& h) {
    in.read(h.magic, 4);
    if (!in || std::memcmp(h.magic, "SWGT", 4) != 0) return false;
    h.version = get_u32(in);
    h.n = get_u64(in);
    h.d = get_u64(in);
    h.k = get_u64(in);
    h.s = get_u64(in);
    h.seed = get_u64(in);
    h.digest = get_u64(in);
    return static_cast<bool>(in);
}

void put_table(std::ostream& out, const TokenTable& t) {
    put_u32(out, static_cast<std::uint32_t>(t.view));
    put_u64(out, t.n);
    put_u64(out, t.k);
    put_i32_array(out, t.ids);
}

TokenTable get_table(std::istream& in) {
    TokenTable t;
    t.view = static_cast<ViewTag>(get_u32(in));
    t.n = get_u64(in);
    t.k = get_u64(in);
    t.ids = get_i32_array(in);
    return t;
}

void put_batch(std::ostream& out, const SequenceBatch& b) {
    put_u32(out, static_cast<std::uint32_t>(b.view));
    put_u64(out, b.n);
    put_u64(out, b.k);
    put_u64(out, b.s);
    put_u64(out, b.seed);
    put_i32_array(out, b.ids);
}

SequenceBatch get_batch(std::istream& in) {
    SequenceBatch b;
    b.view = static_cast<ViewTag>(get_u32(in));
    b.n = get_u64(in);
    b.k = get_u64(in);
    b.s = get_u64(in);
    b.seed = get_u64(in);
    b.ids = get_i32_array(in);
    return b;
}

} // namespace

CacheHeader make_cache_header(const Graph& g, const TrainConfig& cfg, std::uint64_t seed) {
    CacheHeader h;
    h.n = g.n;
    h.d = g.d;
    h.k = cfg.k;
    h.s = apply_variant(cfg).s;
    h.seed = seed;
    h.digest = tokenizer_digest(cfg);
    return h;
}

void save_prepared(const std::string& path, const CacheHeader& header, const PreparedData& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cache: cannot write " + path);
    put_header(out, header);
    put_table(out, data.attr_table);
    put_table(out, data.topo_table);
    put_batch(out, data.attr_seq);
    put_batch(out, data.topo_seq);
    if (!out) throw std::runtime_error("cache: write failed for " + path);
}

bool load_prepared(const std::string& path, const CacheHeader& expected, PreparedData& data) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    CacheHeader stored;
    if (!get_header(in, stored)) return false;
    if (!(stored == expected)) return false;
    PreparedData loaded;
    loaded.attr_table = get_table(in);
    loaded.topo_table = get_table(in);
    loaded.attr_seq = get_batch(in);
    loaded.topo_seq = get_batch(in);
    if (!in) return false;
    data = std::move(loaded);
    return true;
}

void save_checkpoint(const std::string& path, const std::string& config_text,
                     std::uint64_t split_seed, std::uint64_t init_seed,
                     const ParamStore& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write("SWGP", 4);
    put_u32(out, 1);
    put_string(out, config_text);
    put_u64(out, split_seed);
    put_u64(out, init_seed);
    put_u64(out, params.names().size());
    for (const auto& name : params.names()) {
        const Tensor& t = params.at(name)->value;
        put_string(out, name);
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) put_u64(out, d);
        for (std::size_t i = 0; i < t.size(); ++i) put_f64(out, t[i]);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SWGP", 4) != 0)
        throw std::runtime_error("checkpoint: " + path + " is not a checkpoint file");
    const std::uint32_t version = get_u32(in);
    if (version != 1)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    Checkpoint ck;
    ck.config_text = get_string(in);
    ck.split_seed = get_u64(in);
    ck.init_seed = get_u64(in);
    const std::uint64_t count = get_u64(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string name = get_string(in);
        const std::uint32_t rank = get_u32(in);
        if (rank == 0 || rank > 3) throw std::runtime_error("checkpoint: bad tensor rank");
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = get_u64(in);
        Tensor t(shape);
        for (std::size_t j = 0; j < t.size(); ++j) t[j] = get_f64(in);
        ck.params.emplace_back(name, std::move(t));
    }
    if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
    return ck;
}

} // namespace swapgt
