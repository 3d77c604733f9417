#include "cabrita/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cabrita/error.hpp"

namespace cabrita {

using json = nlohmann::json;

const Tensor& Checkpoint::at(const std::string& name) const {
    for (const Tensor& t : tensors)
        if (t.name == name) return t;
    throw DataError("checkpoint has no tensor named " + name);
}

Tensor& Checkpoint::at(const std::string& name) {
    for (Tensor& t : tensors)
        if (t.name == name) return t;
    throw DataError("checkpoint has no tensor named " + name);
}

bool Checkpoint::has(const std::string& name) const {
    return std::any_of(tensors.begin(), tensors.end(),
                       [&](const Tensor& t) { return t.name == name; });
}

double GaussianSource::uniform() {
    // 53-bit mantissa from the top bits; in [0, 1).
    return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
}

double GaussianSource::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

// ---------------------------------------------------------------------------
// Container format
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'B', 'R', 'T'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FormatError("truncated checkpoint header");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw FormatError("truncated checkpoint header");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

json config_to_json(const ModelConfig& c) {
    return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model},
            {"n_layers", c.n_layers},     {"n_heads", c.n_heads},
            {"d_ff", c.d_ff},             {"max_seq_len", c.max_seq_len},
            {"rope_base", c.rope_base},   {"rmsnorm_eps", c.rmsnorm_eps}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    try {
        c.vocab_size = j.at("vocab_size").get<int32_t>();
        c.d_model = j.at("d_model").get<int32_t>();
        c.n_layers = j.at("n_layers").get<int32_t>();
        c.n_heads = j.at("n_heads").get<int32_t>();
        c.d_ff = j.at("d_ff").get<int32_t>();
        c.max_seq_len = j.at("max_seq_len").get<int32_t>();
        c.rope_base = j.at("rope_base").get<double>();
        c.rmsnorm_eps = j.at("rmsnorm_eps").get<double>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad checkpoint config: ") + e.what());
    }
    return c;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json manifest = json::array();
    uint64_t offset = 0;
    for (const Tensor& t : ckpt.tensors) {
        if (t.numel() != static_cast<int64_t>(t.data.size()))
            throw DataError("tensor " + t.name + " shape does not match its data size");
        manifest.push_back(
            {{"name", t.name}, {"shape", t.shape}, {"dtype", "f32"}, {"offset", offset}});
        offset += static_cast<uint64_t>(t.data.size()) * 4;
    }
    json header = {{"config", config_to_json(ckpt.config)}, {"tensors", manifest}};
    const std::string header_bytes = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    f.write(kMagic, 4);
    write_u32(f, kVersion);
    write_u64(f, header_bytes.size());
    f.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    for (const Tensor& t : ckpt.tensors) {
        for (float v : t.data) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            write_u32(f, bits);
        }
    }
    if (!f) throw DataError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);

    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("not a checkpoint file (bad magic): " + path);
    const uint32_t version = read_u32(f);
    if (version != kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const uint64_t header_len = read_u64(f);
    std::string header_bytes(header_len, '\0');
    f.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
    if (!f) throw FormatError("truncated checkpoint header");

    json header;
    try {
        header = json::parse(header_bytes);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("bad checkpoint header: ") + e.what());
    }
    if (!header.contains("config") || !header.contains("tensors") || !header["tensors"].is_array())
        throw FormatError("checkpoint header missing config or tensor manifest");

    Checkpoint ckpt;
    ckpt.config = config_from_json(header["config"]);

    uint64_t expected_offset = 0;
    for (const json& entry : header["tensors"]) {
        Tensor t;
        try {
            t.name = entry.at("name").get<std::string>();
            t.shape = entry.at("shape").get<std::vector<int64_t>>();
            if (entry.at("dtype").get<std::string>() != "f32")
                throw FormatError("unsupported dtype for tensor " + t.name);
            if (entry.at("offset").get<uint64_t>() != expected_offset)
                throw FormatError("manifest offset mismatch for tensor " + t.name);
        } catch (const json::exception& e) {
            throw FormatError(std::string("bad tensor manifest: ") + e.what());
        }
        for (int64_t d : t.shape)
            if (d <= 0) throw FormatError("non-positive dimension in tensor " + t.name);
        t.data.resize(static_cast<std::size_t>(t.numel()));
        expected_offset += static_cast<uint64_t>(t.data.size()) * 4;
        ckpt.tensors.push_back(std::move(t));
    }
    for (Tensor& t : ckpt.tensors) {
        for (float& v : t.data) {
            unsigned char b[4];
            f.read(reinterpret_cast<char*>(b), 4);
            if (!f)
                throw FormatError("truncated payload: tensor " + t.name +
                                  " extends past end of file");
            uint32_t bits = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                            (static_cast<uint32_t>(b[2]) << 16) |
                            (static_cast<uint32_t>(b[3]) << 24);
            std::memcpy(&v, &bits, 4);
        }
    }
    // Trailing bytes mean the manifest disagrees with the payload.
    f.peek();
    if (!f.eof()) throw FormatError("payload longer than manifest declares: " + path);
    return ckpt;
}

// ---------------------------------------------------------------------------
// Surgery
// ---------------------------------------------------------------------------

namespace {

void grow_rows(Tensor& t, int32_t old_rows, int32_t new_rows, const InitStrategy& init,
               GaussianSource* noise) {
    if (t.shape.size() != 2 || t.shape[0] != old_rows)
        throw DataError("tensor " + t.name + " is not a [vocab x d] matrix");
    const int64_t cols = t.shape[1];
    std::vector<double> col_mean(static_cast<std::size_t>(cols), 0.0);
    for (int64_t r = 0; r < old_rows; ++r)
        for (int64_t c = 0; c < cols; ++c)
            col_mean[static_cast<std::size_t>(c)] +=
                t.data[static_cast<std::size_t>(r * cols + c)];
    for (double& m : col_mean) m /= static_cast<double>(old_rows);

    t.shape[0] = new_rows;
    t.data.resize(static_cast<std::size_t>(new_rows) * static_cast<std::size_t>(cols));
    for (int64_t r = old_rows; r < new_rows; ++r) {
        for (int64_t c = 0; c < cols; ++c) {
            double v = col_mean[static_cast<std::size_t>(c)];
            if (init.kind == InitStrategy::Kind::mean_plus_gaussian)
                v += init.sigma * noise->next();
            t.data[static_cast<std::size_t>(r * cols + c)] = static_cast<float>(v);
        }
    }
}

} // namespace

Checkpoint resize_embeddings(const Checkpoint& ckpt, int32_t new_vocab,
                             const InitStrategy& init) {
    const int32_t old_vocab = ckpt.config.vocab_size;
    if (new_vocab < old_vocab)
        throw DataError("cannot shrink vocabulary from " + std::to_string(old_vocab) + " to " +
                        std::to_string(new_vocab));
    if (init.sigma < 0.0) throw DataError("gaussian sigma must be non-negative");

    Checkpoint out = ckpt;
    out.config.vocab_size = new_vocab;
    GaussianSource noise(init.seed);
    grow_rows(out.at("embedding"), old_vocab, new_vocab, init, &noise);
    grow_rows(out.at("head"), old_vocab, new_vocab, init, &noise);
    return out;
}

Checkpoint random_checkpoint(const ModelConfig& config, uint64_t seed) {
    if (config.vocab_size <= 0 || config.d_model <= 0 || config.n_layers < 0 ||
        config.n_heads <= 0 || config.d_ff <= 0 || config.max_seq_len <= 0)
        throw DataError("model config dimensions must be positive");
    if (config.d_model % config.n_heads != 0)
        throw DataError("d_model must be divisible by n_heads");

    GaussianSource noise(seed);
    Checkpoint ckpt;
    ckpt.config = config;
    auto add = [&](const std::string& name, std::vector<int64_t> shape, bool is_gain) {
        Tensor t;
        t.name = name;
        t.shape = std::move(shape);
        t.data.resize(static_cast<std::size_t>(t.numel()));
        for (float& v : t.data)
            v = is_gain ? 1.0f : static_cast<float>(0.02 * noise.next());
        ckpt.tensors.push_back(std::move(t));
    };
    const int64_t V = config.vocab_size;
    const int64_t d = config.d_model;
    const int64_t ff = config.d_ff;
    add("embedding", {V, d}, false);
    for (int32_t l = 0; l < config.n_layers; ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        add(p + "attn_norm", {d}, true);
        add(p + "wq", {d, d}, false);
        add(p + "wk", {d, d}, false);
        add(p + "wv", {d, d}, false);
        add(p + "wo", {d, d}, false);
        add(p + "ffn_norm", {d}, true);
        add(p + "w1", {ff, d}, false);
        add(p + "w3", {ff, d}, false);
        add(p + "w2", {d, ff}, false);
    }
    add("final_norm", {d}, true);
    add("head", {V, d}, false);
    return ckpt;
}

} // namespace cabrita
