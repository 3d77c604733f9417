#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cabrita {

struct ModelConfig {
    int32_t vocab_size = 0;
    int32_t d_model = 64;
    int32_t n_layers = 2;
    int32_t n_heads = 4;
    int32_t d_ff = 256;
    int32_t max_seq_len = 128;
    double rope_base = 10000.0;
    double rmsnorm_eps = 1e-6;

    bool operator==(const ModelConfig&) const = default;
};

// Row-major float32 tensor. Matrices are [rows x cols]; vectors have a
// single-entry shape.
struct Tensor {
    std::string name;
    std::vector<int64_t> shape;
    std::vector<float> data;

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        return n;
    }
    bool operator==(const Tensor&) const = default;
};

// A model checkpoint: config plus named tensors in a stable order.
// Layout per layer l: layers.l.attn_norm, layers.l.wq/wk/wv/wo,
// layers.l.ffn_norm, layers.l.w1/w3/w2; plus embedding, final_norm, head.
struct Checkpoint {
    ModelConfig config;
    std::vector<Tensor> tensors;

    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);
    bool has(const std::string& name) const;

    bool operator==(const Checkpoint&) const = default;
};

// How appended embedding/head rows are filled.
struct InitStrategy {
    enum class Kind { mean_of_existing, mean_plus_gaussian };
    Kind kind = Kind::mean_of_existing;
    double sigma = 0.0;
    uint64_t seed = 0;

    static InitStrategy mean() { return {}; }
    static InitStrategy gaussian(double sigma, uint64_t seed) {
        return {Kind::mean_plus_gaussian, sigma, seed};
    }
};

// Binary container: magic "CBRT", u32 version, u64 header length, JSON header
// (config + tensor manifest with byte offsets), then little-endian float32
// payloads in manifest order. save followed by load reproduces the tensor
// payload bit for bit.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Grows embedding and head to new_vocab rows. Rows 0..V-1 are bit-identical
// to the input; appended rows are the column-wise mean of the original rows,
// optionally plus seeded gaussian noise. Everything else is untouched.
Checkpoint resize_embeddings(const Checkpoint& ckpt, int32_t new_vocab, const InitStrategy& init);

// Fresh checkpoint with gaussian(0, 0.02) weights and unit norm gains,
// deterministic in the seed.
Checkpoint random_checkpoint(const ModelConfig& config, uint64_t seed);

// Deterministic standard-normal sampler: Box-Muller over mt19937_64 output,
// identical across platforms (std::normal_distribution is not).
class GaussianSource {
public:
    explicit GaussianSource(uint64_t seed) : engine_(seed) {}
    double next();
    // Uniform in [0, 1).
    double uniform();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace cabrita
