#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cabrita/checkpoint.hpp"
#include "cabrita/packing.hpp"

namespace cabrita {

// Checkpoint tensors lifted to the working scalar type. float runs the normal
// profile; double drives gradient checks and tight-equivalence tests.
template <typename T>
struct TypedTensor {
    std::string name;
    std::vector<int64_t> shape;
    std::vector<T> data;
};

template <typename T>
struct TypedModel {
    ModelConfig config;
    std::vector<TypedTensor<T>> tensors;

    static TypedModel from_checkpoint(const Checkpoint& ckpt);
    Checkpoint to_checkpoint() const;
    TypedModel zeros_like() const;
    const TypedTensor<T>& at(std::string_view name) const;
    TypedTensor<T>& at(std::string_view name);
};

// y_i = x_i / sqrt(mean_j(x_j^2) + eps) * gain_i
template <typename T>
std::vector<T> rmsnorm(const std::vector<T>& x, const std::vector<T>& gain, T eps);

// Rotates consecutive pairs (x_{2i}, x_{2i+1}) of each row by
// theta_i = position * base^(-2i/d_head). x is [seq x d_head] row-major;
// d_head must be even.
template <typename T>
std::vector<T> rope_apply(const std::vector<T>& x, int64_t seq, int64_t d_head,
                          const std::vector<int64_t>& positions, double base);

// W2 (silu(W1 x) ⊙ (W3 x)); w1/w3 are [d_ff x d_model], w2 is [d_model x d_ff],
// all row-major.
template <typename T>
std::vector<T> swiglu_ffn(const std::vector<T>& x, const std::vector<T>& w1,
                          const std::vector<T>& w3, const std::vector<T>& w2, int64_t d_ff,
                          int64_t d_model);

// Decoder-only forward pass: pre-norm blocks x += attn(rmsnorm(x));
// x += swiglu_ffn(rmsnorm(x)); final rmsnorm; logits = head · x. Attention is
// causal. All sequences in the batch must share one length <= max_seq_len.
// Returns [batch x seq x vocab] row-major.
template <typename T>
std::vector<T> forward(const TypedModel<T>& model,
                       const std::vector<std::vector<uint32_t>>& tokens);

std::vector<float> forward(const Checkpoint& ckpt,
                           const std::vector<std::vector<uint32_t>>& tokens);

// Mean token-level cross-entropy. logits is [N x vocab] flat; targets has N
// entries.
template <typename T>
T causal_lm_loss(const std::vector<T>& logits, const std::vector<uint32_t>& targets,
                 int64_t vocab);

// Forward + manual backward over full packed rows: inputs row[0..L-2] predict
// targets row[1..L-1]. Returns mean cross-entropy over all positions in the
// batch; when grads is non-null, d(mean loss)/d(param) * scale is added into
// it (layout must match the model).
template <typename T>
T lm_loss_and_gradients(const TypedModel<T>& model,
                        const std::vector<std::vector<uint32_t>>& sequences, TypedModel<T>* grads,
                        T scale = T(1));

// Linear warmup from zero to peak_lr, then cosine decay to final_lr, then
// constant final_lr.
struct TrainingSchedule {
    int64_t warmup_steps = 2000;
    double peak_lr = 3e-4;
    double final_lr = 3e-5;
    int64_t decay_steps = 248000;
};

double lr_at(int64_t step, const TrainingSchedule& s);

struct AdamwHyper {
    double beta1 = 0.9;
    double beta2 = 0.99;
    double weight_decay = 0.1;
    double clip_norm = 1.0;
    double epsilon = 1e-8;
};

template <typename T>
struct OptimizerState {
    int64_t step = 0;
    std::vector<std::vector<T>> m; // first moments, one block per tensor
    std::vector<std::vector<T>> v; // second moments

    static OptimizerState like(const TypedModel<T>& model);
};

// Global-norm clip, then bias-corrected Adam update with decoupled weight
// decay. Returns the pre-clip global gradient norm.
template <typename T>
double adamw_step(TypedModel<T>& params, const TypedModel<T>& grads, OptimizerState<T>& state,
                  const AdamwHyper& hyper, double lr);

enum class Precision { f32, f64 };

struct TraceRow {
    int64_t step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<TraceRow> trace;
};

// Optimizer steps over packed rows consumed in order, cycling; each step
// averages gradients over `accumulation` micro-batches of `micro_batch`
// sequences. Deterministic: single-threaded, no shuffling. Step s (1-based)
// uses lr_at(s).
TrainResult train(const Checkpoint& start, const PackedSequences& data,
                  const TrainingSchedule& schedule, const AdamwHyper& hyper, int64_t micro_batch,
                  int64_t accumulation, int64_t steps, Precision precision = Precision::f32);

// "step,lr,loss" rows with a header line.
std::string trace_to_csv(const std::vector<TraceRow>& trace);

struct SurgeryReport {
    double max_abs_deviation = 0.0;
    double max_rel_deviation = 0.0;
    int64_t compared_logits = 0;
    int32_t old_vocab = 0;
    bool ok = false;
};

// Runs forward with both checkpoints on the probe tokens and compares logits
// over the old vocabulary region; rows 0..V_old-1 of embedding and head are
// untouched by a resize, so the expected deviation is exactly zero (ok means
// within 1e-6 relative).
SurgeryReport verify_surgery(const Checkpoint& before, const Checkpoint& after,
                             const std::vector<uint32_t>& probe_tokens);

extern template struct TypedModel<float>;
extern template struct TypedModel<double>;
extern template struct OptimizerState<float>;
extern template struct OptimizerState<double>;

} // namespace cabrita
