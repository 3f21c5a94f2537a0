#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vai/core/rng.hpp"
#include "vai/core/tensor.hpp"
#include "vai/envs/spriteworld.hpp"
#include "vai/invariance/adapter.hpp"
#include "vai/nn/layers.hpp"
#include "vai/policy/wrappers.hpp"

namespace vai::policy {

struct SacConfig {
  int obs_size = 84;
  int obs_channels = 9;  // frame_stack * env channels
  int action_dim = 2;
  int hidden = 128;
  int feature_dim = 64;
  float lr = 1e-3f;
  float discount = 0.99f;
  float tau = 0.01f;
  float init_temperature = 0.1f;
  float log_std_min = -5.0f;
  float log_std_max = 2.0f;
};

struct Batch {
  Tensor obs;       // {B,C,H,W}
  Tensor action;    // {B,A}
  Tensor reward;    // {B}
  Tensor next_obs;  // {B,C,H,W}
  Tensor done;      // {B}; 1 cuts the bootstrap
};

struct SacMetrics {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;  // -mean log pi over the actor batch
};

// target <- (1 - tau) * target + tau * live, elementwise over matching lists
void soft_update(const std::vector<nn::Param*>& target, const std::vector<nn::Param*>& live,
                 float tau);
void copy_params(const std::vector<nn::Param*>& dst, const std::vector<nn::Param*>& src);

// Strided conv trunk with a tanh-bounded linear head. backward() refers to the
// most recent forward().
class PixelEncoder {
 public:
  PixelEncoder(int in_channels, int size, int feature_dim);
  void init(Rng& rng);
  Tensor forward(const Tensor& x);  // {N,C,H,W} -> {N,F}
  void backward(const Tensor& dfeat);
  std::vector<nn::Param*> params();
  std::vector<std::pair<std::string, nn::Param*>> named_params(const std::string& prefix);

 private:
  nn::Conv2d c1_, c2_;
  nn::ReLU r1_, r2_;
  nn::Linear fc_;
  nn::Tanh tanh_;
  std::vector<int> conv_out_shape_;
};

// Two-hidden-layer ReLU MLP.
class Mlp {
 public:
  Mlp(int in, int hidden, int out);
  void init(Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  std::vector<nn::Param*> params();
  std::vector<std::pair<std::string, nn::Param*>> named_params(const std::string& prefix);

 private:
  nn::Linear l1_, l2_, l3_;
  nn::ReLU r1_, r2_;
};

// Frame-level ring buffer; stacked observations are reassembled on sampling
// and never cross an episode boundary (padding repeats the reset frame).
// Frames are stored quantized to the 1/255 grid.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, int frame_stack);

  void push_frame(const Frame& frame, bool episode_start);
  // Links the two most recent frames as (obs, next) of one transition.
  void push_transition(const std::vector<float>& action, double reward, bool done);

  long transitions() const { return stored_transitions_; }
  bool can_sample(int batch) const { return stored_transitions_ >= batch; }
  Batch sample(int batch, Rng& rng);

 private:
  void write_stack(Tensor& dst, int row, long g) const;
  long oldest_valid() const { return next_g_ > cap_ ? next_g_ - cap_ : 0; }

  int cap_, k_;
  int h_ = 0, w_ = 0, c_ = 0;
  long next_g_ = 0;
  std::vector<std::vector<unsigned char>> frames_;
  std::vector<int> step_in_ep_;
  struct Transition {
    long g_obs;
    std::vector<float> action;
    float reward;
    float done;
  };
  std::vector<Transition> trans_;
  long next_t_ = 0;
  long stored_transitions_ = 0;
};

// Soft Actor-Critic over pixel features. The conv encoder is owned by the
// critic path; the actor reads its features as constants. Target encoder and
// critics track the live ones by exponential moving average.
class SacAgent {
 public:
  SacAgent(SacConfig cfg, std::uint64_t seed);

  // The optimizers hold pointers into the layer parameters.
  SacAgent(const SacAgent&) = delete;
  SacAgent& operator=(const SacAgent&) = delete;

  // obs is a stacked {H,W,C} observation. The deterministic path draws
  // nothing from rng.
  std::vector<float> act(const Tensor& obs, bool deterministic, Rng& rng);

  // Critic bootstrap targets for a batch; consumes B*A Gaussian draws.
  std::vector<double> compute_targets(const Batch& batch, Rng& rng);

  // One gradient step each on critics (through the encoder), actor, and
  // temperature, then soft target updates.
  SacMetrics update(const Batch& batch, Rng& rng);

  double alpha() const;
  const SacConfig& config() const { return cfg_; }
  std::vector<std::pair<std::string, nn::Param*>> named_params();

 private:
  struct ActorSample {
    Tensor action;   // {B,A}
    Tensor logp;     // {B}
    Tensor mu, raw;  // cached for backward
    Tensor xi, std_; // noise and std used
  };
  ActorSample sample_actor(const Tensor& actor_out, Rng& rng, bool with_noise);

  SacConfig cfg_;
  PixelEncoder enc_, enc_target_;
  Mlp actor_;
  Mlp q1_, q2_, q1_target_, q2_target_;
  nn::Param log_alpha_;
  nn::Adam opt_critic_, opt_actor_, opt_alpha_;
};

struct PolicyTrainConfig {
  int steps = 8000;       // agent decisions
  int start_steps = 300;  // uniform-random warmup
  int update_every = 2;
  int updates_per_step = 1;
  int batch = 128;
  int replay_capacity = 20000;
  int frame_stack = 3;
  int action_repeat = 4;
  bool use_weak_augment = true;
  WeakAugmentConfig weak;
  SacConfig sac;
};

// Per-step observation pipeline instrumentation.
struct PipelineStats {
  long adapt_calls = 0;
  long weak_augment_calls = 0;
  long stack_pushes = 0;
};

// Pipeline per frame: adapt (when an adapter is given), weak augment
// (training only), quantize, stack. Timeout transitions bootstrap.
std::unique_ptr<SacAgent> train_policy(envs::SpriteWorld& env,
                                       invariance::AdapterModel* adapter,
                                       const PolicyTrainConfig& cfg, std::uint64_t seed,
                                       std::vector<double>* episode_rewards = nullptr,
                                       PipelineStats* stats = nullptr);

struct EvalResult {
  std::vector<double> seed_mean_reward;
  std::vector<double> seed_mean_success;
  std::vector<std::vector<double>> rewards;  // [seed][episode]
  double reward_mean = 0.0, reward_std = 0.0;
  double success_mean = 0.0, success_std = 0.0;
};

// Deterministic policy, no weak augmentation. Optional de-noising runs before
// adaptation. Aggregation: per-seed episode means, then cross-seed mean and
// sample std.
EvalResult evaluate_policy(envs::SpriteWorld& env, SacAgent& agent,
                           invariance::AdapterModel* adapter, int seeds, int episodes,
                           int frame_stack, int action_repeat, float denoise_alpha,
                           float denoise_beta, std::uint64_t master_seed = 900);

// Per-seed means then cross-seed mean and sample std (n-1; 0 when n < 2).
void aggregate_per_seed(const std::vector<std::vector<double>>& per_seed_values,
                        std::vector<double>* seed_means, double* mean, double* stddev);

void save_sac(SacAgent& agent, const std::string& path);
std::unique_ptr<SacAgent> load_sac(const std::string& path);

}  // namespace vai::policy
