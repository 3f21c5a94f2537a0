#include "vai/policy/sac.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vai/core/checkpoint.hpp"
#include "vai/core/errors.hpp"
#include "vai/core/image_io.hpp"
#include "vai/nn/batch.hpp"

namespace vai::policy {

namespace {

constexpr float kLogpEps = 1e-6f;
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  Tensor out({n, ca + cb});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < ca; ++j) out.at(i, j) = a.at(i, j);
    for (int j = 0; j < cb; ++j) out.at(i, ca + j) = b.at(i, j);
  }
  return out;
}

}  // namespace

void soft_update(const std::vector<nn::Param*>& target, const std::vector<nn::Param*>& live,
                 float tau) {
  if (target.size() != live.size())
    throw std::invalid_argument("soft_update: parameter list size mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    require_same_shape(target[i]->w, live[i]->w, "soft_update");
    for (std::size_t j = 0; j < target[i]->w.numel(); ++j)
      target[i]->w[j] = (1.0f - tau) * target[i]->w[j] + tau * live[i]->w[j];
  }
}

void copy_params(const std::vector<nn::Param*>& dst, const std::vector<nn::Param*>& src) {
  soft_update(dst, src, 1.0f);
}

PixelEncoder::PixelEncoder(int in_channels, int size, int feature_dim)
    : c1_(in_channels, 16, 8, 4, 0),
      c2_(16, 32, 4, 2, 0),
      fc_(32 * (((size - 8) / 4 + 1 - 4) / 2 + 1) * (((size - 8) / 4 + 1 - 4) / 2 + 1),
          feature_dim) {}

void PixelEncoder::init(Rng& rng) {
  c1_.init(rng);
  c2_.init(rng);
  fc_.init(rng);
}

Tensor PixelEncoder::forward(const Tensor& x) {
  Tensor h = r1_.forward(c1_.forward(x));
  h = r2_.forward(c2_.forward(h));
  conv_out_shape_ = h.shape;
  const int n = h.dim(0);
  h.shape = {n, static_cast<int>(h.numel()) / n};
  return tanh_.forward(fc_.forward(h));
}

void PixelEncoder::backward(const Tensor& dfeat) {
  Tensor d = fc_.backward(tanh_.backward(dfeat));
  d.shape = conv_out_shape_;
  c1_.backward(r1_.backward(c2_.backward(r2_.backward(d))));
}

std::vector<nn::Param*> PixelEncoder::params() {
  return {&c1_.weight, &c1_.bias, &c2_.weight, &c2_.bias, &fc_.weight, &fc_.bias};
}

std::vector<std::pair<std::string, nn::Param*>> PixelEncoder::named_params(
    const std::string& prefix) {
  return {{prefix + ".c1.weight", &c1_.weight}, {prefix + ".c1.bias", &c1_.bias},
          {prefix + ".c2.weight", &c2_.weight}, {prefix + ".c2.bias", &c2_.bias},
          {prefix + ".fc.weight", &fc_.weight}, {prefix + ".fc.bias", &fc_.bias}};
}

Mlp::Mlp(int in, int hidden, int out) : l1_(in, hidden), l2_(hidden, hidden), l3_(hidden, out) {}

void Mlp::init(Rng& rng) {
  l1_.init(rng);
  l2_.init(rng);
  l3_.init(rng);
}

Tensor Mlp::forward(const Tensor& x) {
  Tensor h = r1_.forward(l1_.forward(x));
  h = r2_.forward(l2_.forward(h));
  return l3_.forward(h);
}

Tensor Mlp::backward(const Tensor& dy) {
  Tensor d = l2_.backward(r2_.backward(l3_.backward(dy)));
  return l1_.backward(r1_.backward(d));
}

std::vector<nn::Param*> Mlp::params() {
  return {&l1_.weight, &l1_.bias, &l2_.weight, &l2_.bias, &l3_.weight, &l3_.bias};
}

std::vector<std::pair<std::string, nn::Param*>> Mlp::named_params(const std::string& prefix) {
  return {{prefix + ".l1.weight", &l1_.weight}, {prefix + ".l1.bias", &l1_.bias},
          {prefix + ".l2.weight", &l2_.weight}, {prefix + ".l2.bias", &l2_.bias},
          {prefix + ".l3.weight", &l3_.weight}, {prefix + ".l3.bias", &l3_.bias}};
}

ReplayBuffer::ReplayBuffer(int capacity, int frame_stack) : cap_(capacity), k_(frame_stack) {
  if (capacity < 2 || frame_stack < 1)
    throw std::invalid_argument("ReplayBuffer: capacity must be >= 2 and frame_stack >= 1");
  frames_.resize(static_cast<std::size_t>(cap_));
  step_in_ep_.assign(static_cast<std::size_t>(cap_), 0);
  trans_.resize(static_cast<std::size_t>(cap_));
}

void ReplayBuffer::push_frame(const Frame& frame, bool episode_start) {
  if (h_ == 0) {
    h_ = frame.dim(0);
    w_ = frame.dim(1);
    c_ = frame.dim(2);
  }
  const auto slot = static_cast<std::size_t>(next_g_ % cap_);
  auto& bytes = frames_[slot];
  bytes.resize(frame.numel());
  for (std::size_t i = 0; i < frame.numel(); ++i)
    bytes[i] = static_cast<unsigned char>(clamp01(frame[i]) * 255.0f + 0.5f);
  step_in_ep_[slot] =
      episode_start ? 0 : step_in_ep_[static_cast<std::size_t>((next_g_ - 1) % cap_)] + 1;
  ++next_g_;
}

void ReplayBuffer::push_transition(const std::vector<float>& action, double reward, bool done) {
  if (next_g_ < 2) throw std::logic_error("ReplayBuffer: need two frames before a transition");
  Transition t;
  t.g_obs = next_g_ - 2;
  t.action = action;
  t.reward = static_cast<float>(reward);
  t.done = done ? 1.0f : 0.0f;
  trans_[static_cast<std::size_t>(next_t_ % cap_)] = t;
  ++next_t_;
  stored_transitions_ = std::min<long>(next_t_, cap_);
}

void ReplayBuffer::write_stack(Tensor& dst, int row, long g) const {
  const long ep_start = g - step_in_ep_[static_cast<std::size_t>(g % cap_)];
  for (int j = 0; j < k_; ++j) {
    long idx = g - (k_ - 1 - j);
    if (idx < ep_start) idx = ep_start;
    const auto& bytes = frames_[static_cast<std::size_t>(idx % cap_)];
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x)
        for (int ch = 0; ch < c_; ++ch)
          dst.at(row, j * c_ + ch, y, x) =
              static_cast<float>(bytes[(static_cast<std::size_t>(y) * w_ + x) * c_ + ch]) / 255.0f;
  }
}

Batch ReplayBuffer::sample(int batch, Rng& rng) {
  if (!can_sample(batch)) throw std::logic_error("ReplayBuffer: not enough transitions");
  const int a_dim = static_cast<int>(
      trans_[static_cast<std::size_t>((next_t_ - 1) % cap_)].action.size());
  Batch out;
  out.obs = Tensor({batch, c_ * k_, h_, w_});
  out.next_obs = Tensor({batch, c_ * k_, h_, w_});
  out.action = Tensor({batch, a_dim});
  out.reward = Tensor({batch});
  out.done = Tensor({batch});

  for (int b = 0; b < batch; ++b) {
    const Transition* tr = nullptr;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const long t = next_t_ - stored_transitions_ +
                     uniform_int(rng, 0, static_cast<int>(stored_transitions_) - 1);
      const Transition& cand = trans_[static_cast<std::size_t>(t % cap_)];
      if (cand.g_obs < oldest_valid()) continue;
      const long ep_start =
          cand.g_obs - step_in_ep_[static_cast<std::size_t>(cand.g_obs % cap_)];
      const long window_start = std::max(cand.g_obs - (k_ - 1), ep_start);
      if (window_start < oldest_valid()) continue;
      tr = &cand;
      break;
    }
    if (!tr) throw std::runtime_error("ReplayBuffer: no sampleable transition window");
    write_stack(out.obs, b, tr->g_obs);
    write_stack(out.next_obs, b, tr->g_obs + 1);
    for (int j = 0; j < a_dim; ++j) out.action.at(b, j) = tr->action[static_cast<std::size_t>(j)];
    out.reward[static_cast<std::size_t>(b)] = tr->reward;
    out.done[static_cast<std::size_t>(b)] = tr->done;
  }
  return out;
}

SacAgent::SacAgent(SacConfig cfg, std::uint64_t seed)
    : cfg_(cfg),
      enc_(cfg.obs_channels, cfg.obs_size, cfg.feature_dim),
      enc_target_(cfg.obs_channels, cfg.obs_size, cfg.feature_dim),
      actor_(cfg.feature_dim, cfg.hidden, 2 * cfg.action_dim),
      q1_(cfg.feature_dim + cfg.action_dim, cfg.hidden, 1),
      q2_(cfg.feature_dim + cfg.action_dim, cfg.hidden, 1),
      q1_target_(cfg.feature_dim + cfg.action_dim, cfg.hidden, 1),
      q2_target_(cfg.feature_dim + cfg.action_dim, cfg.hidden, 1),
      log_alpha_({1}),
      opt_critic_(
          [this] {
            auto p = enc_.params();
            for (auto* q : q1_.params()) p.push_back(q);
            for (auto* q : q2_.params()) p.push_back(q);
            return p;
          }(),
          cfg.lr),
      opt_actor_(actor_.params(), cfg.lr),
      opt_alpha_({&log_alpha_}, cfg.lr) {
  Rng rng = make_rng(seed, 40);
  enc_.init(rng);
  actor_.init(rng);
  q1_.init(rng);
  q2_.init(rng);
  copy_params(enc_target_.params(), enc_.params());
  copy_params(q1_target_.params(), q1_.params());
  copy_params(q2_target_.params(), q2_.params());
  log_alpha_.w[0] = std::log(cfg.init_temperature);
}

double SacAgent::alpha() const { return std::exp(static_cast<double>(log_alpha_.w[0])); }

SacAgent::ActorSample SacAgent::sample_actor(const Tensor& actor_out, Rng& rng, bool with_noise) {
  const int n = actor_out.dim(0), a_dim = cfg_.action_dim;
  ActorSample s;
  s.action = Tensor({n, a_dim});
  s.logp = Tensor({n});
  s.mu = Tensor({n, a_dim});
  s.raw = Tensor({n, a_dim});
  s.xi = Tensor({n, a_dim});
  s.std_ = Tensor({n, a_dim});
  for (int i = 0; i < n; ++i) {
    double logp = 0.0;
    for (int j = 0; j < a_dim; ++j) {
      const float mu = actor_out.at(i, j);
      const float raw = actor_out.at(i, a_dim + j);
      const float log_std = cfg_.log_std_min +
                            0.5f * (cfg_.log_std_max - cfg_.log_std_min) * (std::tanh(raw) + 1.0f);
      const float stddev = std::exp(log_std);
      const float xi = with_noise ? gaussian(rng) : 0.0f;
      const float a = std::tanh(mu + stddev * xi);
      s.action.at(i, j) = a;
      s.mu.at(i, j) = mu;
      s.raw.at(i, j) = raw;
      s.xi.at(i, j) = xi;
      s.std_.at(i, j) = stddev;
      logp += -0.5 * xi * xi - log_std - kHalfLog2Pi - std::log(1.0f - a * a + kLogpEps);
    }
    s.logp[static_cast<std::size_t>(i)] = static_cast<float>(logp);
  }
  return s;
}

std::vector<float> SacAgent::act(const Tensor& obs, bool deterministic, Rng& rng) {
  const Tensor feat = enc_.forward(nn::to_nchw(obs));
  const Tensor ao = actor_.forward(feat);
  const ActorSample s = sample_actor(ao, rng, !deterministic);
  std::vector<float> a(static_cast<std::size_t>(cfg_.action_dim));
  for (int j = 0; j < cfg_.action_dim; ++j) a[static_cast<std::size_t>(j)] = s.action.at(0, j);
  return a;
}

std::vector<double> SacAgent::compute_targets(const Batch& batch, Rng& rng) {
  const int n = batch.obs.dim(0);
  const Tensor feat_next = enc_.forward(batch.next_obs);  // live features, no backward
  const Tensor ao = actor_.forward(feat_next);
  const ActorSample s = sample_actor(ao, rng, true);
  const Tensor feat_tgt = enc_target_.forward(batch.next_obs);
  const Tensor in = concat_cols(feat_tgt, s.action);
  const Tensor q1n = q1_target_.forward(in);
  const Tensor q2n = q2_target_.forward(in);
  const double a = alpha();
  std::vector<double> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double qmin = std::min(q1n.at(i, 0), q2n.at(i, 0));
    y[static_cast<std::size_t>(i)] =
        batch.reward[static_cast<std::size_t>(i)] +
        cfg_.discount * (1.0 - batch.done[static_cast<std::size_t>(i)]) *
            (qmin - a * s.logp[static_cast<std::size_t>(i)]);
  }
  return y;
}

SacMetrics SacAgent::update(const Batch& batch, Rng& rng) {
  const int n = batch.obs.dim(0);
  const int f_dim = cfg_.feature_dim, a_dim = cfg_.action_dim;
  SacMetrics m;
  const std::vector<double> y = compute_targets(batch, rng);

  // critic step, through the encoder
  const Tensor feat = enc_.forward(batch.obs);
  const Tensor in = concat_cols(feat, batch.action);
  const Tensor q1 = q1_.forward(in);
  const Tensor q2 = q2_.forward(in);
  Tensor dq1({n, 1}), dq2({n, 1});
  double critic_loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e1 = q1.at(i, 0) - y[static_cast<std::size_t>(i)];
    const double e2 = q2.at(i, 0) - y[static_cast<std::size_t>(i)];
    critic_loss += e1 * e1 + e2 * e2;
    dq1.at(i, 0) = static_cast<float>(2.0 * e1 / n);
    dq2.at(i, 0) = static_cast<float>(2.0 * e2 / n);
  }
  critic_loss /= n;
  const Tensor din1 = q1_.backward(dq1);
  const Tensor din2 = q2_.backward(dq2);
  Tensor dfeat({n, f_dim});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < f_dim; ++j) dfeat.at(i, j) = din1.at(i, j) + din2.at(i, j);
  enc_.backward(dfeat);
  opt_critic_.step();
  opt_critic_.zero_grad();

  // actor step on detached features
  const double a_cur = alpha();
  const Tensor ao = actor_.forward(feat);
  const ActorSample s = sample_actor(ao, rng, true);
  const Tensor in_pi = concat_cols(feat, s.action);
  const Tensor q1p = q1_.forward(in_pi);
  const Tensor q2p = q2_.forward(in_pi);
  double actor_loss = 0.0, mean_logp = 0.0;
  Tensor dq1p({n, 1}), dq2p({n, 1});
  for (int i = 0; i < n; ++i) {
    const double qmin = std::min(q1p.at(i, 0), q2p.at(i, 0));
    actor_loss += a_cur * s.logp[static_cast<std::size_t>(i)] - qmin;
    mean_logp += s.logp[static_cast<std::size_t>(i)];
    const bool first = q1p.at(i, 0) <= q2p.at(i, 0);
    dq1p.at(i, 0) = first ? -1.0f / n : 0.0f;
    dq2p.at(i, 0) = first ? 0.0f : -1.0f / n;
  }
  actor_loss /= n;
  mean_logp /= n;
  const Tensor din1p = q1_.backward(dq1p);
  const Tensor din2p = q2_.backward(dq2p);
  Tensor dao({n, 2 * a_dim});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < a_dim; ++j) {
      const float a = s.action.at(i, j);
      const float one_m_a2 = 1.0f - a * a;
      // Q path into the action plus the tanh-correction term of log pi
      const float dl_da = din1p.at(i, f_dim + j) + din2p.at(i, f_dim + j) +
                          static_cast<float>(a_cur / n) * (2.0f * a / (one_m_a2 + kLogpEps));
      const float dmu = dl_da * one_m_a2;
      const float dlog_std = dl_da * one_m_a2 * s.xi.at(i, j) * s.std_.at(i, j) -
                             static_cast<float>(a_cur / n);
      const float th = std::tanh(s.raw.at(i, j));
      dao.at(i, j) = dmu;
      dao.at(i, a_dim + j) =
          dlog_std * 0.5f * (cfg_.log_std_max - cfg_.log_std_min) * (1.0f - th * th);
    }
  actor_.backward(dao);
  opt_actor_.step();
  opt_actor_.zero_grad();
  opt_critic_.zero_grad();  // discard critic grads accumulated by the actor pass

  // temperature: entropy pushed toward -action_dim
  const double target_entropy = -static_cast<double>(a_dim);
  const double entropy_gap = -mean_logp - target_entropy;  // estimated H minus target
  log_alpha_.g[0] = static_cast<float>(a_cur * entropy_gap);
  const double alpha_loss = a_cur * entropy_gap;
  opt_alpha_.step();
  opt_alpha_.zero_grad();

  soft_update(enc_target_.params(), enc_.params(), cfg_.tau);
  soft_update(q1_target_.params(), q1_.params(), cfg_.tau);
  soft_update(q2_target_.params(), q2_.params(), cfg_.tau);

  m.critic_loss = critic_loss;
  m.actor_loss = actor_loss;
  m.alpha_loss = alpha_loss;
  m.alpha = alpha();
  m.entropy = -mean_logp;
  return m;
}

std::vector<std::pair<std::string, nn::Param*>> SacAgent::named_params() {
  std::vector<std::pair<std::string, nn::Param*>> out;
  for (auto& p : enc_.named_params("encoder")) out.push_back(p);
  for (auto& p : actor_.named_params("actor")) out.push_back(p);
  for (auto& p : q1_.named_params("q1")) out.push_back(p);
  for (auto& p : q2_.named_params("q2")) out.push_back(p);
  for (auto& p : enc_target_.named_params("target_encoder")) out.push_back(p);
  for (auto& p : q1_target_.named_params("target_q1")) out.push_back(p);
  for (auto& p : q2_target_.named_params("target_q2")) out.push_back(p);
  out.emplace_back("log_alpha", &log_alpha_);
  return out;
}

std::unique_ptr<SacAgent> train_policy(envs::SpriteWorld& env,
                                       invariance::AdapterModel* adapter,
                                       const PolicyTrainConfig& cfg, std::uint64_t seed,
                                       std::vector<double>* episode_rewards,
                                       PipelineStats* stats) {
  auto agent_ptr = std::make_unique<SacAgent>(cfg.sac, seed);
  SacAgent& agent = *agent_ptr;
  ReplayBuffer replay(cfg.replay_capacity, cfg.frame_stack);
  FrameStack stack(cfg.frame_stack);
  Rng act_rng = make_rng(seed, 41);
  Rng replay_rng = make_rng(seed, 42);
  Rng aug_rng = make_rng(seed, 43);
  PipelineStats local_stats;
  PipelineStats& st = stats ? *stats : local_stats;

  auto process = [&](const Frame& raw) {
    Frame f = raw;
    if (adapter) {
      f = invariance::adapt_observation(*adapter, f);
      ++st.adapt_calls;
    }
    if (cfg.use_weak_augment) {
      f = weak_augment(f, cfg.weak, aug_rng);
      ++st.weak_augment_calls;
    }
    for (auto& v : f.v) v = quantize255(v);
    return f;
  };

  long ep = 0;
  double ep_reward = 0.0;
  auto [state, raw] = env.reset(mix_seed(seed, 5000 + ep));
  Frame obs_f = process(raw);
  stack.reset(obs_f);
  ++st.stack_pushes;
  replay.push_frame(obs_f, true);

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<float> action(static_cast<std::size_t>(cfg.sac.action_dim));
    if (step < cfg.start_steps) {
      for (auto& a : action) a = uniform(act_rng, -1.0f, 1.0f);
    } else {
      action = agent.act(stack.current(), false, act_rng);
    }

    double r_sum = 0.0;
    bool done = false;
    Frame last_raw;
    for (int rep = 0; rep < cfg.action_repeat && !done; ++rep) {
      auto res = env.step(state, {action[0], action[1]});
      state = res.state;
      r_sum += res.reward;
      done = res.done;
      last_raw = std::move(res.frame);
    }
    ep_reward += r_sum;

    Frame next_f = process(last_raw);
    stack.push(next_f);
    ++st.stack_pushes;
    replay.push_frame(next_f, false);
    replay.push_transition(action, r_sum, false);  // time-limit end: keep the bootstrap

    if (step + 1 >= cfg.start_steps && (step + 1) % cfg.update_every == 0 &&
        replay.can_sample(cfg.batch)) {
      for (int u = 0; u < cfg.updates_per_step; ++u) {
        const SacMetrics m = agent.update(replay.sample(cfg.batch, replay_rng), act_rng);
        if (!std::isfinite(m.critic_loss) || !std::isfinite(m.actor_loss))
          throw DivergenceError("policy", step);
      }
    }

    if (done) {
      if (episode_rewards) episode_rewards->push_back(ep_reward);
      ep_reward = 0.0;
      ++ep;
      auto [state2, raw2] = env.reset(mix_seed(seed, 5000 + ep));
      state = state2;
      obs_f = process(raw2);
      stack.reset(obs_f);
      ++st.stack_pushes;
      replay.push_frame(obs_f, true);
    }
  }
  return agent_ptr;
}

void aggregate_per_seed(const std::vector<std::vector<double>>& per_seed_values,
                        std::vector<double>* seed_means, double* mean, double* stddev) {
  std::vector<double> means;
  for (const auto& vals : per_seed_values) {
    double acc = 0.0;
    for (double v : vals) acc += v;
    means.push_back(vals.empty() ? 0.0 : acc / static_cast<double>(vals.size()));
  }
  double m = 0.0;
  for (double v : means) m += v;
  m = means.empty() ? 0.0 : m / static_cast<double>(means.size());
  double s = 0.0;
  if (means.size() >= 2) {
    double acc = 0.0;
    for (double v : means) acc += (v - m) * (v - m);
    s = std::sqrt(acc / static_cast<double>(means.size() - 1));
  }
  if (seed_means) *seed_means = means;
  if (mean) *mean = m;
  if (stddev) *stddev = s;
}

EvalResult evaluate_policy(envs::SpriteWorld& env, SacAgent& agent,
                           invariance::AdapterModel* adapter, int seeds, int episodes,
                           int frame_stack, int action_repeat, float denoise_alpha,
                           float denoise_beta, std::uint64_t master_seed) {
  EvalResult result;
  Rng unused = make_rng(0);  // deterministic action path draws nothing
  std::vector<std::vector<double>> successes;

  for (int s = 0; s < seeds; ++s) {
    std::vector<double> ep_rewards, ep_success;
    for (int e = 0; e < episodes; ++e) {
      FrameStack stack(frame_stack);
      DenoiseState dn;
      dn.alpha = denoise_alpha;
      dn.beta = denoise_beta;
      auto process = [&](const Frame& raw) {
        Frame f = raw;
        if (denoise_alpha > 0.0f) f = denoise_moving_average(f, dn);
        if (adapter) f = invariance::adapt_observation(*adapter, f);
        for (auto& v : f.v) v = quantize255(v);
        return f;
      };

      auto [state, raw] = env.reset(mix_seed(mix_seed(master_seed, static_cast<std::uint64_t>(s)),
                                             static_cast<std::uint64_t>(e)));
      stack.reset(process(raw));
      double total = 0.0;
      bool done = false;
      bool reached = env.success(state);
      while (!done) {
        const auto action = agent.act(stack.current(), true, unused);
        Frame last_raw;
        for (int rep = 0; rep < action_repeat && !done; ++rep) {
          auto res = env.step(state, {action[0], action[1]});
          state = res.state;
          total += res.reward;
          done = res.done;
          reached = reached || env.success(state);
          last_raw = std::move(res.frame);
        }
        stack.push(process(last_raw));
      }
      ep_rewards.push_back(total);
      ep_success.push_back(reached ? 1.0 : 0.0);
    }
    result.rewards.push_back(std::move(ep_rewards));
    successes.push_back(std::move(ep_success));
  }

  aggregate_per_seed(result.rewards, &result.seed_mean_reward, &result.reward_mean,
                     &result.reward_std);
  aggregate_per_seed(successes, &result.seed_mean_success, &result.success_mean,
                     &result.success_std);
  return result;
}

void save_sac(SacAgent& agent, const std::string& path) {
  const auto& cfg = agent.config();
  Checkpoint ckpt;
  ckpt.kind = "sac";
  ckpt.add_meta("obs_size", std::to_string(cfg.obs_size));
  ckpt.add_meta("obs_channels", std::to_string(cfg.obs_channels));
  ckpt.add_meta("action_dim", std::to_string(cfg.action_dim));
  ckpt.add_meta("hidden", std::to_string(cfg.hidden));
  ckpt.add_meta("feature_dim", std::to_string(cfg.feature_dim));
  ckpt.add_meta("lr", std::to_string(cfg.lr));
  ckpt.add_meta("discount", std::to_string(cfg.discount));
  ckpt.add_meta("tau", std::to_string(cfg.tau));
  ckpt.add_meta("init_temperature", std::to_string(cfg.init_temperature));
  for (auto& [name, p] : agent.named_params()) ckpt.add_array(name, p->w);
  ckpt.save(path);
}

std::unique_ptr<SacAgent> load_sac(const std::string& path) {
  const Checkpoint ckpt = Checkpoint::load(path, "sac");
  SacConfig cfg;
  cfg.obs_size = std::stoi(ckpt.meta_value("obs_size"));
  cfg.obs_channels = std::stoi(ckpt.meta_value("obs_channels"));
  cfg.action_dim = std::stoi(ckpt.meta_value("action_dim"));
  cfg.hidden = std::stoi(ckpt.meta_value("hidden"));
  cfg.feature_dim = std::stoi(ckpt.meta_value("feature_dim"));
  cfg.lr = std::stof(ckpt.meta_value("lr"));
  cfg.discount = std::stof(ckpt.meta_value("discount"));
  cfg.tau = std::stof(ckpt.meta_value("tau"));
  cfg.init_temperature = std::stof(ckpt.meta_value("init_temperature"));
  auto agent = std::make_unique<SacAgent>(cfg, 0);
  for (auto& [name, p] : agent->named_params()) {
    const Tensor& t = ckpt.array(name);
    require_same_shape(p->w, t, "load_sac");
    p->w = t;
  }
  return agent;
}

}  // namespace vai::policy
