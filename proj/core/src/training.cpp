#include "escortsim/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>

#include "escortsim/error.hpp"
#include "escortsim/json_writer.hpp"
#include "escortsim/parallel.hpp"
#include "escortsim/policy.hpp"

namespace escortsim {

void TrainerConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidConfig, std::string("trainer config: ") + what);
  };
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0, 1]");
  require(clip_epsilon > 0.0, "clip_epsilon must be > 0");
  require(learning_rate >= 0.0, "learning_rate must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(minibatch_size >= 1 && minibatch_size <= batch_size, "minibatch_size must lie in [1, batch_size]");
  require(epochs_per_batch >= 1, "epochs_per_batch must be >= 1");
  require(n_parallel_envs >= 1, "n_parallel_envs must be >= 1");
  require(iterations >= 0, "iterations must be >= 0");
  require(chunk_size >= 1, "chunk_size must be >= 1");
}

std::size_t RolloutBatch::sample_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.size();
  return n;
}

double RolloutBatch::mean_reward() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& t : trajectories) {
    sum = std::accumulate(t.rewards.begin(), t.rewards.end(), sum);
    n += t.size();
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                std::span<const std::uint8_t> dones, double gamma, double lambda) {
  if (values.size() != rewards.size() + 1 || dones.size() != rewards.size()) {
    throw Error(ErrorCode::InvalidArgument, "compute_gae: need |values| = |rewards| + 1 = |dones| + 1");
  }
  std::vector<double> adv(rewards.size());
  double running = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * live * values[i + 1] - values[i];
    running = delta + gamma * lambda * live * running;
    adv[i] = running;
  }
  return adv;
}

void normalize_in_place(std::span<double> values) {
  if (values.size() < 2) return;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (double& v : values) v = sd > 1e-12 ? (v - mean) / sd : v - mean;
}

AdvantageBatch compute_advantages(const RolloutBatch& batch, const TrainerConfig& config) {
  AdvantageBatch out;
  out.advantages.reserve(batch.sample_count());
  out.returns.reserve(batch.sample_count());
  std::vector<double> values;
  for (const Trajectory& t : batch.trajectories) {
    values.assign(t.values.begin(), t.values.end());
    values.push_back(t.bootstrap_value);
    const auto adv = compute_gae(t.rewards, values, t.dones, config.gamma, config.lambda);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      out.advantages.push_back(adv[i]);
      out.returns.push_back(adv[i] + t.values[i]);
    }
  }
  normalize_in_place(out.advantages);
  return out;
}

namespace {

struct WorkerRollout {
  std::vector<Trajectory> trajectories;
};

WorkerRollout run_worker(const NetworkParams& params, const EpisodeConfig& env, std::size_t target,
                         std::size_t worker, std::uint64_t seed) {
  WorkerRollout out;
  Rng rng = make_rng(seed, 0xa11, worker);
  std::size_t collected = 0;
  for (std::uint64_t episode_index = 0; collected < target; ++episode_index) {
    Episode episode(env, mix_seed(seed, worker, episode_index));
    StepOutcome obs = episode.reset();
    std::vector<Trajectory> trajs(obs.escort_ids.size());
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      trajs[i].env_index = worker;
      trajs[i].escort_id = obs.escort_ids[i];
    }
    bool truncated = false;
    while (true) {
      const RowMatrix inputs = stack_observations(params, obs.observations);
      const auto dists = forward_actor_batch(params, inputs);
      const auto values = forward_critic_batch(params, inputs);
      std::vector<Vec2> actions(dists.size());
      for (std::size_t i = 0; i < dists.size(); ++i) {
        actions[i] = sample_action(dists[i], rng, ActionMode::Stochastic);
        Trajectory& t = trajs[i];
        t.observations.push_back(obs.observations[i]);
        t.actions.push_back(actions[i]);
        t.log_probs.push_back(log_prob(dists[i], actions[i]));
        t.values.push_back(values[i]);
      }
      StepOutcome next = episode.step(actions);
      const bool terminal = next.event.kind != EventKind::None;
      for (Trajectory& t : trajs) {
        t.rewards.push_back(next.reward);
        t.dones.push_back(terminal ? 1 : 0);
      }
      collected += trajs.size();
      obs = std::move(next);
      if (terminal) break;
      if (obs.done || collected >= target) {
        truncated = true;
        break;
      }
    }
    if (truncated) {
      const auto boot = forward_critic_batch(params, stack_observations(params, obs.observations));
      for (std::size_t i = 0; i < trajs.size(); ++i) trajs[i].bootstrap_value = boot[i];
    }
    for (auto& t : trajs) out.trajectories.push_back(std::move(t));
  }
  return out;
}

}  // namespace

RolloutBatch collect_rollouts(const NetworkParams& params, const EpisodeConfig& env,
                              const TrainerConfig& config, std::uint64_t seed) {
  config.validate();
  env.validate();
  if (env.n_escorts < 1) throw Error(ErrorCode::InvalidConfig, "training needs at least one escort");
  if (!env.escort_schedule.empty()) {
    throw Error(ErrorCode::InvalidConfig, "escort schedules are evaluation-only");
  }
  const auto n_envs = static_cast<std::size_t>(config.n_parallel_envs);
  const std::size_t target = (config.batch_size + n_envs - 1) / n_envs;
  std::vector<WorkerRollout> results(n_envs);
  parallel_for(n_envs, [&](std::size_t w) { results[w] = run_worker(params, env, target, w, seed); });
  RolloutBatch batch;
  for (auto& r : results) {
    for (auto& t : r.trajectories) batch.trajectories.push_back(std::move(t));
  }
  return batch;
}

std::vector<SampleRef> flatten_samples(const RolloutBatch& batch, const AdvantageBatch& adv) {
  std::vector<SampleRef> out;
  out.reserve(batch.sample_count());
  std::size_t k = 0;
  for (const Trajectory& t : batch.trajectories) {
    for (std::size_t i = 0; i < t.size(); ++i, ++k) {
      out.push_back(SampleRef{t.observations[i], t.actions[i], t.log_probs[i], adv.advantages.at(k),
                              adv.returns.at(k)});
    }
  }
  return out;
}

namespace {

constexpr double kLog2PiHalf = 0.91893853320467274178;

LossValue compute_loss(const NetworkParams& params, std::span<const SampleRef> samples,
                       const TrainerConfig& config, LossTerms terms, std::span<double> grad) {
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  const std::size_t n = samples.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty minibatch");
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto in_dim = static_cast<Eigen::Index>(params.shape().input_size());
  const auto log_std = params.tensor(TensorSlot::LogStd);
  const double sx = std::exp(log_std(0, 0));
  const double sy = std::exp(log_std(0, 1));

  LossValue loss;
  loss.entropy = 2.0 * (0.5 + kLog2PiHalf) + log_std(0, 0) + log_std(0, 1);
  double d_log_std[2] = {0.0, 0.0};
  if (terms.entropy && want_grad) {
    d_log_std[0] -= config.entropy_coef;
    d_log_std[1] -= config.entropy_coef;
  }

  TrunkCache cache;
  for (std::size_t start = 0; start < n; start += config.chunk_size) {
    const std::size_t len = std::min(config.chunk_size, n - start);
    RowMatrix inputs(static_cast<Eigen::Index>(len), in_dim);
    for (std::size_t i = 0; i < len; ++i) {
      const auto& obs = samples[start + i].observation;
      if (static_cast<Eigen::Index>(obs.size()) != in_dim) {
        throw Error(ErrorCode::ShapeMismatch, "sample observation has the wrong length");
      }
      inputs.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(obs.data(), in_dim);
    }

    if (terms.actor) {
      const RowMatrix hidden = trunk_forward(params, Trunk::Actor, inputs, want_grad ? &cache : nullptr);
      RowMatrix mean = hidden * params.tensor(TensorSlot::MeanW).transpose();
      mean.rowwise() += params.tensor(TensorSlot::MeanB).row(0);
      RowMatrix d_mean = RowMatrix::Zero(static_cast<Eigen::Index>(len), 2);
      for (std::size_t i = 0; i < len; ++i) {
        const SampleRef& s = samples[start + i];
        const auto r = static_cast<Eigen::Index>(i);
        const GaussianAction ga{{mean(r, 0), mean(r, 1)}, {sx, sy}};
        const double ratio = std::exp(log_prob(ga, s.action) - s.old_log_prob);
        const double surr = ratio * s.advantage;
        const double clipped =
            std::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon) * s.advantage;
        loss.actor -= std::min(surr, clipped) * inv_n;
        if (!want_grad || surr > clipped) continue;
        const double d_logp = -s.advantage * ratio * inv_n;
        const double ex = s.action.x - ga.mean.x;
        const double ey = s.action.y - ga.mean.y;
        d_mean(r, 0) = d_logp * ex / (sx * sx);
        d_mean(r, 1) = d_logp * ey / (sy * sy);
        d_log_std[0] += d_logp * (ex * ex / (sx * sx) - 1.0);
        d_log_std[1] += d_logp * (ey * ey / (sy * sy) - 1.0);
      }
      if (want_grad) {
        const TensorInfo& mw = params.info(TensorSlot::MeanW);
        const TensorInfo& mb = params.info(TensorSlot::MeanB);
        Eigen::Map<RowMatrix>(grad.data() + mw.offset, mw.rows, mw.cols).noalias() += d_mean.transpose() * hidden;
        Eigen::Map<RowMatrix>(grad.data() + mb.offset, mb.rows, mb.cols) += d_mean.colwise().sum();
        const RowMatrix d_hidden = d_mean * params.tensor(TensorSlot::MeanW);
        trunk_backward(params, Trunk::Actor, cache, d_hidden, grad);
      }
    }

    if (terms.critic) {
      const RowMatrix hidden = trunk_forward(params, Trunk::Critic, inputs, want_grad ? &cache : nullptr);
      const Eigen::VectorXd v = (hidden * params.tensor(TensorSlot::ValueW).row(0).transpose()).array() +
                                params.tensor(TensorSlot::ValueB)(0, 0);
      RowMatrix d_value(static_cast<Eigen::Index>(len), 1);
      for (std::size_t i = 0; i < len; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double err = v(r) - samples[start + i].return_target;
        loss.critic += err * err * inv_n;
        d_value(r, 0) = 2.0 * err * inv_n * config.value_coef;
      }
      if (want_grad) {
        const TensorInfo& vw = params.info(TensorSlot::ValueW);
        const TensorInfo& vb = params.info(TensorSlot::ValueB);
        Eigen::Map<RowMatrix>(grad.data() + vw.offset, vw.rows, vw.cols).noalias() += d_value.transpose() * hidden;
        grad[vb.offset] += d_value.sum();
        const RowMatrix d_hidden = d_value * params.tensor(TensorSlot::ValueW);
        trunk_backward(params, Trunk::Critic, cache, d_hidden, grad);
      }
    }
  }
  if (want_grad) {
    const std::size_t off = params.info(TensorSlot::LogStd).offset;
    grad[off] += d_log_std[0];
    grad[off + 1] += d_log_std[1];
  }
  loss.total = (terms.actor ? loss.actor : 0.0) + (terms.critic ? config.value_coef * loss.critic : 0.0) -
               (terms.entropy ? config.entropy_coef * loss.entropy : 0.0);
  return loss;
}

}  // namespace

LossValue loss_and_gradient(const NetworkParams& params, std::span<const SampleRef> samples,
                            const TrainerConfig& config, std::span<double> grad, LossTerms terms) {
  if (grad.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "gradient buffer size mismatch");
  return compute_loss(params, samples, config, terms, grad);
}

LossValue evaluate_loss(const NetworkParams& params, std::span<const SampleRef> samples,
                        const TrainerConfig& config, LossTerms terms) {
  return compute_loss(params, samples, config, terms, {});
}

AdamOptimizer::AdamOptimizer(std::size_t n, double beta1, double beta2, double eps)
    : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad, double learning_rate) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double step = learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    if (step != 0.0) params[i] -= step;
  }
}

UpdateStats policy_update(NetworkParams& params, AdamOptimizer& optimizer, const RolloutBatch& batch,
                          const AdvantageBatch& adv, const TrainerConfig& config, Rng& rng) {
  config.validate();
  const std::vector<SampleRef> samples = flatten_samples(batch, adv);
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "policy_update needs a nonempty batch");

  NetworkParams work = params;
  AdamOptimizer opt = optimizer;
  std::vector<double> grad(work.size());
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<SampleRef> mb;
  UpdateStats stats;

  for (int epoch = 0; epoch < config.epochs_per_batch; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.minibatch_size) {
      const std::size_t end = std::min(order.size(), start + config.minibatch_size);
      mb.clear();
      for (std::size_t i = start; i < end; ++i) mb.push_back(samples[order[i]]);
      const LossValue loss = loss_and_gradient(work, mb, config, grad);
      double norm2 = 0.0;
      for (double g : grad) norm2 += g * g;
      if (!std::isfinite(loss.total) || !std::isfinite(norm2)) {
        throw Error(ErrorCode::NonFiniteLoss, "non-finite loss in policy update; parameters kept");
      }
      if (config.max_grad_norm > 0.0 && norm2 > config.max_grad_norm * config.max_grad_norm) {
        const double scale = config.max_grad_norm / std::sqrt(norm2);
        for (double& g : grad) g *= scale;
      }
      opt.step(work.values(), grad, config.learning_rate);
      stats.actor_loss += loss.actor;
      stats.critic_loss += loss.critic;
      stats.entropy += loss.entropy;
      ++stats.minibatches;
    }
  }
  if (stats.minibatches > 0) {
    const double k = static_cast<double>(stats.minibatches);
    stats.actor_loss /= k;
    stats.critic_loss /= k;
    stats.entropy /= k;
  }
  params = std::move(work);
  optimizer = std::move(opt);
  return stats;
}

TrainResult train(const EpisodeConfig& env, const TrainerConfig& config, std::uint64_t seed,
                  const IterationCallback& on_iteration) {
  config.validate();
  env.validate();
  Rng init_rng = make_rng(seed, 0x1417);
  TrainResult result{NetworkParams::initialized(ConvNetShape::for_lidar(env.lidar), init_rng), {}};
  AdamOptimizer optimizer(result.params.size());
  for (int it = 0; it < config.iterations; ++it) {
    const RolloutBatch batch = collect_rollouts(result.params, env, config, mix_seed(seed, 0x5011, static_cast<std::uint64_t>(it)));
    const AdvantageBatch adv = compute_advantages(batch, config);
    Rng update_rng = make_rng(seed, 0x0bda7e, static_cast<std::uint64_t>(it));
    const UpdateStats stats = policy_update(result.params, optimizer, batch, adv, config, update_rng);
    IterationLog log{it, batch.mean_reward(), stats.actor_loss, stats.critic_loss, stats.entropy,
                     batch.sample_count()};
    result.curve.push_back(log);
    if (on_iteration) on_iteration(log, result.params);
  }
  return result;
}

double finite_diff_check(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                         std::span<const double> analytic, std::size_t n_probes, Rng& rng, double step,
                         double floor) {
  if (n_probes == 0) throw Error(ErrorCode::InvalidArgument, "finite_diff_check needs n_probes >= 1");
  if (analytic.size() != x.size() || x.empty()) {
    throw Error(ErrorCode::InvalidArgument, "finite_diff_check: gradient and point sizes differ");
  }
  std::vector<double> probe(x.begin(), x.end());
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  double worst = 0.0;
  for (std::size_t p = 0; p < n_probes; ++p) {
    const std::size_t i = pick(rng);
    probe[i] = x[i] + step;
    const double up = f(probe);
    probe[i] = x[i] - step;
    const double down = f(probe);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

double finite_diff_check(const NetworkParams& params, std::span<const SampleRef> samples,
                         const TrainerConfig& config, std::size_t n_probes, Rng& rng) {
  std::vector<double> grad(params.size());
  loss_and_gradient(params, samples, config, grad);
  NetworkParams work = params;
  auto f = [&](std::span<const double> x) {
    std::copy(x.begin(), x.end(), work.values().begin());
    return evaluate_loss(work, samples, config).total;
  };
  return finite_diff_check(f, params.values(), grad, n_probes, rng);
}

void write_learning_curve_csv(std::ostream& out, std::span<const IterationLog> curve) {
  out << "# escortsim learning-curve v1\n";
  out << "iteration,mean_batch_reward,actor_loss,critic_loss,entropy,samples\n";
  for (const auto& r : curve) {
    out << r.iteration << ',' << encode_float(r.mean_batch_reward) << ',' << encode_float(r.actor_loss) << ','
        << encode_float(r.critic_loss) << ',' << encode_float(r.entropy) << ',' << r.samples << '\n';
  }
}

}  // namespace escortsim
