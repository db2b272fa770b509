#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "escortsim/episode.hpp"
#include "escortsim/network.hpp"
#include "escortsim/rng.hpp"

namespace escortsim {

struct TrainerConfig {
  double gamma{0.99};
  double lambda{0.95};
  double clip_epsilon{0.2};
  double learning_rate{3e-4};
  double entropy_coef{0.01};
  double value_coef{0.5};
  std::size_t batch_size{8192};
  std::size_t minibatch_size{1024};
  int epochs_per_batch{4};
  int n_parallel_envs{4};
  int iterations{10};
  /// Global gradient-norm clip; <= 0 disables.
  double max_grad_norm{0.5};
  /// Samples per forward/backward chunk inside a minibatch.
  std::size_t chunk_size{128};

  void validate() const;
};

/// One escort's experience over one episode segment.
struct Trajectory {
  std::size_t env_index{0};
  BodyId escort_id{0};
  std::vector<std::vector<double>> observations;
  std::vector<Vec2> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  /// Critic value after the last step; 0 when the segment ended terminally.
  double bootstrap_value{0.0};

  std::size_t size() const { return rewards.size(); }
};

struct RolloutBatch {
  std::vector<Trajectory> trajectories;
  std::size_t sample_count() const;
  double mean_reward() const;
};

/// Flattened in trajectory order.
struct AdvantageBatch {
  std::vector<double> advantages;  // normalized
  std::vector<double> returns;     // raw advantage + value
};

/// Backward GAE recursion. `values` has one more element than `rewards`
/// (the bootstrap); a done step ignores the next value.
std::vector<double> compute_gae(std::span<const double> rewards,
                                std::span<const double> values,
                                std::span<const std::uint8_t> dones,
                                double gamma, double lambda);

/// Mean 0, population std 1 (unchanged when fewer than two samples).
void normalize_in_place(std::span<double> values);

AdvantageBatch compute_advantages(const RolloutBatch& batch, const TrainerConfig& config);

RolloutBatch collect_rollouts(const NetworkParams& params, const EpisodeConfig& env,
                              const TrainerConfig& config, std::uint64_t seed);

/// Flat view of one training sample.
struct SampleRef {
  std::span<const double> observation;
  Vec2 action;
  double old_log_prob{0.0};
  double advantage{0.0};
  double return_target{0.0};
};

std::vector<SampleRef> flatten_samples(const RolloutBatch& batch, const AdvantageBatch& adv);

/// Which loss terms contribute to the gradient.
struct LossTerms {
  bool actor{true};
  bool critic{true};
  bool entropy{true};
};

struct LossValue {
  double actor{0.0};    // -mean clipped surrogate
  double critic{0.0};   // mean squared value error
  double entropy{0.0};  // mean policy entropy
  double total{0.0};    // actor + value_coef*critic - entropy_coef*entropy
};

/// Minibatch loss and its gradient w.r.t. every parameter (grad has
/// params.size() entries and is overwritten).
LossValue loss_and_gradient(const NetworkParams& params, std::span<const SampleRef> samples,
                            const TrainerConfig& config, std::span<double> grad,
                            LossTerms terms = {});
LossValue evaluate_loss(const NetworkParams& params, std::span<const SampleRef> samples,
                        const TrainerConfig& config, LossTerms terms = {});

class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::size_t n, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad, double learning_rate);
  std::size_t steps() const { return t_; }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  double beta1_, beta2_, eps_;
  std::size_t t_{0};
};

struct UpdateStats {
  double actor_loss{0.0};
  double critic_loss{0.0};
  double entropy{0.0};
  std::size_t minibatches{0};
};

/// Clipped-surrogate epochs over shuffled minibatches. On a non-finite loss
/// throws Error(NonFiniteLoss) and leaves params untouched.
UpdateStats policy_update(NetworkParams& params, AdamOptimizer& optimizer,
                          const RolloutBatch& batch, const AdvantageBatch& adv,
                          const TrainerConfig& config, Rng& rng);

struct IterationLog {
  int iteration{0};
  double mean_batch_reward{0.0};
  double actor_loss{0.0};
  double critic_loss{0.0};
  double entropy{0.0};
  std::size_t samples{0};
};

struct TrainResult {
  NetworkParams params;
  std::vector<IterationLog> curve;
};

using IterationCallback = std::function<void(const IterationLog&, const NetworkParams&)>;

/// collect -> advantages -> update, `config.iterations` times.
TrainResult train(const EpisodeConfig& env, const TrainerConfig& config, std::uint64_t seed,
                  const IterationCallback& on_iteration = {});

/// Largest relative error between `analytic` and central differences of f on
/// n_probes random coordinates. Relative error is |a - n| / max(|a|, |n|, floor).
double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                         std::span<const double> x, std::span<const double> analytic,
                         std::size_t n_probes, Rng& rng, double step = 1e-6,
                         double floor = 1e-6);

/// Total-loss gradient check on the full network for one batch of samples.
double finite_diff_check(const NetworkParams& params, std::span<const SampleRef> samples,
                         const TrainerConfig& config, std::size_t n_probes, Rng& rng);

void write_learning_curve_csv(std::ostream& out, std::span<const IterationLog> curve);

}  // namespace escortsim
