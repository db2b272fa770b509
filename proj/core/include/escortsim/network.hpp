#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "escortsim/rng.hpp"
#include "escortsim/sensing.hpp"
#include "escortsim/vec2.hpp"

namespace escortsim {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Two conv + max-pool stages (valid padding, stride 1 convolutions) followed
/// by a ReLU dense layer. The input is `in_channels` rows of `signal_len`
/// samples; with the default lidar that is 3 timesteps x 1536.
struct ConvNetShape {
  int in_channels{3};
  int signal_len{1536};
  int conv1_filters{32};
  int conv2_filters{64};
  int kernel{10};
  int pool{5};
  int hidden{512};

  static ConvNetShape for_lidar(const LidarConfig& lidar);

  int conv1_len() const { return signal_len - kernel + 1; }
  int pool1_len() const { return conv1_len() / pool; }
  int conv2_len() const { return pool1_len() - kernel + 1; }
  int pool2_len() const { return conv2_len() / pool; }
  int flat_dim() const { return pool2_len() * conv2_filters; }
  std::size_t input_size() const {
    return static_cast<std::size_t>(in_channels) * static_cast<std::size_t>(signal_len);
  }
  void validate() const;
  bool operator==(const ConvNetShape&) const = default;
};

/// Tensor slots inside NetworkParams. Each trunk holds conv1, conv2 and the
/// dense layer; weights are stored output-major (rows = outputs).
enum class TensorSlot : int {
  ActorConv1W, ActorConv1B, ActorConv2W, ActorConv2B, ActorDenseW, ActorDenseB,
  MeanW, MeanB, LogStd,
  CriticConv1W, CriticConv1B, CriticConv2W, CriticConv2B, CriticDenseW, CriticDenseB,
  ValueW, ValueB,
  Count
};
inline constexpr std::size_t kTensorCount = static_cast<std::size_t>(TensorSlot::Count);

struct TensorInfo {
  std::string name;
  int rows{0};
  int cols{0};
  std::size_t offset{0};
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Actor (Gaussian mean head plus state-independent log-std) and critic
/// (scalar head) with identical trunks, stored in one flat buffer.
class NetworkParams {
 public:
  NetworkParams() = default;
  explicit NetworkParams(const ConvNetShape& shape);  // all zeros

  /// Scaled orthogonal init for trunks, 0.01-scaled heads, zero biases and
  /// zero log-std.
  static NetworkParams initialized(const ConvNetShape& shape, Rng& rng);

  const ConvNetShape& shape() const { return shape_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  const std::array<TensorInfo, kTensorCount>& tensors() const { return tensors_; }
  const TensorInfo& info(TensorSlot slot) const { return tensors_[static_cast<std::size_t>(slot)]; }

  Eigen::Map<RowMatrix> tensor(TensorSlot slot);
  Eigen::Map<const RowMatrix> tensor(TensorSlot slot) const;

  bool operator==(const NetworkParams& o) const {
    return shape_ == o.shape_ && values_ == o.values_;
  }

 private:
  ConvNetShape shape_;
  std::array<TensorInfo, kTensorCount> tensors_;
  std::vector<double> values_;
};

struct GaussianAction {
  Vec2 mean;
  Vec2 std{1.0, 1.0};
};

/// Intermediate activations kept for backpropagation through one trunk.
struct TrunkCache {
  int batch{0};
  RowMatrix patches1;  // (B*L1) x (C*K)
  RowMatrix act1;      // (B*L1) x F1, post-ReLU
  RowMatrix pool1;     // (B*P1) x F1
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> arg1;
  RowMatrix patches2;  // (B*L2) x (F1*K)
  RowMatrix act2;      // (B*L2) x F2, post-ReLU
  RowMatrix pool2;     // (B*P2) x F2 == B x flat
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> arg2;
  RowMatrix hidden;    // B x H, post-ReLU
};

enum class Trunk { Actor, Critic };

/// Forward pass of one trunk on a batch of observations (B x input_size,
/// row-major). Returns the hidden activations; the cache is filled when given.
RowMatrix trunk_forward(const NetworkParams& params, Trunk trunk,
                        const Eigen::Ref<const RowMatrix>& inputs,
                        TrunkCache* cache = nullptr);

/// Accumulates parameter gradients of a trunk into `grad` (same layout as
/// NetworkParams::values) given dLoss/dHidden.
void trunk_backward(const NetworkParams& params, Trunk trunk,
                    const TrunkCache& cache,
                    const Eigen::Ref<const RowMatrix>& d_hidden,
                    std::span<double> grad);

/// Throws Error(ShapeMismatch) unless observation.size() == input_size.
GaussianAction forward_actor(const NetworkParams& params, std::span<const double> observation);
double forward_critic(const NetworkParams& params, std::span<const double> observation);

/// Batched variants: one row per observation.
std::vector<GaussianAction> forward_actor_batch(const NetworkParams& params,
                                                const Eigen::Ref<const RowMatrix>& inputs);
std::vector<double> forward_critic_batch(const NetworkParams& params,
                                         const Eigen::Ref<const RowMatrix>& inputs);

/// Stacks observations into a B x input_size matrix, checking each length.
RowMatrix stack_observations(const NetworkParams& params,
                             std::span<const std::vector<double>> observations);

}  // namespace escortsim
