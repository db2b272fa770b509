#include "escortsim/network.hpp"

#include <cmath>
#include <string>

#include <Eigen/QR>

#include "escortsim/error.hpp"

namespace escortsim {

ConvNetShape ConvNetShape::for_lidar(const LidarConfig& lidar) {
  ConvNetShape s;
  s.in_channels = lidar.history_len;
  s.signal_len = static_cast<int>(LidarConfig::n_channels) * lidar.n_rays;
  return s;
}

void ConvNetShape::validate() const {
  if (in_channels < 1 || kernel < 1 || pool < 1 || hidden < 1 || conv1_filters < 1 ||
      conv2_filters < 1 || pool2_len() < 1) {
    throw Error(ErrorCode::ShapeMismatch, "network shape leaves no features after pooling (signal_len " +
                                              std::to_string(signal_len) + ")");
  }
}

namespace {

constexpr int kActionDim = 2;

TensorSlot slot_of(Trunk trunk, int layer) {
  const int base = trunk == Trunk::Actor ? static_cast<int>(TensorSlot::ActorConv1W)
                                         : static_cast<int>(TensorSlot::CriticConv1W);
  return static_cast<TensorSlot>(base + layer);
}

enum TrunkLayer { kConv1W = 0, kConv1B, kConv2W, kConv2B, kDenseW, kDenseB };

Eigen::Map<RowMatrix> grad_map(const NetworkParams& params, TensorSlot slot, std::span<double> grad) {
  const TensorInfo& t = params.info(slot);
  return {grad.data() + t.offset, t.rows, t.cols};
}

template <typename Src, typename Arg>
void pool_forward(const Src& act, int batch, int in_len, int out_len, int pool, RowMatrix& out,
                  Arg& arg) {
  const auto filters = act.cols();
  out.resize(static_cast<Eigen::Index>(batch) * out_len, filters);
  arg.resize(out.rows(), filters);
  for (int b = 0; b < batch; ++b) {
    for (int p = 0; p < out_len; ++p) {
      const Eigen::Index orow = static_cast<Eigen::Index>(b) * out_len + p;
      const Eigen::Index base = static_cast<Eigen::Index>(b) * in_len + static_cast<Eigen::Index>(p) * pool;
      for (Eigen::Index f = 0; f < filters; ++f) {
        Eigen::Index best = base;
        double v = act(base, f);
        for (int j = 1; j < pool; ++j) {
          const double w = act(base + j, f);
          if (w > v) {
            v = w;
            best = base + j;
          }
        }
        out(orow, f) = v;
        arg(orow, f) = static_cast<int>(best);
      }
    }
  }
}

}  // namespace

NetworkParams::NetworkParams(const ConvNetShape& shape) : shape_(shape) {
  shape_.validate();
  const int ck1 = shape.in_channels * shape.kernel;
  const int ck2 = shape.conv1_filters * shape.kernel;
  auto def = [&](TensorSlot slot, std::string name, int rows, int cols) {
    tensors_[static_cast<std::size_t>(slot)] = TensorInfo{std::move(name), rows, cols, 0};
  };
  for (Trunk trunk : {Trunk::Actor, Trunk::Critic}) {
    const std::string prefix = trunk == Trunk::Actor ? "actor." : "critic.";
    def(slot_of(trunk, kConv1W), prefix + "conv1.weight", shape.conv1_filters, ck1);
    def(slot_of(trunk, kConv1B), prefix + "conv1.bias", 1, shape.conv1_filters);
    def(slot_of(trunk, kConv2W), prefix + "conv2.weight", shape.conv2_filters, ck2);
    def(slot_of(trunk, kConv2B), prefix + "conv2.bias", 1, shape.conv2_filters);
    def(slot_of(trunk, kDenseW), prefix + "dense.weight", shape.hidden, shape.flat_dim());
    def(slot_of(trunk, kDenseB), prefix + "dense.bias", 1, shape.hidden);
  }
  def(TensorSlot::MeanW, "actor.mean.weight", kActionDim, shape.hidden);
  def(TensorSlot::MeanB, "actor.mean.bias", 1, kActionDim);
  def(TensorSlot::LogStd, "actor.log_std", 1, kActionDim);
  def(TensorSlot::ValueW, "critic.value.weight", 1, shape.hidden);
  def(TensorSlot::ValueB, "critic.value.bias", 1, 1);

  std::size_t offset = 0;
  for (auto& t : tensors_) {
    t.offset = offset;
    offset += t.size();
  }
  values_.assign(offset, 0.0);
}

NetworkParams NetworkParams::initialized(const ConvNetShape& shape, Rng& rng) {
  NetworkParams p(shape);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto orthogonal = [&](TensorSlot slot, double gain) {
    auto w = p.tensor(slot);
    const Eigen::Index m = std::max(w.rows(), w.cols());
    const Eigen::Index n = std::min(w.rows(), w.cols());
    Eigen::MatrixXd a(m, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < m; ++i) a(i, j) = gauss(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, n);
    // Fix the sign ambiguity of the factorization.
    const Eigen::MatrixXd r = qr.matrixQR().topRows(n).template triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }
    if (w.rows() >= w.cols()) {
      w = gain * q;
    } else {
      w = gain * q.transpose();
    }
  };
  const double relu_gain = std::sqrt(2.0);
  for (Trunk trunk : {Trunk::Actor, Trunk::Critic}) {
    orthogonal(slot_of(trunk, kConv1W), relu_gain);
    orthogonal(slot_of(trunk, kConv2W), relu_gain);
    orthogonal(slot_of(trunk, kDenseW), relu_gain);
  }
  orthogonal(TensorSlot::MeanW, 0.01);
  orthogonal(TensorSlot::ValueW, 1.0);
  return p;
}

Eigen::Map<RowMatrix> NetworkParams::tensor(TensorSlot slot) {
  const TensorInfo& t = info(slot);
  return {values_.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<const RowMatrix> NetworkParams::tensor(TensorSlot slot) const {
  const TensorInfo& t = info(slot);
  return {values_.data() + t.offset, t.rows, t.cols};
}

RowMatrix trunk_forward(const NetworkParams& params, Trunk trunk,
                        const Eigen::Ref<const RowMatrix>& inputs, TrunkCache* cache) {
  const ConvNetShape& s = params.shape();
  if (inputs.cols() != static_cast<Eigen::Index>(s.input_size())) {
    throw Error(ErrorCode::ShapeMismatch, "observation length " + std::to_string(inputs.cols()) +
                                              " does not match network input " +
                                              std::to_string(s.input_size()));
  }
  TrunkCache local;
  TrunkCache& c = cache ? *cache : local;
  const int batch = static_cast<int>(inputs.rows());
  const int K = s.kernel;
  const int L = s.signal_len, L1 = s.conv1_len(), P1 = s.pool1_len(), L2 = s.conv2_len(),
            P2 = s.pool2_len();
  const int C = s.in_channels, F1 = s.conv1_filters;
  c.batch = batch;

  c.patches1.resize(static_cast<Eigen::Index>(batch) * L1, C * K);
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < L1; ++l) {
      double* row = c.patches1.row(static_cast<Eigen::Index>(b) * L1 + l).data();
      for (int ch = 0; ch < C; ++ch) {
        const double* src = inputs.row(b).data() + static_cast<std::ptrdiff_t>(ch) * L + l;
        for (int k = 0; k < K; ++k) row[ch * K + k] = src[k];
      }
    }
  }
  c.act1.noalias() = c.patches1 * params.tensor(slot_of(trunk, kConv1W)).transpose();
  c.act1.rowwise() += params.tensor(slot_of(trunk, kConv1B)).row(0);
  c.act1 = c.act1.cwiseMax(0.0);
  pool_forward(c.act1, batch, L1, P1, s.pool, c.pool1, c.arg1);

  c.patches2.resize(static_cast<Eigen::Index>(batch) * L2, F1 * K);
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < L2; ++l) {
      double* row = c.patches2.row(static_cast<Eigen::Index>(b) * L2 + l).data();
      for (int k = 0; k < K; ++k) {
        const double* src = c.pool1.row(static_cast<Eigen::Index>(b) * P1 + l + k).data();
        for (int f = 0; f < F1; ++f) row[f * K + k] = src[f];
      }
    }
  }
  c.act2.noalias() = c.patches2 * params.tensor(slot_of(trunk, kConv2W)).transpose();
  c.act2.rowwise() += params.tensor(slot_of(trunk, kConv2B)).row(0);
  c.act2 = c.act2.cwiseMax(0.0);
  pool_forward(c.act2, batch, L2, P2, s.pool, c.pool2, c.arg2);

  Eigen::Map<const RowMatrix> flat(c.pool2.data(), batch, s.flat_dim());
  c.hidden.noalias() = flat * params.tensor(slot_of(trunk, kDenseW)).transpose();
  c.hidden.rowwise() += params.tensor(slot_of(trunk, kDenseB)).row(0);
  c.hidden = c.hidden.cwiseMax(0.0);
  return c.hidden;
}

void trunk_backward(const NetworkParams& params, Trunk trunk, const TrunkCache& c,
                    const Eigen::Ref<const RowMatrix>& d_hidden, std::span<double> grad) {
  const ConvNetShape& s = params.shape();
  const int batch = c.batch;
  const int K = s.kernel;
  const int L1 = s.conv1_len(), P1 = s.pool1_len(), L2 = s.conv2_len(), P2 = s.pool2_len();
  const int F1 = s.conv1_filters, F2 = s.conv2_filters;

  RowMatrix dh = d_hidden.cwiseProduct((c.hidden.array() > 0.0).cast<double>().matrix());
  Eigen::Map<const RowMatrix> flat(c.pool2.data(), batch, s.flat_dim());
  grad_map(params, slot_of(trunk, kDenseW), grad).noalias() += dh.transpose() * flat;
  grad_map(params, slot_of(trunk, kDenseB), grad) += dh.colwise().sum();

  RowMatrix d_flat = dh * params.tensor(slot_of(trunk, kDenseW));
  Eigen::Map<const RowMatrix> d_pool2(d_flat.data(), static_cast<Eigen::Index>(batch) * P2, F2);

  RowMatrix d_act2 = RowMatrix::Zero(static_cast<Eigen::Index>(batch) * L2, F2);
  for (Eigen::Index r = 0; r < d_pool2.rows(); ++r)
    for (Eigen::Index f = 0; f < F2; ++f) d_act2(c.arg2(r, f), f) += d_pool2(r, f);
  d_act2 = d_act2.cwiseProduct((c.act2.array() > 0.0).cast<double>().matrix());
  grad_map(params, slot_of(trunk, kConv2W), grad).noalias() += d_act2.transpose() * c.patches2;
  grad_map(params, slot_of(trunk, kConv2B), grad) += d_act2.colwise().sum();

  RowMatrix d_patches2 = d_act2 * params.tensor(slot_of(trunk, kConv2W));
  RowMatrix d_pool1 = RowMatrix::Zero(static_cast<Eigen::Index>(batch) * P1, F1);
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < L2; ++l) {
      const double* row = d_patches2.row(static_cast<Eigen::Index>(b) * L2 + l).data();
      for (int k = 0; k < K; ++k) {
        double* dst = d_pool1.row(static_cast<Eigen::Index>(b) * P1 + l + k).data();
        for (int f = 0; f < F1; ++f) dst[f] += row[f * K + k];
      }
    }
  }

  RowMatrix d_act1 = RowMatrix::Zero(static_cast<Eigen::Index>(batch) * L1, F1);
  for (Eigen::Index r = 0; r < d_pool1.rows(); ++r)
    for (Eigen::Index f = 0; f < F1; ++f) d_act1(c.arg1(r, f), f) += d_pool1(r, f);
  d_act1 = d_act1.cwiseProduct((c.act1.array() > 0.0).cast<double>().matrix());
  grad_map(params, slot_of(trunk, kConv1W), grad).noalias() += d_act1.transpose() * c.patches1;
  grad_map(params, slot_of(trunk, kConv1B), grad) += d_act1.colwise().sum();
}

RowMatrix stack_observations(const NetworkParams& params,
                             std::span<const std::vector<double>> observations) {
  const auto n = static_cast<Eigen::Index>(params.shape().input_size());
  RowMatrix m(static_cast<Eigen::Index>(observations.size()), n);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    if (static_cast<Eigen::Index>(observations[i].size()) != n) {
      throw Error(ErrorCode::ShapeMismatch, "observation length " + std::to_string(observations[i].size()) +
                                                " does not match network input " + std::to_string(n));
    }
    m.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(observations[i].data(), n);
  }
  return m;
}

std::vector<GaussianAction> forward_actor_batch(const NetworkParams& params,
                                                const Eigen::Ref<const RowMatrix>& inputs) {
  const RowMatrix hidden = trunk_forward(params, Trunk::Actor, inputs);
  RowMatrix mean = hidden * params.tensor(TensorSlot::MeanW).transpose();
  mean.rowwise() += params.tensor(TensorSlot::MeanB).row(0);
  const auto log_std = params.tensor(TensorSlot::LogStd);
  const Vec2 std{std::exp(log_std(0, 0)), std::exp(log_std(0, 1))};
  std::vector<GaussianAction> out(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = GaussianAction{{mean(i, 0), mean(i, 1)}, std};
  }
  return out;
}

std::vector<double> forward_critic_batch(const NetworkParams& params,
                                         const Eigen::Ref<const RowMatrix>& inputs) {
  const RowMatrix hidden = trunk_forward(params, Trunk::Critic, inputs);
  const Eigen::VectorXd v = hidden * params.tensor(TensorSlot::ValueW).row(0).transpose();
  const double bias = params.tensor(TensorSlot::ValueB)(0, 0);
  std::vector<double> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i) + bias;
  return out;
}

GaussianAction forward_actor(const NetworkParams& params, std::span<const double> observation) {
  if (observation.size() != params.shape().input_size()) {
    throw Error(ErrorCode::ShapeMismatch, "observation length " + std::to_string(observation.size()) +
                                              " does not match network input " +
                                              std::to_string(params.shape().input_size()));
  }
  Eigen::Map<const RowMatrix> row(observation.data(), 1, static_cast<Eigen::Index>(observation.size()));
  return forward_actor_batch(params, row).front();
}

double forward_critic(const NetworkParams& params, std::span<const double> observation) {
  if (observation.size() != params.shape().input_size()) {
    throw Error(ErrorCode::ShapeMismatch, "observation length " + std::to_string(observation.size()) +
                                              " does not match network input " +
                                              std::to_string(params.shape().input_size()));
  }
  Eigen::Map<const RowMatrix> row(observation.data(), 1, static_cast<Eigen::Index>(observation.size()));
  return forward_critic_batch(params, row).front();
}

}  // namespace escortsim
