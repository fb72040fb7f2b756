#ifndef HISO_TASKS_HPP
#define HISO_TASKS_HPP

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hiso/rng.hpp"
#include "hiso/types.hpp"

namespace hiso {

/// A client's mini-batch. Empty indices means the whole shard.
struct Batch {
  ClientId client = 0;
  std::vector<std::size_t> indices;
};

/// Federated objective f(x) = (1/M) sum_i f_i(x). Immutable after
/// construction; gradients and curvature are for oracles and metrics only,
/// the optimizer sees loss values alone.
class Task {
 public:
  virtual ~Task() = default;

  virtual Eigen::Index dim() const = 0;
  virtual std::size_t num_clients() const = 0;
  virtual ModelVector initial_point() const = 0;

  /// A stochastic batch from the client's shard, a pure function of the seed.
  virtual Batch sample_batch(ClientId client, Seed seed) const = 0;

  virtual double loss(const Batch& batch, const ModelVector& x) const = 0;
  virtual ModelVector grad(const Batch& batch, const ModelVector& x) const = 0;
  virtual ModelVector hessian_diag(const Batch& batch, const ModelVector& x) const = 0;

  /// Average of the full-shard client losses.
  virtual double global_loss(const ModelVector& x) const;
  virtual ModelVector global_grad(const ModelVector& x) const;

  /// Diagonal curvature when it is known exactly (axis-aligned quadratics).
  virtual std::optional<ModelVector> true_curvature() const { return std::nullopt; }

 protected:
  void check(const Batch& batch, const ModelVector& x) const;
};

/// exp(g_i) with g ~ N(0, variance), deterministic in the seed.
ModelVector make_lognormal_spectrum(Eigen::Index d, double variance, Seed seed);

struct QuadraticSpec {
  Eigen::Index dim = 10;
  std::size_t clients = 4;
  double log_variance = 3.0;        // spread of log(spectrum)
  double dispersion = 0.0;          // scale of per-client center offsets
  double x0_scale = 1.0;            // initial point is x0_scale * ones
  bool rotate = false;              // non-axis-aligned curvature
  Seed seed{1};
};

/// f_i(x) = 1/2 (x - c_i)^T A (x - c_i), A = Q^T Diag(spectrum) Q
/// (Q = I unless rotated).
class QuadraticTask final : public Task {
 public:
  QuadraticTask(ModelVector spectrum, std::vector<ModelVector> centers, ModelVector x0,
                std::optional<Matrix<double>> rotation = std::nullopt);

  static QuadraticTask make(const QuadraticSpec& spec);

  Eigen::Index dim() const override { return spectrum_.size(); }
  std::size_t num_clients() const override { return centers_.size(); }
  ModelVector initial_point() const override { return x0_; }
  Batch sample_batch(ClientId client, Seed seed) const override;

  double loss(const Batch& batch, const ModelVector& x) const override;
  ModelVector grad(const Batch& batch, const ModelVector& x) const override;
  ModelVector hessian_diag(const Batch& batch, const ModelVector& x) const override;
  std::optional<ModelVector> true_curvature() const override;

  const ModelVector& spectrum() const noexcept { return spectrum_; }
  const std::vector<ModelVector>& centers() const noexcept { return centers_; }
  /// Largest curvature L.
  double smoothness() const { return spectrum_.maxCoeff(); }
  /// Minimum of the global loss.
  double optimal_loss() const;

 private:
  ModelVector apply(const ModelVector& v) const;  // A v

  ModelVector spectrum_;
  std::vector<ModelVector> centers_;
  ModelVector mean_center_;
  ModelVector x0_;
  std::optional<Matrix<double>> rotation_;
};

/// Client assignment for non-IID splits.
struct DirichletPartition {
  double alpha = 1.0;
  std::size_t clients = 0;
  std::vector<ClientId> assignment;  // sample -> client

  std::vector<std::size_t> sizes() const;
  std::vector<std::vector<std::size_t>> shards() const;
};

/// Per-class client proportions drawn from Dirichlet(alpha * 1_M);
/// resamples until every client holds at least one sample. Throws
/// kInvalidArgument when there are fewer samples than clients.
DirichletPartition partition_dirichlet(std::span<const int> labels, std::size_t clients,
                                       double alpha, Seed seed);

struct LogisticSpec {
  std::size_t samples = 2000;
  Eigen::Index dim = 20;
  std::size_t clients = 8;
  double alpha = 1.0;        // Dirichlet concentration
  double separation = 1.0;   // distance of class means from the origin
  double l2 = 1e-3;
  std::size_t batch_size = 32;
  Seed seed{1};
};

/// L2-regularized logistic regression on two Gaussian class blobs.
class LogisticTask final : public Task {
 public:
  LogisticTask(RowMatrix<double> features, std::vector<int> labels, DirichletPartition partition,
               double l2, std::size_t batch_size);

  static LogisticTask make(const LogisticSpec& spec);

  Eigen::Index dim() const override { return features_.cols(); }
  std::size_t num_clients() const override { return shards_.size(); }
  ModelVector initial_point() const override { return ModelVector::Zero(dim()); }
  Batch sample_batch(ClientId client, Seed seed) const override;

  double loss(const Batch& batch, const ModelVector& x) const override;
  ModelVector grad(const Batch& batch, const ModelVector& x) const override;
  /// Gauss-Newton diagonal.
  ModelVector hessian_diag(const Batch& batch, const ModelVector& x) const override;

  const std::vector<std::vector<std::size_t>>& shards() const noexcept { return shards_; }
  const std::vector<int>& labels() const noexcept { return labels_; }

 private:
  std::span<const std::size_t> rows(const Batch& batch) const;

  RowMatrix<double> features_;
  std::vector<int> labels_;
  std::vector<std::vector<std::size_t>> shards_;
  double l2_;
  std::size_t batch_size_;
};

/// max_i ||grad f_i(x) - grad f(x)|| maximized over the probe points.
double heterogeneity(const Task& task, std::span<const ModelVector> probes);

}  // namespace hiso

#endif  // HISO_TASKS_HPP
