#include "hiso/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hiso/error.hpp"

namespace hiso {

namespace {

constexpr std::uint64_t kTagSpectrum = 101;
constexpr std::uint64_t kTagCenters = 102;
constexpr std::uint64_t kTagRotation = 103;
constexpr std::uint64_t kTagFeatures = 104;
constexpr std::uint64_t kTagPartition = 105;
constexpr std::uint64_t kTagBatch = 106;

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

// Task

void Task::check(const Batch& batch, const ModelVector& x) const {
  if (x.size() != dim()) throw Error(ErrorKind::kInvalidDimension, "task: iterate has wrong dimension");
  if (batch.client >= num_clients()) throw Error(ErrorKind::kRange, "task: batch client out of range");
}

double Task::global_loss(const ModelVector& x) const {
  double total = 0.0;
  for (std::size_t i = 0; i < num_clients(); ++i) {
    total += loss(Batch{static_cast<ClientId>(i), {}}, x);
  }
  return total / static_cast<double>(num_clients());
}

ModelVector Task::global_grad(const ModelVector& x) const {
  ModelVector total = ModelVector::Zero(dim());
  for (std::size_t i = 0; i < num_clients(); ++i) {
    total += grad(Batch{static_cast<ClientId>(i), {}}, x);
  }
  return total / static_cast<double>(num_clients());
}

ModelVector make_lognormal_spectrum(Eigen::Index d, double variance, Seed seed) {
  if (d < 1) throw Error(ErrorKind::kInvalidDimension, "make_lognormal_spectrum: d must be >= 1");
  if (!(variance > 0.0)) throw Error(ErrorKind::kInvalidArgument, "make_lognormal_spectrum: variance must be > 0");
  return (std::sqrt(variance) * gaussian_vector(seed, d).array()).exp().matrix();
}

// Quadratic

QuadraticTask::QuadraticTask(ModelVector spectrum, std::vector<ModelVector> centers, ModelVector x0,
                             std::optional<Matrix<double>> rotation)
    : spectrum_(std::move(spectrum)),
      centers_(std::move(centers)),
      x0_(std::move(x0)),
      rotation_(std::move(rotation)) {
  if (spectrum_.size() < 1) throw Error(ErrorKind::kInvalidDimension, "quadratic: empty spectrum");
  if (!(spectrum_.array() > 0.0).all()) throw Error(ErrorKind::kInvalidArgument, "quadratic: spectrum must be positive");
  if (centers_.empty()) throw Error(ErrorKind::kInvalidArgument, "quadratic: need at least one client");
  for (const ModelVector& c : centers_) {
    if (c.size() != spectrum_.size()) throw Error(ErrorKind::kInvalidDimension, "quadratic: center size");
  }
  if (x0_.size() != spectrum_.size()) throw Error(ErrorKind::kInvalidDimension, "quadratic: x0 size");
  if (rotation_ && (rotation_->rows() != dim() || rotation_->cols() != dim())) {
    throw Error(ErrorKind::kInvalidDimension, "quadratic: rotation shape");
  }
  mean_center_ = ModelVector::Zero(dim());
  for (const ModelVector& c : centers_) mean_center_ += c;
  mean_center_ /= static_cast<double>(centers_.size());
}

QuadraticTask QuadraticTask::make(const QuadraticSpec& spec) {
  if (spec.clients < 1) throw ConfigError("clients", "must be >= 1");
  if (spec.dim < 1) throw ConfigError("dim", "must be >= 1");
  ModelVector spectrum = spec.log_variance > 0.0
                             ? make_lognormal_spectrum(spec.dim, spec.log_variance,
                                                       substream(spec.seed, kTagSpectrum))
                             : ModelVector::Ones(spec.dim);
  std::vector<ModelVector> centers;
  centers.reserve(spec.clients);
  for (std::size_t i = 0; i < spec.clients; ++i) {
    centers.push_back(spec.dispersion *
                      gaussian_vector(substream(spec.seed, kTagCenters, i), spec.dim));
  }
  std::optional<Matrix<double>> rotation;
  if (spec.rotate) {
    Matrix<double> g(spec.dim, spec.dim);
    for (Eigen::Index c = 0; c < spec.dim; ++c) {
      g.col(c) = gaussian_vector(substream(spec.seed, kTagRotation, static_cast<std::uint64_t>(c)), spec.dim);
    }
    Eigen::HouseholderQR<Matrix<double>> qr(g);
    rotation = qr.householderQ() * Matrix<double>::Identity(spec.dim, spec.dim);
  }
  return QuadraticTask(std::move(spectrum), std::move(centers),
                       ModelVector::Constant(spec.dim, spec.x0_scale), std::move(rotation));
}

Batch QuadraticTask::sample_batch(ClientId client, Seed) const {
  if (client >= num_clients()) throw Error(ErrorKind::kRange, "quadratic: client out of range");
  return Batch{client, {}};
}

ModelVector QuadraticTask::apply(const ModelVector& v) const {
  if (!rotation_) return spectrum_.cwiseProduct(v);
  const ModelVector rotated = (*rotation_) * v;
  return rotation_->transpose() * spectrum_.cwiseProduct(rotated);
}

double QuadraticTask::loss(const Batch& batch, const ModelVector& x) const {
  check(batch, x);
  const ModelVector e = x - centers_[batch.client];
  if (!rotation_) return 0.5 * (spectrum_.array() * e.array().square()).sum();
  const ModelVector r = (*rotation_) * e;
  return 0.5 * (spectrum_.array() * r.array().square()).sum();
}

ModelVector QuadraticTask::grad(const Batch& batch, const ModelVector& x) const {
  check(batch, x);
  return apply(x - centers_[batch.client]);
}

ModelVector QuadraticTask::hessian_diag(const Batch& batch, const ModelVector& x) const {
  check(batch, x);
  if (!rotation_) return spectrum_;
  return (rotation_->array().square().matrix().transpose() * spectrum_);
}

std::optional<ModelVector> QuadraticTask::true_curvature() const {
  if (rotation_) return std::nullopt;
  return spectrum_;
}

double QuadraticTask::optimal_loss() const { return global_loss(mean_center_); }

// Dirichlet partition

std::vector<std::size_t> DirichletPartition::sizes() const {
  std::vector<std::size_t> out(clients, 0);
  for (ClientId c : assignment) ++out[c];
  return out;
}

std::vector<std::vector<std::size_t>> DirichletPartition::shards() const {
  std::vector<std::vector<std::size_t>> out(clients);
  for (std::size_t i = 0; i < assignment.size(); ++i) out[assignment[i]].push_back(i);
  return out;
}

DirichletPartition partition_dirichlet(std::span<const int> labels, std::size_t clients,
                                       double alpha, Seed seed) {
  if (clients < 1) throw Error(ErrorKind::kInvalidArgument, "partition_dirichlet: need >= 1 client");
  if (!(alpha > 0.0)) throw Error(ErrorKind::kInvalidArgument, "partition_dirichlet: alpha must be > 0");
  if (labels.size() < clients) {
    throw Error(ErrorKind::kInvalidArgument, "partition_dirichlet: fewer samples than clients");
  }
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  std::mt19937_64 rng(substream(seed, kTagPartition).value);
  std::gamma_distribution<double> gamma(alpha, 1.0);

  DirichletPartition out{alpha, clients, std::vector<ClientId>(labels.size(), 0)};
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    for (int cls : classes) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == cls) members.push_back(i);
      }
      std::shuffle(members.begin(), members.end(), rng);
      std::vector<double> share(clients);
      for (double& s : share) s = gamma(rng);
      const double total = std::accumulate(share.begin(), share.end(), 0.0);
      double cumulative = 0.0;
      std::size_t begin = 0;
      for (std::size_t c = 0; c < clients; ++c) {
        cumulative += share[c] / total;
        const std::size_t end = c + 1 == clients
                                    ? members.size()
                                    : std::min(members.size(), static_cast<std::size_t>(std::llround(
                                                                   cumulative * static_cast<double>(members.size()))));
        for (std::size_t j = begin; j < end; ++j) out.assignment[members[j]] = static_cast<ClientId>(c);
        begin = std::max(begin, end);
      }
    }
    const auto sizes = out.sizes();
    if (std::all_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; })) return out;
  }
  throw Error(ErrorKind::kInvalidArgument, "partition_dirichlet: could not avoid empty clients");
}

// Logistic

LogisticTask::LogisticTask(RowMatrix<double> features, std::vector<int> labels,
                           DirichletPartition partition, double l2, std::size_t batch_size)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      shards_(partition.shards()),
      l2_(l2),
      batch_size_(batch_size) {
  if (static_cast<std::size_t>(features_.rows()) != labels_.size() ||
      partition.assignment.size() != labels_.size()) {
    throw Error(ErrorKind::kInvalidDimension, "logistic: features, labels and partition disagree");
  }
  if (!(l2_ >= 0.0)) throw ConfigError("l2", "must be >= 0");
  if (batch_size_ < 1) throw ConfigError("batch_size", "must be >= 1");
}

LogisticTask LogisticTask::make(const LogisticSpec& spec) {
  if (spec.samples < 2) throw ConfigError("samples", "must be >= 2");
  if (spec.dim < 1) throw ConfigError("dim", "must be >= 1");
  if (spec.clients < 1) throw ConfigError("clients", "must be >= 1");
  if (spec.samples < spec.clients) throw ConfigError("samples", "fewer samples than clients");
  ModelVector direction = gaussian_vector(substream(spec.seed, kTagFeatures), spec.dim);
  direction.normalize();
  RowMatrix<double> features(static_cast<Eigen::Index>(spec.samples), spec.dim);
  std::vector<int> labels(spec.samples);
  CounterStream label_stream(substream(spec.seed, kTagFeatures, 1));
  for (std::size_t i = 0; i < spec.samples; ++i) {
    labels[i] = static_cast<int>(label_stream.uniform_index(2));
    const double sign = labels[i] == 1 ? 1.0 : -1.0;
    features.row(static_cast<Eigen::Index>(i)) =
        (gaussian_vector(substream(spec.seed, kTagFeatures, 2, i), spec.dim) +
         sign * spec.separation * direction)
            .transpose();
  }
  DirichletPartition partition = partition_dirichlet(labels, spec.clients, spec.alpha, spec.seed);
  return LogisticTask(std::move(features), std::move(labels), std::move(partition), spec.l2,
                      spec.batch_size);
}

Batch LogisticTask::sample_batch(ClientId client, Seed seed) const {
  if (client >= num_clients()) throw Error(ErrorKind::kRange, "logistic: client out of range");
  const auto& shard = shards_[client];
  CounterStream stream(substream(seed, kTagBatch));
  Batch batch{client, {}};
  batch.indices.reserve(batch_size_);
  for (std::size_t j = 0; j < batch_size_; ++j) {
    batch.indices.push_back(static_cast<std::size_t>(stream.uniform_index(shard.size())));
  }
  return batch;
}

std::span<const std::size_t> LogisticTask::rows(const Batch& batch) const {
  const auto& shard = shards_[batch.client];
  for (std::size_t j : batch.indices) {
    if (j >= shard.size()) throw Error(ErrorKind::kRange, "logistic: batch index out of shard range");
  }
  return shard;
}

double LogisticTask::loss(const Batch& batch, const ModelVector& x) const {
  check(batch, x);
  const auto shard = rows(batch);
  const auto count = batch.indices.empty() ? shard.size() : batch.indices.size();
  double total = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t row = shard[batch.indices.empty() ? j : batch.indices[j]];
    const double sign = labels_[row] == 1 ? 1.0 : -1.0;
    total += softplus(-sign * features_.row(static_cast<Eigen::Index>(row)).dot(x));
  }
  return total / static_cast<double>(count) + 0.5 * l2_ * x.squaredNorm();
}

ModelVector LogisticTask::grad(const Batch& batch, const ModelVector& x) const {
  check(batch, x);
  const auto shard = rows(batch);
  const auto count = batch.indices.empty() ? shard.size() : batch.indices.size();
  ModelVector g = ModelVector::Zero(dim());
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t row = shard[batch.indices.empty() ? j : batch.indices[j]];
    const double sign = labels_[row] == 1 ? 1.0 : -1.0;
    const auto a = features_.row(static_cast<Eigen::Index>(row)).transpose();
    g += (-sign * sigmoid(-sign * a.dot(x))) * a;
  }
  return g / static_cast<double>(count) + l2_ * x;
}

ModelVector LogisticTask::hessian_diag(const Batch& batch, const ModelVector& x) const {
  check(batch, x);
  const auto shard = rows(batch);
  const auto count = batch.indices.empty() ? shard.size() : batch.indices.size();
  ModelVector h = ModelVector::Zero(dim());
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t row = shard[batch.indices.empty() ? j : batch.indices[j]];
    const auto a = features_.row(static_cast<Eigen::Index>(row)).transpose();
    const double p = sigmoid(a.dot(x));
    h += (p * (1.0 - p)) * a.array().square().matrix();
  }
  return (h / static_cast<double>(count)).array() + l2_;
}

double heterogeneity(const Task& task, std::span<const ModelVector> probes) {
  double worst = 0.0;
  for (const ModelVector& x : probes) {
    const ModelVector mean = task.global_grad(x);
    for (std::size_t i = 0; i < task.num_clients(); ++i) {
      const double gap = (task.grad(Batch{static_cast<ClientId>(i), {}}, x) - mean).norm();
      worst = std::max(worst, gap);
    }
  }
  return worst;
}

}  // namespace hiso
