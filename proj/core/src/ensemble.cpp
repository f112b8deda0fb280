#include "hcw/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "hcw/observable.hpp"

namespace hcw {

CheckpointAccumulator::CheckpointAccumulator(int dimension, std::size_t num_astral,
                                             std::size_t num_observables)
    : counts_(num_astral + 2, 0),
      disp_mean_(Eigen::VectorXd::Zero(dimension)),
      disp_m2_(Eigen::MatrixXd::Zero(dimension, dimension)),
      obs_mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_observables))),
      obs_m2_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_observables))),
      scratch_(Eigen::VectorXd::Zero(dimension)) {}

void CheckpointAccumulator::add(int label, std::span<const double> displacement,
                                std::span<const double> observables) {
  ++n_;
  const double n = static_cast<double>(n_);
  for (Eigen::Index k = 0; k < obs_mean_.size(); ++k) {
    const double x = observables[static_cast<std::size_t>(k)];
    const double delta = x - obs_mean_(k);
    obs_mean_(k) += delta / n;
    obs_m2_(k) += delta * (x - obs_mean_(k));
  }
  if (label == kAbsorbedLabel) {
    ++counts_.back();
    return;
  }
  ++counts_[static_cast<std::size_t>(label)];
  ++n_alive_;
  const double na = static_cast<double>(n_alive_);
  const Eigen::Index d = disp_mean_.size();
  for (Eigen::Index i = 0; i < d; ++i) {
    scratch_(i) = displacement[static_cast<std::size_t>(i)] - disp_mean_(i);
    disp_mean_(i) += scratch_(i) / na;
  }
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      disp_m2_(i, j) += scratch_(i) * (displacement[static_cast<std::size_t>(j)] - disp_mean_(j));
}

void CheckpointAccumulator::merge(const CheckpointAccumulator& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
  const double n = na + nb;
  {
    const Eigen::VectorXd delta = o.obs_mean_ - obs_mean_;
    obs_mean_ += delta * (nb / n);
    obs_m2_ += o.obs_m2_ + delta.cwiseProduct(delta) * (na * nb / n);
  }
  if (o.n_alive_ > 0) {
    if (n_alive_ == 0) {
      disp_mean_ = o.disp_mean_;
      disp_m2_ = o.disp_m2_;
    } else {
      const double aa = static_cast<double>(n_alive_), ab = static_cast<double>(o.n_alive_);
      const Eigen::VectorXd delta = o.disp_mean_ - disp_mean_;
      disp_mean_ += delta * (ab / (aa + ab));
      disp_m2_ += o.disp_m2_ + delta * delta.transpose() * (aa * ab / (aa + ab));
    }
  }
  n_ += o.n_;
  n_alive_ += o.n_alive_;
  for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += o.counts_[k];
}

CheckpointStats CheckpointAccumulator::finish(double time) const {
  CheckpointStats s;
  s.time = time;
  s.n_paths = n_;
  s.n_alive = n_alive_;
  const double n = static_cast<double>(std::max<std::size_t>(n_, 1));
  s.occupancy.resize(counts_.size());
  for (std::size_t k = 0; k < counts_.size(); ++k) s.occupancy[k] = static_cast<double>(counts_[k]) / n;
  s.absorbed_fraction = s.occupancy.back();
  s.displacement_mean = disp_mean_;
  s.displacement_cov = n_alive_ > 1 ? Eigen::MatrixXd(disp_m2_ / static_cast<double>(n_alive_ - 1))
                                    : Eigen::MatrixXd::Zero(disp_m2_.rows(), disp_m2_.cols());
  for (Eigen::Index k = 0; k < obs_mean_.size(); ++k) {
    s.observable_mean.push_back(obs_mean_(k));
    const double var = n_ > 1 ? obs_m2_(k) / static_cast<double>(n_ - 1) : 0.0;
    s.observable_stderr.push_back(std::sqrt(std::max(var, 0.0) / n));
  }
  return s;
}

std::vector<CheckpointAccumulator> run_chunked(
    std::size_t n_paths, unsigned threads,
    const std::function<std::vector<CheckpointAccumulator>()>& make,
    const std::function<void(std::size_t, std::vector<CheckpointAccumulator>&)>& path) {
  constexpr std::size_t kChunk = 1024;
  const std::size_t n_chunks = (n_paths + kChunk - 1) / kChunk;
  std::vector<std::vector<CheckpointAccumulator>> partial(n_chunks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    try {
      for (std::size_t c = next++; c < n_chunks; c = next++) {
        auto acc = make();
        const std::size_t end = std::min(n_paths, (c + 1) * kChunk);
        for (std::size_t p = c * kChunk; p < end; ++p) path(p, acc);
        partial[c] = std::move(acc);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = n_chunks;
    }
  };

  const unsigned n_workers =
      static_cast<unsigned>(std::clamp<std::size_t>(threads == 0 ? 1 : threads, 1, std::max<std::size_t>(n_chunks, 1)));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  auto total = make();
  for (const auto& chunk : partial)
    for (std::size_t k = 0; k < total.size() && k < chunk.size(); ++k) total[k].merge(chunk[k]);
  return total;
}

}  // namespace hcw
