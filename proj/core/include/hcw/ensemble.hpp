#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hcw {

/// Statistics of an ensemble of paths at one checkpoint time.
struct CheckpointStats {
  double time = 0.0;
  std::size_t n_paths = 0;
  std::size_t n_alive = 0;
  double absorbed_fraction = 0.0;
  std::vector<double> occupancy;          // labels 0..M, then absorbed
  Eigen::VectorXd displacement_mean;      // over non-absorbed paths
  Eigen::MatrixXd displacement_cov;       // unbiased sample covariance
  std::vector<double> observable_mean;    // one per observable
  std::vector<double> observable_stderr;
};

struct EnsembleStats {
  int dimension = 0;
  std::size_t num_astral = 0;
  std::vector<std::string> observable_ids;
  std::vector<CheckpointStats> checkpoints;
};

/// Streaming accumulator for one checkpoint. Merging is associative, and the
/// merge order used by run_chunked() is fixed, so results are bit-reproducible.
class CheckpointAccumulator {
 public:
  CheckpointAccumulator(int dimension, std::size_t num_astral, std::size_t num_observables);

  /// label is 0..M or kAbsorbedLabel; displacement is ignored when absorbed.
  void add(int label, std::span<const double> displacement, std::span<const double> observables);
  void merge(const CheckpointAccumulator& other);
  CheckpointStats finish(double time) const;

 private:
  std::size_t n_ = 0;
  std::size_t n_alive_ = 0;
  std::vector<std::size_t> counts_;
  Eigen::VectorXd disp_mean_;
  Eigen::MatrixXd disp_m2_;
  Eigen::VectorXd obs_mean_;
  Eigen::VectorXd obs_m2_;
  Eigen::VectorXd scratch_;
};

/// Runs `path(index, accumulators)` for every path index in fixed-size chunks on
/// up to `threads` workers and merges the per-chunk accumulators in chunk order.
std::vector<CheckpointAccumulator> run_chunked(
    std::size_t n_paths, unsigned threads,
    const std::function<std::vector<CheckpointAccumulator>()>& make,
    const std::function<void(std::size_t, std::vector<CheckpointAccumulator>&)>& path);

}  // namespace hcw
