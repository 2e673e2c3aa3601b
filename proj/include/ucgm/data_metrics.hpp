#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ucgm/oracle.hpp"

namespace ucgm {

enum class DatasetKind { TwoMoons, SCurve, SwissRoll, Bimodal, Gaussian, Gmm };

/// Generator description. String forms: two_moons:<noise>, s_curve:<noise>,
/// swiss_roll:<noise>, bimodal:<m>,<sigma>, gaussian:<mu>,<sigma>,
/// gmm:<w>/<m>/<sigma>,<w>/<m>/<sigma>,...
struct DatasetSpec {
  DatasetKind kind = DatasetKind::Bimodal;
  double noise = 0.05;
  double m = 2.0;
  double sigma = 0.3;
  GaussianMixture mixture;  ///< set for gmm (and filled for bimodal/gaussian)

  int dim() const;
  int num_classes() const;  ///< number of generator components (moons, mixture modes); 0 if none
  std::string to_string() const;
  /// Throws std::invalid_argument on a malformed or out-of-range spec.
  static DatasetSpec parse(const std::string& text);
};

/// Standardized samples (d x n) with the affine map back to raw coordinates.
struct Dataset {
  DatasetSpec spec;
  std::uint64_t seed = 0;
  Eigen::MatrixXd samples;
  Eigen::VectorXd shift;  ///< raw = samples * scale + shift, per axis
  Eigen::VectorXd scale;
  std::vector<int> labels;  ///< generator component of each sample

  Eigen::MatrixXd raw() const;
  /// Maps raw-coordinate points into this dataset's standardized frame.
  Eigen::MatrixXd standardize(const Eigen::MatrixXd& raw_points) const;
};

/// Raw generator draws; labels receives the component index of every column when non-null.
Eigen::MatrixXd sample_raw(const DatasetSpec& spec, int n, std::mt19937_64& rng,
                           std::vector<int>* labels = nullptr);

/// Deterministic in (spec, n, seed); standardized to zero mean and unit per-axis variance.
Dataset make_dataset(const DatasetSpec& spec, int n, std::uint64_t seed);

/// Mean absolute difference of sorted samples; the longer input is subsampled without
/// replacement (seeded) when lengths differ. Throws std::invalid_argument on empty input.
double wasserstein1_1d(std::span<const double> a, std::span<const double> b,
                       std::uint64_t seed = 0);

/// 2E‖A−B‖ − E‖A−A′‖ − E‖B−B′‖ with U-statistics; each side is subsampled to at most cap
/// columns. Throws std::invalid_argument on empty input or mismatched dimensions.
double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::uint64_t seed = 0,
                       int cap = 4096);

}  // namespace ucgm
