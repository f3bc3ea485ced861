#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dlmix/data_model.hpp"

namespace dlmix {

// Lag basis for one exposure: K x T matrix whose rows are basis functions
// evaluated on the lag grid. Row 0 is the constant function; the remaining
// rows are eigenvectors of the (smoothed) exposure covariance, unit norm,
// sign-fixed so the largest-magnitude entry is positive.
struct ExposureBasis {
  Eigen::MatrixXd F;                // K x T
  double variance_explained = 0.0;  // eigenvalue fraction carried by rows 1..K-1
  Eigen::Index K() const { return F.rows(); }
  Eigen::Index T() const { return F.cols(); }
};

struct BasisSet {
  std::vector<ExposureBasis> exposures;  // size p
};

// Ridge smoother on the lag covariance: (I + penalty D'D)^-1 S (I + penalty D'D)^-1
// with D the second-difference operator. penalty 0 returns S unchanged.
Eigen::MatrixXd smooth_covariance(const Eigen::MatrixXd& S, double penalty);

// Data-driven basis: eigenvectors of smooth_covariance(X'X/n) retaining the
// smallest leading set reaching var_threshold, plus the constant row.
ExposureBasis fpca_basis(const Eigen::MatrixXd& Xj, double var_threshold, double penalty);

// X*_j with columns X_j f_k, k = 0..K-1.
Eigen::MatrixXd main_design(const Eigen::MatrixXd& Xj, const Eigen::MatrixXd& F);

// Tensor-product design, n x (K1*K2). Column (k1,k2) sits at index k2*K1 + k1
// (k1 fastest) and equals (X1 f1_k1) .* (X2 f2_k2).
Eigen::MatrixXd interaction_design(const Eigen::MatrixXd& X1, const Eigen::MatrixXd& X2,
                                   const Eigen::MatrixXd& F1, const Eigen::MatrixXd& F2);

struct Reduction {
  Eigen::MatrixXd reduced;          // n x R
  Eigen::MatrixXd rotation;         // (K1*K2) x R, orthonormal columns
  double retained_variance = 0.0;
  Eigen::Index R() const { return rotation.cols(); }
};

// Principal-component reduction of a tensor design: eigenvectors of X*'X*,
// keeping the smallest leading set reaching var_threshold of the trace.
Reduction reduce_interaction(const Eigen::MatrixXd& Xstar, double var_threshold);

// Everything the sampler needs per block, precomputed once per fit.
struct PairDesign {
  Eigen::Index j1 = 0, j2 = 0;  // j1 < j2, indices into the exposure list
  Eigen::MatrixXd design;       // n x R (reduced) or n x K1K2 (identity rotation)
  Eigen::MatrixXd rotation;     // (K1K2) x R; identity when no reduction
  Eigen::MatrixXd gram;         // design' * design
  double retained_variance = 1.0;
};

struct DesignMatrices {
  std::vector<Eigen::MatrixXd> main;        // p entries, n x K_j
  std::vector<Eigen::MatrixXd> main_gram;   // X*'X* per exposure
  std::vector<PairDesign> pairs;            // C(p,2) entries, (j1,j2) lexicographic
  Eigen::MatrixXd fixed;                    // n x (1+q): intercept + covariates
  Eigen::MatrixXd fixed_gram;

  static DesignMatrices build(const ExposurePanel& panel, const BasisSet& basis,
                              bool reduce_interactions, double interaction_threshold);
  Eigen::Index pair_index(Eigen::Index j1, Eigen::Index j2) const;
};

// Pairs in lexicographic (j1, j2) order with j1 < j2.
std::vector<std::pair<Eigen::Index, Eigen::Index>> all_pairs(Eigen::Index p);

std::uint64_t basis_hash(const BasisSet& basis);

void export_basis_csv(const BasisSet& basis, const std::vector<std::string>& names,
                      const std::filesystem::path& dir);
BasisSet import_basis_csv(const std::vector<std::string>& names,
                          const std::filesystem::path& dir);

}  // namespace dlmix
