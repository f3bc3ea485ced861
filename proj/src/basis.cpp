#include "dlmix/basis.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "dlmix/csv.hpp"
#include "dlmix/error.hpp"
#include "dlmix/rng.hpp"

namespace dlmix {

namespace {

// Descending-order symmetric eigendecomposition with the sign convention that
// each vector's largest-magnitude entry is positive. Eigenvalues below a
// relative floor are clamped to zero so variance fractions are well defined
// for rank-deficient inputs.
struct EigenParts {
  Eigen::VectorXd values;   // descending, clamped at zero
  Eigen::MatrixXd vectors;  // columns match values
};

EigenParts symmetric_eigen_desc(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S);
  if (solver.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Eigen::Index m = S.rows();
  EigenParts parts;
  parts.values.resize(m);
  parts.vectors.resize(m, m);
  const double floor = std::max(0.0, solver.eigenvalues().cwiseAbs().maxCoeff()) * m * 1e-12;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index src = m - 1 - i;  // Eigen sorts ascending
    double value = solver.eigenvalues()[src];
    parts.values[i] = value > floor ? value : 0.0;
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index argmax = 0;
    v.cwiseAbs().maxCoeff(&argmax);
    if (v[argmax] < 0.0) v = -v;
    parts.vectors.col(i) = v;
  }
  return parts;
}

// Smallest leading count whose eigenvalue sum reaches threshold * total.
Eigen::Index retained_count(const Eigen::VectorXd& values_desc, double threshold) {
  const double total = values_desc.sum();
  if (total <= 0.0) return 0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < values_desc.size(); ++i) {
    if (values_desc[i] <= 0.0) return i;  // only the positive part is retainable
    acc += values_desc[i];
    if (acc >= threshold * total - 1e-12 * total) return i + 1;
  }
  return values_desc.size();
}

}  // namespace

Eigen::MatrixXd smooth_covariance(const Eigen::MatrixXd& S, double penalty) {
  if (S.rows() != S.cols()) throw DataError("smooth_covariance: matrix not square");
  if (penalty < 0.0) throw ConfigError("smooth_covariance: negative penalty");
  if (penalty == 0.0) return S;
  const Eigen::Index T = S.rows();
  if (T < 3) return S;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(T - 2, T);
  for (Eigen::Index r = 0; r < T - 2; ++r) {
    D(r, r) = 1.0;
    D(r, r + 1) = -2.0;
    D(r, r + 2) = 1.0;
  }
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(T, T) + penalty * (D.transpose() * D);
  Eigen::LLT<Eigen::MatrixXd> llt(B);
  if (llt.info() != Eigen::Success) throw NumericalError("smooth_covariance: factorization failed");
  Eigen::MatrixXd half = llt.solve(S);              // B^-1 S
  Eigen::MatrixXd smoothed = llt.solve(half.transpose()).transpose();  // B^-1 S B^-1
  return 0.5 * (smoothed + smoothed.transpose());
}

ExposureBasis fpca_basis(const Eigen::MatrixXd& Xj, double var_threshold, double penalty) {
  if (!(var_threshold > 0.0 && var_threshold <= 1.0))
    throw ConfigError("fpca_basis: var_threshold must be in (0, 1]");
  const Eigen::Index n = Xj.rows();
  const Eigen::Index T = Xj.cols();
  if (n < 1 || T < 1) throw DataError("fpca_basis: empty exposure matrix");

  Eigen::MatrixXd cov = (Xj.transpose() * Xj) / static_cast<double>(n);
  cov = smooth_covariance(cov, penalty);
  const EigenParts parts = symmetric_eigen_desc(cov);
  if (parts.values.sum() <= 0.0)
    throw DataError("fpca_basis: exposure has zero total variance");
  const Eigen::Index kept = retained_count(parts.values, var_threshold);

  ExposureBasis basis;
  basis.F.resize(kept + 1, T);
  basis.F.row(0).setConstant(1.0 / std::sqrt(static_cast<double>(T)));
  for (Eigen::Index k = 0; k < kept; ++k) basis.F.row(k + 1) = parts.vectors.col(k).transpose();
  basis.variance_explained = parts.values.head(kept).sum() / parts.values.sum();
  return basis;
}

Eigen::MatrixXd main_design(const Eigen::MatrixXd& Xj, const Eigen::MatrixXd& F) {
  if (Xj.cols() != F.cols())
    throw DataError(fmt::format("main_design: exposure has {} lags, basis has {}", Xj.cols(),
                                F.cols()));
  return Xj * F.transpose();
}

Eigen::MatrixXd interaction_design(const Eigen::MatrixXd& X1, const Eigen::MatrixXd& X2,
                                   const Eigen::MatrixXd& F1, const Eigen::MatrixXd& F2) {
  if (X1.rows() != X2.rows()) throw DataError("interaction_design: subject count mismatch");
  const Eigen::MatrixXd D1 = main_design(X1, F1);
  const Eigen::MatrixXd D2 = main_design(X2, F2);
  const Eigen::Index n = X1.rows();
  const Eigen::Index K1 = F1.rows();
  const Eigen::Index K2 = F2.rows();
  Eigen::MatrixXd out(n, K1 * K2);
  for (Eigen::Index k2 = 0; k2 < K2; ++k2)
    for (Eigen::Index k1 = 0; k1 < K1; ++k1)
      out.col(k2 * K1 + k1) = D1.col(k1).cwiseProduct(D2.col(k2));
  return out;
}

Reduction reduce_interaction(const Eigen::MatrixXd& Xstar, double var_threshold) {
  if (!(var_threshold > 0.0 && var_threshold <= 1.0))
    throw ConfigError("reduce_interaction: var_threshold must be in (0, 1]");
  const EigenParts parts = symmetric_eigen_desc(Xstar.transpose() * Xstar);
  Eigen::Index R = retained_count(parts.values, var_threshold);
  if (R < 1) R = 1;  // keep at least one direction even for degenerate designs
  Reduction red;
  red.rotation = parts.vectors.leftCols(R);
  red.reduced = Xstar * red.rotation;
  const double total = parts.values.sum();
  red.retained_variance = total > 0.0 ? parts.values.head(R).sum() / total : 1.0;
  return red;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> all_pairs(Eigen::Index p) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index j1 = 0; j1 < p; ++j1)
    for (Eigen::Index j2 = j1 + 1; j2 < p; ++j2) pairs.emplace_back(j1, j2);
  return pairs;
}

DesignMatrices DesignMatrices::build(const ExposurePanel& panel, const BasisSet& basis,
                                     bool reduce_interactions, double interaction_threshold) {
  if (static_cast<Eigen::Index>(basis.exposures.size()) != panel.p)
    throw DataError("DesignMatrices: basis count does not match exposures");
  DesignMatrices d;
  d.main.reserve(panel.p);
  for (Eigen::Index j = 0; j < panel.p; ++j) {
    d.main.push_back(main_design(panel.exposures[j], basis.exposures[static_cast<std::size_t>(j)].F));
    d.main_gram.push_back(d.main.back().transpose() * d.main.back());
  }
  for (const auto& [j1, j2] : all_pairs(panel.p)) {
    PairDesign pd;
    pd.j1 = j1;
    pd.j2 = j2;
    Eigen::MatrixXd tensor =
        interaction_design(panel.exposures[j1], panel.exposures[j2],
                           basis.exposures[static_cast<std::size_t>(j1)].F,
                           basis.exposures[static_cast<std::size_t>(j2)].F);
    if (reduce_interactions) {
      Reduction red = reduce_interaction(tensor, interaction_threshold);
      pd.design = std::move(red.reduced);
      pd.rotation = std::move(red.rotation);
      pd.retained_variance = red.retained_variance;
    } else {
      pd.rotation = Eigen::MatrixXd::Identity(tensor.cols(), tensor.cols());
      pd.design = std::move(tensor);
      pd.retained_variance = 1.0;
    }
    pd.gram = pd.design.transpose() * pd.design;
    d.pairs.push_back(std::move(pd));
  }
  d.fixed.resize(panel.n, 1 + panel.q);
  d.fixed.col(0).setOnes();
  if (panel.q > 0) d.fixed.rightCols(panel.q) = panel.covariates;
  d.fixed_gram = d.fixed.transpose() * d.fixed;
  return d;
}

Eigen::Index DesignMatrices::pair_index(Eigen::Index j1, Eigen::Index j2) const {
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (pairs[i].j1 == j1 && pairs[i].j2 == j2) return static_cast<Eigen::Index>(i);
  throw DataError(fmt::format("no pair ({}, {})", j1, j2));
}

std::uint64_t basis_hash(const BasisSet& basis) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& b : basis.exposures) {
    const auto rows = static_cast<std::uint64_t>(b.F.rows());
    const auto cols = static_cast<std::uint64_t>(b.F.cols());
    h = fnv1a64(&rows, sizeof rows, h);
    h = fnv1a64(&cols, sizeof cols, h);
    h = fnv1a64(b.F.data(), sizeof(double) * static_cast<std::size_t>(b.F.size()), h);
  }
  return h;
}

void export_basis_csv(const BasisSet& basis, const std::vector<std::string>& names,
                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t j = 0; j < basis.exposures.size(); ++j) {
    const auto& F = basis.exposures[j].F;
    std::vector<std::string> header;
    for (Eigen::Index t = 0; t < F.cols(); ++t) header.push_back(fmt::format("lag_{}", t));
    csv::Writer w(dir / fmt::format("basis_{}.csv", names[j]), header);
    for (Eigen::Index k = 0; k < F.rows(); ++k) {
      std::vector<double> row(F.cols());
      for (Eigen::Index t = 0; t < F.cols(); ++t) row[static_cast<std::size_t>(t)] = F(k, t);
      w.write_row(row);
    }
  }
}

BasisSet import_basis_csv(const std::vector<std::string>& names,
                          const std::filesystem::path& dir) {
  BasisSet basis;
  for (const auto& name : names) {
    const csv::Table table = csv::read_table(dir / fmt::format("basis_{}.csv", name));
    ExposureBasis b;
    b.F.resize(static_cast<Eigen::Index>(table.rows.size()),
               static_cast<Eigen::Index>(table.header.size()));
    for (Eigen::Index k = 0; k < b.F.rows(); ++k)
      for (Eigen::Index t = 0; t < b.F.cols(); ++t)
        b.F(k, t) = table.rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)];
    basis.exposures.push_back(std::move(b));
  }
  return basis;
}

}  // namespace dlmix
