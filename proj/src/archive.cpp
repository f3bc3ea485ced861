#include "dlmix/archive.hpp"

#include <fmt/format.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "dlmix/csv.hpp"
#include "dlmix/error.hpp"

namespace dlmix {

using nlohmann::json;

long ArchiveBundle::total_kept() const {
  long total = 0;
  for (const auto& c : chains) total += c.kept;
  return total;
}

std::string ArchiveBundle::pair_label(std::size_t k) const {
  const auto& pair = pairs[k];
  return fmt::format("{}:{}", meta.exposure_names[static_cast<std::size_t>(pair.j1)],
                     meta.exposure_names[static_cast<std::size_t>(pair.j2)]);
}

namespace {

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::vector<std::string> header;
  for (Eigen::Index c = 0; c < m.cols(); ++c) header.push_back(fmt::format("c{}", c));
  csv::Writer w(path, header);
  std::vector<double> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    w.write_row(row);
  }
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_table(path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()),
                    static_cast<Eigen::Index>(t.header.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = t.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return m;
}

std::vector<std::string> prefixed(const std::string& first, const std::vector<std::string>& rest) {
  std::vector<std::string> header{first};
  header.insert(header.end(), rest.begin(), rest.end());
  return header;
}

void save_chain(const std::filesystem::path& dir, const ArchiveBundle& bundle,
                const ChainArchive& chain) {
  std::filesystem::create_directories(dir);
  const auto& names = bundle.meta.exposure_names;
  std::vector<std::string> pair_names;
  for (std::size_t k = 0; k < bundle.pairs.size(); ++k) pair_names.push_back(bundle.pair_label(k));

  {
    csv::Writer w(dir / "scalars.csv", {"iter", "beta0", "sigma2", "sigma_m2", "sigma_i2"});
    for (long i = 0; i < chain.kept; ++i)
      w.write_row({static_cast<double>(i), chain.beta0[static_cast<std::size_t>(i)],
                   chain.sigma2[static_cast<std::size_t>(i)],
                   chain.sigma_m2[static_cast<std::size_t>(i)],
                   chain.sigma_i2[static_cast<std::size_t>(i)]});
  }
  {
    csv::Writer w(dir / "beta_covariates.csv", prefixed("iter", bundle.meta.covariate_names));
    for (long i = 0; i < chain.kept; ++i) {
      std::vector<double> row{static_cast<double>(i)};
      for (Eigen::Index c = 0; c < chain.beta_cov.cols(); ++c) row.push_back(chain.beta_cov(i, c));
      w.write_row(row);
    }
  }
  const auto write_wide = [&](const std::filesystem::path& path, const Eigen::MatrixXd& m,
                              const std::vector<std::string>& cols) {
    csv::Writer w(path, prefixed("iter", cols));
    for (long i = 0; i < chain.kept; ++i) {
      std::vector<double> row{static_cast<double>(i)};
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
      w.write_row(row);
    }
  };
  write_wide(dir / "tau_main.csv", chain.tau_main, names);
  write_wide(dir / "tau_int.csv", chain.tau_int, pair_names);

  const auto write_gamma = [&](const std::filesystem::path& path,
                               const std::vector<std::vector<std::uint8_t>>& gamma,
                               const std::vector<std::string>& cols) {
    csv::Writer w(path, prefixed("iter", cols));
    for (long i = 0; i < chain.kept; ++i) {
      std::vector<double> row{static_cast<double>(i)};
      for (auto g : gamma[static_cast<std::size_t>(i)]) row.push_back(static_cast<double>(g));
      w.write_row(row);
    }
  };
  write_gamma(dir / "gamma_main.csv", chain.gamma_main, names);
  write_gamma(dir / "gamma_int.csv", chain.gamma_int, pair_names);

  {
    csv::Writer w(dir / "beta_main.csv", {"iter", "block", "k", "value"});
    for (long i = 0; i < chain.kept; ++i)
      for (std::size_t j = 0; j < chain.beta_main[static_cast<std::size_t>(i)].size(); ++j) {
        const auto& beta = chain.beta_main[static_cast<std::size_t>(i)][j];
        for (Eigen::Index k = 0; k < beta.size(); ++k)
          w.write_row({static_cast<double>(i), static_cast<double>(j), static_cast<double>(k),
                       beta[k]});
      }
  }
  {
    csv::Writer w(dir / "beta_int.csv", {"iter", "block", "k", "value"});
    for (long i = 0; i < chain.kept; ++i)
      for (std::size_t j = 0; j < chain.beta_int[static_cast<std::size_t>(i)].size(); ++j) {
        const auto& beta = chain.beta_int[static_cast<std::size_t>(i)][j];
        for (Eigen::Index k = 0; k < beta.size(); ++k)
          w.write_row({static_cast<double>(i), static_cast<double>(j), static_cast<double>(k),
                       beta[k]});
      }
  }
  if (!chain.calibration_trace.empty()) {
    csv::Writer w(dir / "calibration_trace.csv",
                  {"iteration", "block", "sigma2", "slab", "tau", "achieved", "cache_hit"});
    for (const auto& row : chain.calibration_trace)
      w.write_row({row.block}, {static_cast<double>(row.iteration), row.sigma2, row.slab, row.tau,
                                row.achieved, row.cache_hit ? 1.0 : 0.0});
  }
}

ChainArchive load_chain(const std::filesystem::path& dir, const ArchiveBundle& bundle) {
  ChainArchive chain;
  const csv::Table scalars = csv::read_table(dir / "scalars.csv");
  chain.kept = static_cast<long>(scalars.rows.size());
  for (const auto& row : scalars.rows) {
    chain.beta0.push_back(row[1]);
    chain.sigma2.push_back(row[2]);
    chain.sigma_m2.push_back(row[3]);
    chain.sigma_i2.push_back(row[4]);
  }

  const auto read_wide = [&](const std::filesystem::path& path, Eigen::Index cols) {
    const csv::Table t = csv::read_table(path);
    if (static_cast<long>(t.rows.size()) != chain.kept || t.header.size() != static_cast<std::size_t>(cols) + 1)
      throw DataError(fmt::format("archive file '{}' is inconsistent", path.string()));
    Eigen::MatrixXd m(chain.kept, cols);
    for (long i = 0; i < chain.kept; ++i)
      for (Eigen::Index c = 0; c < cols; ++c)
        m(i, c) = t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c) + 1];
    return m;
  };
  chain.beta_cov = read_wide(dir / "beta_covariates.csv", bundle.meta.q);
  chain.tau_main = read_wide(dir / "tau_main.csv", bundle.meta.p);
  chain.tau_int = read_wide(dir / "tau_int.csv", static_cast<Eigen::Index>(bundle.pairs.size()));

  const auto read_gamma = [&](const std::filesystem::path& path, std::size_t cols) {
    const csv::Table t = csv::read_table(path);
    if (static_cast<long>(t.rows.size()) != chain.kept)
      throw DataError(fmt::format("archive file '{}' is inconsistent", path.string()));
    std::vector<std::vector<std::uint8_t>> out;
    for (const auto& row : t.rows) {
      std::vector<std::uint8_t> g;
      for (std::size_t c = 1; c <= cols; ++c) g.push_back(row[c] != 0.0 ? 1 : 0);
      out.push_back(std::move(g));
    }
    return out;
  };
  chain.gamma_main = read_gamma(dir / "gamma_main.csv", static_cast<std::size_t>(bundle.meta.p));
  chain.gamma_int = read_gamma(dir / "gamma_int.csv", bundle.pairs.size());

  chain.beta_main.assign(static_cast<std::size_t>(chain.kept),
                         std::vector<Eigen::VectorXd>(static_cast<std::size_t>(bundle.meta.p)));
  chain.beta_int.assign(static_cast<std::size_t>(chain.kept),
                        std::vector<Eigen::VectorXd>(bundle.pairs.size()));

  const auto load_betas = [&](const std::filesystem::path& path,
                              std::vector<std::vector<Eigen::VectorXd>>& dest,
                              const std::vector<Eigen::Index>& dims) {
    const csv::Table t = csv::read_table(path);
    for (const auto& row : t.rows) {
      const long iter = static_cast<long>(row[0]);
      const auto block = static_cast<std::size_t>(row[1]);
      const auto k = static_cast<Eigen::Index>(row[2]);
      if (iter < 0 || iter >= chain.kept || block >= dims.size() || k < 0 || k >= dims[block])
        throw DataError(fmt::format("archive file '{}' has out-of-range indices", path.string()));
      auto& slot = dest[static_cast<std::size_t>(iter)][block];
      if (slot.size() == 0) slot = Eigen::VectorXd::Zero(dims[block]);
      slot[k] = row[3];
    }
  };
  std::vector<Eigen::Index> main_dims;
  for (const auto& b : bundle.basis.exposures) main_dims.push_back(b.K());
  std::vector<Eigen::Index> int_dims;
  for (const auto& pi : bundle.pairs) int_dims.push_back(pi.rotation.cols());
  load_betas(dir / "beta_main.csv", chain.beta_main, main_dims);
  load_betas(dir / "beta_int.csv", chain.beta_int, int_dims);
  return chain;
}

}  // namespace

void save_archive(const std::filesystem::path& dir, const ArchiveBundle& bundle) {
  std::filesystem::create_directories(dir);

  json meta;
  meta["format_version"] = bundle.meta.format_version;
  meta["library_version"] = bundle.meta.library_version;
  meta["n"] = bundle.meta.n;
  meta["p"] = bundle.meta.p;
  meta["T"] = bundle.meta.T;
  meta["q"] = bundle.meta.q;
  meta["mode"] = mode_name(bundle.meta.mode);
  meta["iterations"] = bundle.meta.schedule.iterations;
  meta["burn_in"] = bundle.meta.schedule.burn_in;
  meta["thin"] = bundle.meta.schedule.thin;
  meta["seed"] = bundle.meta.schedule.seed;
  meta["chains"] = bundle.meta.n_chains;
  meta["alpha_main"] = bundle.meta.alpha_main;
  meta["alpha_int"] = bundle.meta.alpha_int;
  meta["calibration_draws"] = bundle.meta.calibration_draws;
  meta["calibration_cache"] = bundle.meta.calibration_cache;
  meta["main_threshold"] = bundle.meta.main_threshold;
  meta["interaction_threshold"] = bundle.meta.interaction_threshold;
  meta["smoothing_penalty"] = bundle.meta.smoothing_penalty;
  meta["exposure_names"] = bundle.meta.exposure_names;
  meta["covariate_names"] = bundle.meta.covariate_names;
  meta["centered"] = bundle.meta.centered;
  meta["scale_modes"] = bundle.meta.scale_modes;
  meta["scales"] = bundle.meta.scales;
  meta["basis_hash"] = fmt::format("{:016x}", bundle.meta.basis_hash);
  json pairs = json::array();
  for (const auto& pi : bundle.pairs) {
    pairs.push_back({{"j1", pi.j1},
                     {"j2", pi.j2},
                     {"R", pi.rotation.cols()},
                     {"retained_variance", pi.retained_variance}});
  }
  meta["pairs"] = pairs;

  std::ofstream out(dir / "metadata.json");
  if (!out) throw DataError("cannot write archive metadata");
  out << meta.dump(2) << '\n';

  export_basis_csv(bundle.basis, bundle.meta.exposure_names, dir / "basis");
  for (const auto& pi : bundle.pairs)
    write_matrix_csv(dir / "basis" / fmt::format("rotation_{}_{}.csv", pi.j1, pi.j2), pi.rotation);

  for (const auto& chain : bundle.chains)
    save_chain(dir / fmt::format("chain_{}", chain.chain_index), bundle, chain);
}

ArchiveBundle load_archive(const std::filesystem::path& dir) {
  const auto meta_path = dir / "metadata.json";
  std::ifstream in(meta_path);
  if (!in) throw DataError("cannot open archive metadata '" + meta_path.string() + "'");
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("corrupt archive metadata '{}': {}", meta_path.string(), e.what()));
  }

  ArchiveBundle bundle;
  try {
    bundle.meta.format_version = meta.at("format_version").get<int>();
    if (bundle.meta.format_version != kArchiveFormatVersion)
      throw ConfigError(fmt::format("archive format version {} is not supported (expected {})",
                                    bundle.meta.format_version, kArchiveFormatVersion));
    bundle.meta.library_version = meta.at("library_version").get<std::string>();
    bundle.meta.n = meta.at("n").get<Eigen::Index>();
    bundle.meta.p = meta.at("p").get<Eigen::Index>();
    bundle.meta.T = meta.at("T").get<Eigen::Index>();
    bundle.meta.q = meta.at("q").get<Eigen::Index>();
    bundle.meta.mode = mode_from_name(meta.at("mode").get<std::string>());
    bundle.meta.schedule.iterations = meta.at("iterations").get<long>();
    bundle.meta.schedule.burn_in = meta.at("burn_in").get<long>();
    bundle.meta.schedule.thin = meta.at("thin").get<long>();
    bundle.meta.schedule.seed = meta.at("seed").get<std::uint64_t>();
    bundle.meta.n_chains = meta.at("chains").get<int>();
    bundle.meta.alpha_main = meta.at("alpha_main").get<double>();
    bundle.meta.alpha_int = meta.at("alpha_int").get<double>();
    bundle.meta.calibration_draws = meta.at("calibration_draws").get<int>();
    bundle.meta.calibration_cache = meta.at("calibration_cache").get<bool>();
    bundle.meta.main_threshold = meta.at("main_threshold").get<double>();
    bundle.meta.interaction_threshold = meta.at("interaction_threshold").get<double>();
    bundle.meta.smoothing_penalty = meta.at("smoothing_penalty").get<double>();
    bundle.meta.exposure_names = meta.at("exposure_names").get<std::vector<std::string>>();
    bundle.meta.covariate_names = meta.at("covariate_names").get<std::vector<std::string>>();
    bundle.meta.centered = meta.at("centered").get<bool>();
    bundle.meta.scale_modes = meta.at("scale_modes").get<std::vector<std::string>>();
    bundle.meta.scales = meta.at("scales").get<std::vector<double>>();
    bundle.meta.basis_hash = std::stoull(meta.at("basis_hash").get<std::string>(), nullptr, 16);
    for (const auto& pj : meta.at("pairs")) {
      PairInfo pi;
      pi.j1 = pj.at("j1").get<Eigen::Index>();
      pi.j2 = pj.at("j2").get<Eigen::Index>();
      pi.retained_variance = pj.at("retained_variance").get<double>();
      bundle.pairs.push_back(std::move(pi));
    }
  } catch (const json::exception& e) {
    throw DataError(fmt::format("corrupt archive metadata '{}': {}", meta_path.string(), e.what()));
  }

  bundle.basis = import_basis_csv(bundle.meta.exposure_names, dir / "basis");
  if (basis_hash(bundle.basis) != bundle.meta.basis_hash)
    throw DataError("archive basis does not match recorded basis hash");
  for (auto& pi : bundle.pairs)
    pi.rotation = read_matrix_csv(dir / "basis" / fmt::format("rotation_{}_{}.csv", pi.j1, pi.j2));

  for (int c = 0; c < bundle.meta.n_chains; ++c) {
    const auto chain_dir = dir / fmt::format("chain_{}", c);
    if (!std::filesystem::exists(chain_dir))
      throw DataError("archive chain directory missing: " + chain_dir.string());
    ChainArchive chain = load_chain(chain_dir, bundle);
    chain.chain_index = c;
    bundle.chains.push_back(std::move(chain));
  }
  return bundle;
}

}  // namespace dlmix
