#include "redpca/simulate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>

#include "redpca/covariance.hpp"
#include "redpca/denoise.hpp"
#include "redpca/spike_maps.hpp"

namespace redpca {

namespace {

double draw_sample(SampleLaw law, std::mt19937_64& rng, std::normal_distribution<double>& gauss) {
  if (law == SampleLaw::Gaussian) return gauss(rng);
  return (rng() & 1u) ? 1.0 : -1.0;
}

int resolve_threads(int requested, int reps) {
  int t = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (t <= 0) t = 1;
  if (const char* env = std::getenv("REDUCED_PCA_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) t = std::min<long>(t, cap);
  }
  return std::max(1, std::min(t, reps));
}

double sq(double x) { return x * x; }

}  // namespace

std::vector<double> tile_variances(const SpectralLaw& law, Eigen::Index p) {
  if (p < 0) throw std::invalid_argument("tile_variances needs p >= 0");
  std::vector<std::size_t> order(law.atoms.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return law.atoms[a] < law.atoms[b]; });
  std::vector<double> out(static_cast<std::size_t>(p));
  // Deterministic tiling: coordinate j takes the atom whose cumulative weight
  // covers the mid-cell quantile (j + 1/2)/p.
  std::size_t k = 0;
  double cum = law.weights[order[0]];
  for (Eigen::Index j = 0; j < p; ++j) {
    const double q = (static_cast<double>(j) + 0.5) / static_cast<double>(p);
    while (cum < q - 1e-12 && k + 1 < order.size()) {
      ++k;
      cum += law.weights[order[k]];
    }
    out[static_cast<std::size_t>(j)] = law.atoms[order[k]];
  }
  return out;
}

SpectralLaw gen_ar1_variances(double rho, int p) {
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("AR(1) needs |rho| < 1");
  if (p < 1) throw std::invalid_argument("AR(1) needs p >= 1");
  Eigen::MatrixXd t(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) t(i, j) = std::pow(rho, std::abs(i - j));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
  std::vector<double> atoms(es.eigenvalues().data(), es.eigenvalues().data() + p);
  return SpectralLaw::uniform(std::move(atoms));
}

SpectralLaw bulk_law(const ReducedModelConfig& config) {
  if (config.noise_model == NoiseModel::ReducedNoise) {
    return config.noise_variances.scaled(config.m());
  }
  return config.noise_variances;
}

DataSet gen_spiked_data(const ReducedModelConfig& config, Eigen::Index n, Eigen::Index p,
                        std::uint64_t seed, const GenOptions& options) {
  config.validate();
  if (n < 1 || p < 1) throw std::invalid_argument("gen_spiked_data needs n >= 1 and p >= 1");
  const int r = config.rank;
  if (r > p) throw std::invalid_argument("rank may not exceed the dimension p");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Draw order is fixed (PCs, scores, noise, reduction) so a seed pins the
  // whole dataset. All matrices are filled row-major.
  Eigen::MatrixXd u(p, r);
  if (r > 0) {
    Eigen::MatrixXd g(p, r);
    for (Eigen::Index i = 0; i < p; ++i) {
      for (int j = 0; j < r; ++j) g(i, j) = gauss(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    u = qr.householderQ() * Eigen::MatrixXd::Identity(p, r);
    Eigen::MatrixXd rr = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    for (int j = 0; j < r; ++j) {
      if (rr(j, j) < 0.0) u.col(j) *= -1.0;
    }
  }

  Eigen::MatrixXd z(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < r; ++j) z(i, j) = draw_sample(options.z_law, rng, gauss);
  }

  const std::vector<double> vars = tile_variances(config.noise_variances, p);
  Eigen::MatrixXd eps(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      eps(i, j) = std::sqrt(vars[static_cast<std::size_t>(j)]) *
                  draw_sample(options.noise_law, rng, gauss);
    }
  }

  Eigen::MatrixXd d(n, p);
  if (config.reduction.kind == Reduction::Kind::Bernoulli) {
    std::bernoulli_distribution keep(config.mu());
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) d(i, j) = keep(rng) ? 1.0 : 0.0;
    }
  } else if (config.sigma2() > 0.0) {
    std::normal_distribution<double> entry(config.mu(), std::sqrt(config.sigma2()));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) d(i, j) = entry(rng);
    }
  } else {
    d.setConstant(config.mu());
  }

  Eigen::VectorXd root_spikes(r);
  for (int k = 0; k < r; ++k) root_spikes[k] = std::sqrt(config.spikes[static_cast<std::size_t>(k)]);
  Eigen::MatrixXd s = z * root_spikes.asDiagonal() * u.transpose();

  DataSet data;
  if (config.noise_model == NoiseModel::ReducedNoise) {
    data.y = d.array() * (s + eps).array();
  } else {
    data.y = d.array() * s.array() + eps.array();
  }
  data.d = std::move(d);
  data.s_oracle = std::move(s);
  data.u_oracle = std::move(u);
  data.z_oracle = std::move(z);
  return data;
}

double CdfTable::operator()(double x) const {
  if (x < xs.front()) return 0.0;
  if (x >= xs.back()) return cdf.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return cdf[lo] + w * (cdf[hi] - cdf[lo]);
}

CdfTable mp_cdf_table(const SpectralLaw& law, double gamma, double x_max, int points) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("gamma must be positive and finite");
  }
  if (!(x_max > 0.0) || !std::isfinite(x_max)) {
    throw std::invalid_argument("x_max must be positive and finite; it should cover the support");
  }
  if (points < 2) throw std::invalid_argument("the CDF table needs at least 2 points");

  CdfTable table;
  table.xs.resize(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    table.xs[static_cast<std::size_t>(i)] = x_max * static_cast<double>(i) / (points - 1);
  }
  // The density is evaluated just above the real axis; the point mass at zero
  // (gamma > 1) is added separately, so skip the x = 0 node.
  std::vector<double> interior(table.xs.begin() + 1, table.xs.end());
  std::vector<double> dens = general_mp_density(law, gamma, interior);
  dens.insert(dens.begin(), 0.0);

  const double atom = gamma > 1.0 ? 1.0 - 1.0 / gamma : 0.0;
  std::vector<double> cum(table.xs.size(), 0.0);
  for (std::size_t i = 1; i < table.xs.size(); ++i) {
    cum[i] = cum[i - 1] +
             0.5 * (dens[i] + dens[i - 1]) * (table.xs[i] - table.xs[i - 1]);
  }
  // Rescale the quadrature to the exact continuous mass so the table tops out
  // at 1 (guards the smoothing and trapezoid error).
  const double target = 1.0 - atom;
  const double scale = cum.back() > 0.0 ? target / cum.back() : 0.0;
  table.cdf.resize(table.xs.size());
  for (std::size_t i = 0; i < cum.size(); ++i) {
    table.cdf[i] = std::min(1.0, atom + scale * cum[i]);
  }
  return table;
}

double ks_distance(std::vector<double> samples, const CdfTable& table) {
  if (samples.empty()) throw std::invalid_argument("ks_distance needs at least one sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = table(samples[i]);
    ks = std::max(ks, std::abs(f - static_cast<double>(i) / n));
    ks = std::max(ks, std::abs(f - static_cast<double>(i + 1) / n));
  }
  return ks;
}

const char* mc_quantity_name(McQuantity q) {
  switch (q) {
    case McQuantity::TopEigenvalue: return "top_eig";
    case McQuantity::CosSq: return "cos_sq";
    case McQuantity::CovLossOp: return "loss_op";
    case McQuantity::CovLossFro: return "loss_fro";
    case McQuantity::DenoiseMse: return "denoise_mse";
    case McQuantity::BulkKs: return "bulk_ks";
  }
  return "unknown";
}

std::vector<McResult> run_mc(const ReducedModelConfig& config, Eigen::Index n, Eigen::Index p,
                             int reps, const std::vector<McQuantity>& targets,
                             std::uint64_t master_seed, const McOptions& options) {
  config.validate();
  if (n < 1 || p < 1) throw std::invalid_argument("run_mc needs n >= 1 and p >= 1");
  if (reps < 1) throw std::invalid_argument("run_mc needs at least one replicate");
  if (targets.empty()) return {};

  const bool white = config.noise_variances.is_unit_point_mass();
  bool need_top = false, need_cos = false, need_loss_op = false, need_loss_fro = false;
  bool need_denoise = false, need_ks = false;
  for (McQuantity q : targets) {
    switch (q) {
      case McQuantity::TopEigenvalue: need_top = true; break;
      case McQuantity::CosSq: need_cos = true; break;
      case McQuantity::CovLossOp: need_loss_op = true; break;
      case McQuantity::CovLossFro: need_loss_fro = true; break;
      case McQuantity::DenoiseMse: need_denoise = true; break;
      case McQuantity::BulkKs: need_ks = true; break;
    }
  }
  if ((need_top || need_cos || need_denoise) && config.rank < 1) {
    throw std::invalid_argument("spike and denoising targets need rank >= 1");
  }
  if (!white && (need_loss_op || need_loss_fro || need_denoise)) {
    throw std::invalid_argument(
        "loss and denoising Monte Carlo targets need the unit noise-variance law");
  }

  // Shared theory, solved once. White noise tracks the debiased estimator
  // against its closed-form limits; a general variance profile tracks the raw
  // (1/n) Y^T Y spectrum against the solved MP law.
  const bool spike_general = !white && (need_top || need_cos);
  std::optional<MPSolution> sol;
  std::optional<SpikedPrediction> general_pred;
  std::optional<CdfTable> table;
  if (spike_general || need_ks) {
    sol = solve_general_mp(bulk_law(config), config.gamma);
    if (spike_general) {
      const std::vector<double> taus(config.spikes.size(), config.mu() * config.mu());
      general_pred = predict_general(taus, config.spikes, *sol);
    }
    if (need_ks) {
      table = mp_cdf_table(bulk_law(config), config.gamma, sol->edge_sq * 1.5);
    }
  }
  std::vector<double> eblp_coeffs;
  double eblp_amse = 0.0;
  if (need_denoise) {
    eblp_coeffs = optimal_coefficients(config, DenoiseMode::EblpInSample);
    eblp_amse = amse(config, DenoiseMode::EblpInSample, eblp_coeffs).total;
  }

  std::vector<double> theoretical(targets.size(), 0.0);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    switch (targets[t]) {
      case McQuantity::TopEigenvalue:
        theoretical[t] = white ? limit_spike(config.spikes[0], config, SpikeLimit::Eigenvalue)
                               : general_pred->t_sq[0];
        break;
      case McQuantity::CosSq:
        theoretical[t] = white ? limit_spike(config.spikes[0], config, SpikeLimit::CosSq)
                               : general_pred->cos_sq_right[0];
        break;
      case McQuantity::CovLossOp:
        theoretical[t] =
            asymptotic_loss({LossKind::Operator, config.noise_model, std::nullopt}, config);
        break;
      case McQuantity::CovLossFro:
        theoretical[t] =
            asymptotic_loss({LossKind::Frobenius, config.noise_model, std::nullopt}, config);
        break;
      case McQuantity::DenoiseMse: theoretical[t] = eblp_amse; break;
      case McQuantity::BulkKs: theoretical[t] = 0.0; break;
    }
  }

  const bool need_deb = white && (need_top || need_cos || need_loss_op || need_loss_fro);
  const bool need_raw = spike_general || need_ks;
  const bool need_raw_vectors = !white && need_cos;
  const bool need_sigma_y = need_deb || need_raw;
  const bool need_signal_cov = need_loss_op || need_loss_fro;

  std::vector<std::vector<double>> values(targets.size(), std::vector<double>(reps, 0.0));

  auto run_one = [&](int rep) {
    const DataSet data =
        gen_spiked_data(config, n, p, master_seed + static_cast<std::uint64_t>(rep), options.gen);
    Eigen::MatrixXd sigma_y;
    if (need_sigma_y) sigma_y = sample_covariance(data);

    CovEstimate deb;
    if (need_deb) deb = debias(sigma_y, config, true);

    Eigen::VectorXd raw_vals;
    Eigen::MatrixXd raw_vecs;
    if (need_raw) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          sigma_y, need_raw_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
      raw_vals = es.eigenvalues();  // ascending
      if (need_raw_vectors) raw_vecs = es.eigenvectors();
    }

    Eigen::MatrixXd signal_cov;
    if (need_signal_cov) {
      Eigen::VectorXd ells(config.rank);
      for (int k = 0; k < config.rank; ++k) ells[k] = config.spikes[static_cast<std::size_t>(k)];
      signal_cov = *data.u_oracle * ells.asDiagonal() * data.u_oracle->transpose();
    }

    for (std::size_t t = 0; t < targets.size(); ++t) {
      double v = 0.0;
      switch (targets[t]) {
        case McQuantity::TopEigenvalue:
          v = white ? deb.eigenvalues[0] : raw_vals[p - 1];
          break;
        case McQuantity::CosSq: {
          const Eigen::VectorXd top =
              white ? deb.eigenvectors.col(0) : raw_vecs.col(p - 1);
          v = sq(top.dot(data.u_oracle->col(0)));
          break;
        }
        case McQuantity::CovLossOp:
        case McQuantity::CovLossFro: {
          const LossKind loss =
              targets[t] == McQuantity::CovLossOp ? LossKind::Operator : LossKind::Frobenius;
          const CovEstimate shrunk =
              shrink_eigenvalues(deb, {loss, config.noise_model, std::nullopt}, config);
          const Eigen::MatrixXd diff = shrunk.sigma_hat - signal_cov;
          if (loss == LossKind::Operator) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff, Eigen::EigenvaluesOnly);
            v = std::max(std::abs(es.eigenvalues()[0]), std::abs(es.eigenvalues()[p - 1]));
          } else {
            v = diff.squaredNorm();
          }
          break;
        }
        case McQuantity::DenoiseMse: {
          const Eigen::MatrixXd s_hat = denoise_matrix(data, eblp_coeffs, config.rank);
          v = (s_hat - *data.s_oracle).squaredNorm() / static_cast<double>(n);
          break;
        }
        case McQuantity::BulkKs: {
          std::vector<double> bulk(raw_vals.data(), raw_vals.data() + (p - config.rank));
          v = ks_distance(std::move(bulk), *table);
          break;
        }
      }
      values[t][static_cast<std::size_t>(rep)] = v;
    }
  };

  const int workers = resolve_threads(options.threads, reps);
  if (workers == 1) {
    for (int rep = 0; rep < reps; ++rep) run_one(rep);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (int rep = next.fetch_add(1); rep < reps; rep = next.fetch_add(1)) {
          try {
            run_one(rep);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    }
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  std::vector<McResult> out(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    double mean = 0.0;
    for (double v : values[t]) mean += v;
    mean /= reps;
    double var = 0.0;
    for (double v : values[t]) var += sq(v - mean);
    out[t].quantity = targets[t];
    out[t].empirical_mean = mean;
    out[t].empirical_sd = reps > 1 ? std::sqrt(var / (reps - 1)) : 0.0;
    out[t].theoretical = theoretical[t];
    out[t].reps = reps;
    out[t].seed = master_seed;
  }
  return out;
}

}  // namespace redpca
