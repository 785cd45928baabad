// redpca: covariance estimation, eigenvalue shrinkage and denoising for data
// observed through an entrywise (diagonal) reduction, with Marchenko-Pastur
// numerics for general variance profiles.
//
// Subcommands: mp, predict, cov, denoise, sim. All file outputs are written
// atomically; "-" means stdout. Errors are reported as one JSON object on
// stderr; exit code 1 flags a domain failure (subcritical spike, solver
// non-convergence, degenerate reduction), 2 an input/usage problem.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "redpca/covariance.hpp"
#include "redpca/denoise.hpp"
#include "redpca/errors.hpp"
#include "redpca/io.hpp"
#include "redpca/model.hpp"
#include "redpca/mp_law.hpp"
#include "redpca/simulate.hpp"
#include "redpca/spike_maps.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using nlohmann::json;
using namespace redpca;

// ---------------------------------------------------------------------------
// small helpers

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument("cannot parse '" + cell + "' in " + what + " as a number");
    }
  }
  if (out.empty()) throw std::invalid_argument(what + " must hold at least one number");
  return out;
}

void emit_text(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  write_text_atomic(out_path, text);
}

NoiseModel parse_noise_model(const std::string& s) {
  if (s == "reduced") return NoiseModel::ReducedNoise;
  if (s == "unreduced") return NoiseModel::UnreducedNoise;
  throw std::invalid_argument("--noise must be 'reduced' or 'unreduced'");
}

// ---------------------------------------------------------------------------
// model flags shared by predict/cov/denoise/sim: a config file, or the model
// assembled inline from --gamma/--spikes/--delta|--mu,--sigma2/--noise/
// --noise-atoms,--noise-weights.

struct ModelFlags {
  std::string config_path;
  double gamma = -1.0;  // <0: not set
  std::string spikes;
  double delta = -1.0;
  double mu = std::nan("");
  double sigma2 = -1.0;
  std::string noise = "";
  std::string noise_atoms;
  std::string noise_weights;

  void add(CLI::App* cmd, bool with_spikes = true) {
    cmd->add_option("--config", config_path, "Model config JSON file");
    cmd->add_option("--gamma", gamma, "Aspect ratio p/n");
    if (with_spikes) cmd->add_option("--spikes", spikes, "Comma-separated spikes, descending");
    cmd->add_option("--delta", delta, "Bernoulli reduction: keep probability");
    cmd->add_option("--mu", mu, "General iid reduction: mean of the entries");
    cmd->add_option("--sigma2", sigma2, "General iid reduction: variance of the entries");
    cmd->add_option("--noise", noise, "Noise placement: reduced|unreduced");
    cmd->add_option("--noise-atoms", noise_atoms, "Noise-variance law atoms (comma-separated)");
    cmd->add_option("--noise-weights", noise_weights,
                    "Noise-variance law weights (default uniform)");
  }

  Reduction reduction_or(const Reduction& fallback, bool* given = nullptr) const {
    if (given) *given = true;
    if (delta >= 0.0) {
      if (!std::isnan(mu) || sigma2 >= 0.0) {
        throw std::invalid_argument("give either --delta or --mu/--sigma2, not both");
      }
      return Reduction::bernoulli(delta);
    }
    if (!std::isnan(mu)) return Reduction::general_iid(mu, sigma2 >= 0.0 ? sigma2 : 0.0);
    if (sigma2 >= 0.0) throw std::invalid_argument("--sigma2 needs --mu");
    if (given) *given = false;
    return fallback;
  }

  SpectralLaw law_or(const SpectralLaw& fallback) const {
    if (noise_atoms.empty()) {
      if (!noise_weights.empty()) throw std::invalid_argument("--noise-weights needs --noise-atoms");
      return fallback;
    }
    std::vector<double> atoms = parse_double_list(noise_atoms, "--noise-atoms");
    if (noise_weights.empty()) return SpectralLaw::uniform(std::move(atoms));
    return SpectralLaw(std::move(atoms), parse_double_list(noise_weights, "--noise-weights"));
  }

  // gamma_fallback < 0 means "no fallback": --gamma (or a config) is required.
  ReducedModelConfig build(double gamma_fallback = -1.0) const {
    if (!config_path.empty()) {
      ReducedModelConfig config = ReducedModelConfig::load_file(config_path);
      // Inline flags override individual config fields.
      if (gamma >= 0.0) config.gamma = gamma;
      if (!noise.empty()) config.noise_model = parse_noise_model(noise);
      bool red_given = false;
      const Reduction red = reduction_or(config.reduction, &red_given);
      if (red_given) config.reduction = red;
      if (!spikes.empty()) {
        return ReducedModelConfig(config.gamma, parse_double_list(spikes, "--spikes"),
                                  config.noise_model, config.reduction,
                                  law_or(config.noise_variances));
      }
      config.noise_variances = law_or(config.noise_variances);
      config.validate();
      return config;
    }
    double g = gamma >= 0.0 ? gamma : gamma_fallback;
    if (g < 0.0) throw std::invalid_argument("--gamma (or --config) is required");
    std::vector<double> ells;
    if (!spikes.empty()) ells = parse_double_list(spikes, "--spikes");
    const NoiseModel nm = noise.empty() ? NoiseModel::ReducedNoise : parse_noise_model(noise);
    return ReducedModelConfig(g, std::move(ells), nm, reduction_or(Reduction::bernoulli(1.0)),
                              law_or(SpectralLaw()));
  }
};

// ---------------------------------------------------------------------------
// mp: solve the Marchenko-Pastur forward problem and tabulate the transforms.

struct MpArgs {
  double gamma = 0.0;
  std::string atoms = "1";
  std::string weights;
  std::string law_file;
  int points = 200;
  double span = 10.0;
  std::string at;
  std::string out = "-";
};

void run_mp(const MpArgs& args) {
  SpectralLaw law;
  if (!args.law_file.empty()) {
    const Eigen::MatrixXd m = read_matrix_csv(args.law_file);
    if (m.cols() == 1) {
      law = SpectralLaw::uniform(std::vector<double>(m.col(0).data(), m.col(0).data() + m.rows()));
    } else if (m.cols() == 2) {
      law = SpectralLaw(std::vector<double>(m.col(0).data(), m.col(0).data() + m.rows()),
                        std::vector<double>(m.col(1).data(), m.col(1).data() + m.rows()));
    } else {
      throw std::invalid_argument("--law-file needs 1 column (atoms) or 2 (atom,weight)");
    }
  } else {
    std::vector<double> atoms = parse_double_list(args.atoms, "--atoms");
    law = args.weights.empty()
              ? SpectralLaw::uniform(std::move(atoms))
              : SpectralLaw(std::move(atoms), parse_double_list(args.weights, "--weights"));
  }

  const MPSolution sol = solve_general_mp(law, args.gamma);

  std::vector<double> xs;
  if (!args.at.empty()) {
    xs = parse_double_list(args.at, "--at");
  } else {
    if (args.points < 1) throw std::invalid_argument("--points must be >= 1");
    if (!(args.span > 1.0)) throw std::invalid_argument("--span must be > 1");
    xs.reserve(static_cast<std::size_t>(args.points));
    for (int i = 0; i < args.points; ++i) {
      xs.push_back(sol.edge_sq *
                   std::pow(args.span, static_cast<double>(i + 1) / args.points));
    }
  }

  std::string text;
  text += "# edge_sq=" + format_double(sol.edge_sq) + "\n";
  text += "# d_edge_limit=" + format_double(sol.d_edge_limit) + "\n";
  text += "x,m,m_under,D,Dprime\n";
  for (double x : xs) {
    const TransformValues tv = sol.evaluate(x);
    text += format_double(x) + "," + format_double(tv.m) + "," + format_double(tv.m_under) + "," +
            format_double(tv.d) + "," + format_double(tv.d_prime) + "\n";
  }
  emit_text(args.out, text);
}

// ---------------------------------------------------------------------------
// predict: limiting spiked singular values and PC cosines.

struct PredictArgs {
  ModelFlags model;
  bool general = false;
  std::string out = "-";
};

void run_predict(const PredictArgs& args) {
  const ReducedModelConfig config = args.model.build();
  if (config.rank < 1) throw std::invalid_argument("predict needs at least one spike");

  SpikedPrediction pred;
  if (args.general) {
    const MPSolution sol = solve_general_mp(bulk_law(config), config.gamma);
    const std::vector<double> taus(config.spikes.size(), config.mu() * config.mu());
    pred = predict_general(taus, config.spikes, sol);
  } else {
    pred = predict_reduced(config);
  }

  std::string text = "k,ell,t_sq,cos_sq_right,cos_sq_left,detectable\n";
  for (std::size_t k = 0; k < config.spikes.size(); ++k) {
    text += std::to_string(k + 1) + "," + format_double(config.spikes[k]) + "," +
            format_double(pred.t_sq[k]) + "," + format_double(pred.cos_sq_right[k]) + "," +
            format_double(pred.cos_sq_left[k]) + "," + (pred.detectable[k] ? "1" : "0") + "\n";
  }
  emit_text(args.out, text);
}

// ---------------------------------------------------------------------------
// cov: debiased (optionally shrunk) or alternative covariance estimate.

struct CovArgs {
  std::string y_path;
  std::string d_path;
  ModelFlags model;
  std::string loss;  // "", "op", "fro"
  double margin = -1.0;
  bool alt = false;
  std::string out = "-";
  std::string matrix_out;
};

void run_cov(const CovArgs& args) {
  DataSet data;
  data.y = read_matrix_csv(args.y_path);
  if (!args.d_path.empty()) {
    data.d = read_matrix_csv(args.d_path);
    if (data.d.rows() != data.y.rows() || data.d.cols() != data.y.cols()) {
      throw std::runtime_error("reduction matrix shape does not match the data");
    }
  }
  const double gamma_data =
      static_cast<double>(data.y.cols()) / static_cast<double>(data.y.rows());

  ReducedModelConfig config = args.model.build(gamma_data);
  bool moments_estimated = false;
  bool reduction_given = true;
  args.model.reduction_or(Reduction::bernoulli(1.0), &reduction_given);
  if (args.model.config_path.empty() && !reduction_given) {
    // No reduction description: estimate the moments from D when given.
    if (args.d_path.empty()) {
      throw std::invalid_argument(
          "describe the reduction (--delta or --mu/--sigma2 or --config) or pass --d");
    }
    const auto [mu_hat, var_hat] = estimate_reduction_moments(data.d);
    config.reduction = Reduction::general_iid(mu_hat, var_hat);
    moments_estimated = true;
  }

  if (args.alt && !args.loss.empty()) {
    throw std::invalid_argument("shrinkage applies to the debiased estimator, not --alt");
  }

  CovEstimate est;
  if (args.alt) {
    if (args.d_path.empty()) throw std::invalid_argument("--alt needs the reduction matrix --d");
    est = alt_estimator(data, config);
  } else {
    est = debias(sample_covariance(data), config);
  }
  est.moments_estimated = moments_estimated;

  std::optional<CovEstimate> shrunk;
  if (!args.loss.empty()) {
    ShrinkageRule rule;
    rule.loss = args.loss == "op" ? LossKind::Operator : LossKind::Frobenius;
    rule.noise_model = config.noise_model;
    if (args.margin >= 0.0) rule.bulk_margin = args.margin;
    shrunk = shrink_eigenvalues(est, rule, config);
  }

  std::string text;
  switch (est.provenance) {
    case Provenance::Debiased:
      text += shrunk ? "# provenance=debiased_shrunk\n" : "# provenance=debiased\n";
      break;
    case Provenance::AltLinearSystem:
      text += "# provenance=alt_linear_system\n";
      text += "# zero_overlap_count=" + std::to_string(est.zero_overlap_count) + "\n";
      break;
    case Provenance::DebiasedShrunk: text += "# provenance=debiased_shrunk\n"; break;
  }
  text += std::string("# moments_estimated=") + (moments_estimated ? "1" : "0") + "\n";
  text += "k,lambda,eta\n";
  for (Eigen::Index k = 0; k < est.eigenvalues.size(); ++k) {
    const double eta = shrunk ? shrunk->eigenvalues[k] : est.eigenvalues[k];
    text += std::to_string(k + 1) + "," + format_double(est.eigenvalues[k]) + "," +
            format_double(eta) + "\n";
  }
  emit_text(args.out, text);

  if (!args.matrix_out.empty()) {
    write_matrix_csv(args.matrix_out, shrunk ? shrunk->sigma_hat : est.sigma_hat);
  }
}

// ---------------------------------------------------------------------------
// denoise: BLP/EBLP coefficients, AMSE report, and denoised observations.

struct DenoiseArgs {
  std::string y_path;
  std::string d_path;
  std::string mode = "eblp";
  ModelFlags model;
  std::string coefficients;
  bool plugin = false;
  std::string u_path;
  std::string y0_path;
  std::string s_oracle_path;
  std::string out = "-";
  std::string denoised_out;
};

void run_denoise(const DenoiseArgs& args) {
  DenoiseMode mode;
  if (args.mode == "blp") mode = DenoiseMode::Blp;
  else if (args.mode == "eblp") mode = DenoiseMode::EblpInSample;
  else if (args.mode == "oos") mode = DenoiseMode::EblpOutOfSample;
  else throw std::invalid_argument("--mode must be blp, eblp or oos");

  DataSet data;
  data.y = read_matrix_csv(args.y_path);
  if (!args.d_path.empty()) {
    data.d = read_matrix_csv(args.d_path);
    if (data.d.rows() != data.y.rows() || data.d.cols() != data.y.cols()) {
      throw std::runtime_error("reduction matrix shape does not match the data");
    }
  }
  const double gamma_data =
      static_cast<double>(data.y.cols()) / static_cast<double>(data.y.rows());
  ReducedModelConfig config = args.model.build(gamma_data);

  bool reduction_given = true;
  args.model.reduction_or(Reduction::bernoulli(1.0), &reduction_given);
  if (args.model.config_path.empty() && !reduction_given && !args.d_path.empty()) {
    const auto [mu_hat, var_hat] = estimate_reduction_moments(data.d);
    config.reduction = Reduction::general_iid(mu_hat, var_hat);
    config.validate();
  }

  if (args.plugin) {
    if (config.rank > 0) throw std::invalid_argument("--plugin replaces --spikes; give one only");
    PluginParams params;
    params.noise_model = config.noise_model;
    params.reduction = config.reduction;
    const PluginEstimate est = estimate_plugin_params(data, params);
    if (est.rank == 0) {
      throw subcritical_error("no singular value clears the detection edge; nothing to denoise");
    }
    config = ReducedModelConfig(config.gamma, est.spikes, config.noise_model, config.reduction,
                                config.noise_variances);
  }
  if (config.rank < 1) {
    throw std::invalid_argument("denoise needs spikes (--spikes, --config or --plugin)");
  }

  std::vector<double> coeffs = args.coefficients.empty()
                                   ? optimal_coefficients(config, mode)
                                   : parse_double_list(args.coefficients, "--coefficients");
  DenoiserSpec spec = DenoiserSpec::make(mode, coeffs);
  spec.validate(config.rank);

  const AmseReport report = amse(config, mode, coeffs);

  // Denoised output and realized error, per mode.
  std::optional<Eigen::MatrixXd> denoised;
  std::optional<double> realized;
  if (mode == DenoiseMode::Blp) {
    if (args.u_path.empty()) throw std::invalid_argument("--mode blp needs population PCs --u");
    const Eigen::MatrixXd u = read_matrix_csv(args.u_path);
    if (u.rows() != data.y.cols() || u.cols() != config.rank) {
      throw std::runtime_error("--u must be p x rank");
    }
    Eigen::VectorXd c(config.rank);
    for (int k = 0; k < config.rank; ++k) c[k] = coeffs[static_cast<std::size_t>(k)];
    denoised = data.y * u * c.asDiagonal() * u.transpose();
  } else if (mode == DenoiseMode::EblpInSample) {
    denoised = denoise_matrix(data, coeffs, config.rank);
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(data.y, Eigen::ComputeThinV);
    const Eigen::MatrixXd basis = svd.matrixV().leftCols(config.rank);
    if (!args.y0_path.empty()) {
      const Eigen::MatrixXd y0 = read_matrix_csv(args.y0_path);
      if (y0.cols() != data.y.cols()) {
        throw std::runtime_error("--y0 must have the same number of columns as --y");
      }
      Eigen::VectorXd c(config.rank);
      for (int k = 0; k < config.rank; ++k) c[k] = coeffs[static_cast<std::size_t>(k)];
      denoised = y0 * basis * c.asDiagonal() * basis.transpose();
    }
  }

  if (!args.s_oracle_path.empty()) {
    if (!denoised) {
      throw std::invalid_argument("--s-oracle needs denoised rows (--y0 for --mode oos)");
    }
    const Eigen::MatrixXd s = read_matrix_csv(args.s_oracle_path);
    if (s.rows() != denoised->rows() || s.cols() != denoised->cols()) {
      throw std::runtime_error("--s-oracle shape does not match the denoised rows");
    }
    realized = (*denoised - s).squaredNorm() / static_cast<double>(s.rows());
  }

  json j;
  j["mode"] = args.mode;
  j["noise_model"] = config.noise_model == NoiseModel::ReducedNoise ? "reduced" : "unreduced";
  j["rank"] = config.rank;
  j["per_spike"] = json::array();
  for (const auto& row : report.per_spike) {
    j["per_spike"].push_back(
        {{"ell", row.ell}, {"coefficient", row.coefficient}, {"amse", row.amse}});
  }
  j["total_amse"] = report.total;
  if (args.plugin) j["plugin_spikes"] = config.spikes;
  if (realized) j["realized_mse"] = *realized;
  emit_text(args.out, j.dump(2) + "\n");

  if (!args.denoised_out.empty()) {
    if (!denoised) {
      throw std::invalid_argument("--denoised-out needs denoised rows (--y0 for --mode oos)");
    }
    write_matrix_csv(args.denoised_out, *denoised);
  }
}

// ---------------------------------------------------------------------------
// sim: seeded Monte Carlo against the asymptotic theory.

struct SimArgs {
  ModelFlags model;
  long long n = 0;
  long long p = 0;
  int reps = 50;
  std::uint64_t seed = 1;
  std::string targets = "top_eig,cos_sq";
  int threads = 0;
  std::string z_law = "gaussian";
  std::string noise_law = "gaussian";
  double ar1 = std::nan("");
  std::string out = "-";
};

SampleLaw parse_sample_law(const std::string& s, const std::string& flag) {
  if (s == "gaussian") return SampleLaw::Gaussian;
  if (s == "two_point") return SampleLaw::TwoPoint;
  throw std::invalid_argument(flag + " must be 'gaussian' or 'two_point'");
}

void run_sim(const SimArgs& args) {
  if (args.n < 1 || args.p < 1) throw std::invalid_argument("--n and --p must be >= 1");
  ReducedModelConfig config = args.model.build(static_cast<double>(args.p) /
                                               static_cast<double>(args.n));
  if (!std::isnan(args.ar1)) {
    config = ReducedModelConfig(config.gamma, config.spikes, config.noise_model, config.reduction,
                                gen_ar1_variances(args.ar1, static_cast<int>(args.p)));
  }

  std::vector<McQuantity> targets;
  std::stringstream ss(args.targets);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name == "top_eig") targets.push_back(McQuantity::TopEigenvalue);
    else if (name == "cos_sq") targets.push_back(McQuantity::CosSq);
    else if (name == "loss_op") targets.push_back(McQuantity::CovLossOp);
    else if (name == "loss_fro") targets.push_back(McQuantity::CovLossFro);
    else if (name == "denoise_mse") targets.push_back(McQuantity::DenoiseMse);
    else if (name == "bulk_ks") targets.push_back(McQuantity::BulkKs);
    else throw std::invalid_argument("unknown target '" + name + "'");
  }

  McOptions options;
  options.threads = args.threads;
  options.gen.z_law = parse_sample_law(args.z_law, "--z-law");
  options.gen.noise_law = parse_sample_law(args.noise_law, "--noise-law");

  const std::vector<McResult> results =
      run_mc(config, args.n, args.p, args.reps, targets, args.seed, options);

  std::string text = "# seed=" + std::to_string(args.seed) + "\n";
  text += "quantity,empirical_mean,empirical_sd,theoretical,reps\n";
  for (const McResult& r : results) {
    text += std::string(mc_quantity_name(r.quantity)) + "," + format_double(r.empirical_mean) +
            "," + format_double(r.empirical_sd) + "," + format_double(r.theoretical) + "," +
            std::to_string(r.reps) + "\n";
  }
  emit_text(args.out, text);
}

// ---------------------------------------------------------------------------

int fail_json(const std::string& type, const std::string& message, int code) {
  json j;
  j["error"] = {{"type", type}, {"message", message}};
  std::cerr << j.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariance estimation and denoising under diagonal reduction"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  MpArgs mp_args;
  CLI::App* mp_cmd = app.add_subcommand(
      "mp",
      "Solve the MP law and tabulate its transforms. "
      "Output CSV header: x,m,m_under,D,Dprime (after '# edge_sq=' and '# d_edge_limit=' lines)");
  mp_cmd->add_option("--gamma", mp_args.gamma, "Aspect ratio p/n")->required();
  mp_cmd->add_option("--atoms", mp_args.atoms, "Variance-law atoms (comma-separated)");
  mp_cmd->add_option("--weights", mp_args.weights, "Variance-law weights (default uniform)");
  mp_cmd->add_option("--law-file", mp_args.law_file, "CSV with atoms or atom,weight rows");
  mp_cmd->add_option("--points", mp_args.points, "Number of tabulation points above the edge");
  mp_cmd->add_option("--span", mp_args.span, "Grid reaches edge*span");
  mp_cmd->add_option("--at", mp_args.at, "Evaluate at these x instead of a grid");
  mp_cmd->add_option("--out", mp_args.out, "Output CSV path ('-' for stdout)");

  PredictArgs predict_args;
  CLI::App* predict_cmd = app.add_subcommand(
      "predict",
      "Limiting spiked eigenvalues and PC cosines. "
      "Output CSV header: k,ell,t_sq,cos_sq_right,cos_sq_left,detectable");
  predict_args.model.add(predict_cmd);
  predict_cmd->add_flag("--general", predict_args.general,
                        "Use the general variance-profile theorem (raw-spectrum convention)");
  predict_cmd->add_option("--out", predict_args.out, "Output CSV path ('-' for stdout)");

  CovArgs cov_args;
  CLI::App* cov_cmd = app.add_subcommand(
      "cov",
      "Debiased or alternative covariance estimate. Output CSV header: k,lambda,eta "
      "(after '# provenance=' and '# moments_estimated=' lines)");
  cov_cmd->add_option("--y", cov_args.y_path, "Data CSV, one observation per row")->required();
  cov_cmd->add_option("--d", cov_args.d_path, "Reduction-matrix CSV (same shape as --y)");
  cov_args.model.add(cov_cmd, /*with_spikes=*/false);
  cov_cmd->add_option("--loss", cov_args.loss, "Shrink eigenvalues for this loss: op|fro")
      ->check(CLI::IsMember({"op", "fro"}));
  cov_cmd->add_option("--margin", cov_args.margin, "Bulk collapse margin (default 0.05*edge)");
  cov_cmd->add_flag("--alt", cov_args.alt, "Entrywise linear-system estimator instead");
  cov_cmd->add_option("--out", cov_args.out, "Spectrum CSV path ('-' for stdout)");
  cov_cmd->add_option("--matrix-out", cov_args.matrix_out, "Write the estimate matrix here");

  DenoiseArgs denoise_args;
  CLI::App* denoise_cmd = app.add_subcommand(
      "denoise",
      "BLP/EBLP denoising and AMSE report. Report JSON keys: mode, noise_model, rank, "
      "per_spike[{ell,coefficient,amse}], total_amse, realized_mse (with --s-oracle)");
  denoise_cmd->add_option("--y", denoise_args.y_path, "Data CSV, one observation per row")
      ->required();
  denoise_cmd->add_option("--d", denoise_args.d_path,
                          "Reduction-matrix CSV; reduction moments are estimated from it when "
                          "no --delta/--mu is given");
  denoise_cmd->add_option("--mode", denoise_args.mode, "blp|eblp|oos (default eblp)");
  denoise_args.model.add(denoise_cmd);
  denoise_cmd->add_option("--coefficients", denoise_args.coefficients,
                          "Per-spike coefficients (default AMSE-optimal)");
  denoise_cmd->add_flag("--plugin", denoise_args.plugin,
                        "Estimate rank and spikes from the data");
  denoise_cmd->add_option("--u", denoise_args.u_path, "Population PCs CSV (BLP only)");
  denoise_cmd->add_option("--y0", denoise_args.y0_path, "Held-out rows to denoise (oos only)");
  denoise_cmd->add_option("--s-oracle", denoise_args.s_oracle_path,
                          "True signal rows; adds realized_mse to the report");
  denoise_cmd->add_option("--out", denoise_args.out, "Report JSON path ('-' for stdout)");
  denoise_cmd->add_option("--denoised-out", denoise_args.denoised_out,
                          "Write the denoised rows here");

  SimArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand(
      "sim",
      "Seeded Monte Carlo against the theory. "
      "Output CSV header: quantity,empirical_mean,empirical_sd,theoretical,reps");
  sim_args.model.add(sim_cmd);
  sim_cmd->add_option("--n", sim_args.n, "Observations per replicate")->required();
  sim_cmd->add_option("--p", sim_args.p, "Dimension")->required();
  sim_cmd->add_option("--reps", sim_args.reps, "Replicates");
  sim_cmd->add_option("--seed", sim_args.seed, "Master seed; replicate r uses seed+r");
  sim_cmd->add_option("--targets", sim_args.targets,
                      "Comma list: top_eig,cos_sq,loss_op,loss_fro,denoise_mse,bulk_ks");
  sim_cmd->add_option("--threads", sim_args.threads,
                      "Worker threads (0: hardware, capped by REDUCED_PCA_THREADS)");
  sim_cmd->add_option("--z-law", sim_args.z_law, "Score law: gaussian|two_point");
  sim_cmd->add_option("--noise-law", sim_args.noise_law, "Noise law: gaussian|two_point");
  sim_cmd->add_option("--ar1", sim_args.ar1, "Use the AR(1) variance profile with this rho");
  sim_cmd->add_option("--out", sim_args.out, "Output CSV path ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail_json("usage", e.what(), 2);
  }

  try {
    if (*mp_cmd) run_mp(mp_args);
    if (*predict_cmd) run_predict(predict_args);
    if (*cov_cmd) run_cov(cov_args);
    if (*denoise_cmd) run_denoise(denoise_args);
    if (*sim_cmd) run_sim(sim_args);
  } catch (const subcritical_error& e) {
    return fail_json("subcritical", e.what(), 1);
  } catch (const convergence_error& e) {
    return fail_json("convergence", e.what(), 1);
  } catch (const degenerate_reduction_error& e) {
    return fail_json("degenerate_reduction", e.what(), 1);
  } catch (const std::domain_error& e) {
    return fail_json("domain", e.what(), 1);
  } catch (const std::invalid_argument& e) {
    return fail_json("usage", e.what(), 2);
  } catch (const std::runtime_error& e) {
    return fail_json("io", e.what(), 2);
  } catch (const std::exception& e) {
    return fail_json("internal", e.what(), 1);
  }
  return 0;
}
