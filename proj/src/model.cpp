#include "redpca/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace redpca {

namespace {

void check_finite(double v, const char* name) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be finite");
  }
}

}  // namespace

SpectralLaw::SpectralLaw(std::vector<double> atoms_, std::vector<double> weights_)
    : atoms(std::move(atoms_)), weights(std::move(weights_)) {
  if (atoms.empty() || atoms.size() != weights.size()) {
    throw std::invalid_argument("spectral law needs matching non-empty atoms and weights");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    check_finite(atoms[i], "atom");
    if (atoms[i] < 0.0) throw std::invalid_argument("spectral law atoms must be >= 0");
    if (!(weights[i] > 0.0)) throw std::invalid_argument("spectral law weights must be > 0");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("spectral law weights must sum to 1 (got " +
                                std::to_string(total) + ")");
  }
}

SpectralLaw SpectralLaw::point_mass(double atom) { return SpectralLaw({atom}, {1.0}); }

SpectralLaw SpectralLaw::uniform(std::vector<double> atoms_) {
  if (atoms_.empty()) throw std::invalid_argument("uniform spectral law needs atoms");
  const std::size_t k = atoms_.size();
  std::vector<double> w(k, 1.0 / static_cast<double>(k));
  // Remove the accumulated rounding so the sum is exactly 1.
  double partial = std::accumulate(w.begin(), w.end() - 1, 0.0);
  w.back() = 1.0 - partial;
  return SpectralLaw(std::move(atoms_), std::move(w));
}

double SpectralLaw::max_atom() const { return *std::max_element(atoms.begin(), atoms.end()); }

double SpectralLaw::mean() const {
  double s = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) s += atoms[i] * weights[i];
  return s;
}

bool SpectralLaw::is_unit_point_mass() const {
  return atoms.size() == 1 && std::abs(atoms[0] - 1.0) < 1e-15;
}

SpectralLaw SpectralLaw::scaled(double c) const {
  if (!(c > 0.0)) throw std::invalid_argument("scale factor must be > 0");
  std::vector<double> a(atoms);
  for (double& v : a) v *= c;
  return SpectralLaw(std::move(a), weights);
}

Reduction Reduction::bernoulli(double delta) {
  if (!(delta > 0.0) || delta > 1.0) {
    throw std::invalid_argument("Bernoulli reduction needs delta in (0, 1]");
  }
  Reduction r;
  r.kind = Kind::Bernoulli;
  r.mu = delta;
  r.sigma2 = delta * (1.0 - delta);
  return r;
}

Reduction Reduction::general_iid(double mu, double sigma2) {
  check_finite(mu, "mu");
  check_finite(sigma2, "sigma2");
  if (sigma2 < 0.0) throw std::invalid_argument("reduction variance must be >= 0");
  if (!(mu * mu + sigma2 > 0.0)) {
    throw std::invalid_argument("reduction second moment must be > 0");
  }
  Reduction r;
  r.kind = Kind::GeneralIid;
  r.mu = mu;
  r.sigma2 = sigma2;
  return r;
}

ReducedModelConfig::ReducedModelConfig(double gamma_, std::vector<double> spikes_,
                                       NoiseModel noise_model_, Reduction reduction_,
                                       SpectralLaw noise_variances_)
    : gamma(gamma_),
      rank(static_cast<int>(spikes_.size())),
      spikes(std::move(spikes_)),
      noise_model(noise_model_),
      reduction(reduction_),
      noise_variances(std::move(noise_variances_)) {
  std::sort(spikes.begin(), spikes.end(), std::greater<double>());
  validate();
}

void ReducedModelConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("gamma must be a positive finite aspect ratio");
  }
  if (rank < 0 || static_cast<std::size_t>(rank) != spikes.size()) {
    throw std::invalid_argument("rank must equal the number of spikes");
  }
  for (double ell : spikes) {
    if (!(ell > 0.0) || !std::isfinite(ell)) {
      throw std::invalid_argument("spikes must be positive and finite");
    }
  }
  if (!std::is_sorted(spikes.begin(), spikes.end(), std::greater<double>())) {
    throw std::invalid_argument("spikes must be sorted descending");
  }
  if (std::set<double>(spikes.begin(), spikes.end()).size() != spikes.size()) {
    throw std::invalid_argument("tied spikes are not supported (limits assume simple spikes)");
  }
  if (reduction.delta() > 1.0 + 1e-15) {
    throw std::invalid_argument("reduction moments violate delta <= 1");
  }
}

std::pair<double, double> derived_moments(const ReducedModelConfig& config) {
  return {config.m(), config.delta()};
}

namespace {

nlohmann::json law_to_json(const SpectralLaw& law) {
  return nlohmann::json{{"atoms", law.atoms}, {"weights", law.weights}};
}

SpectralLaw law_from_json(const nlohmann::json& j) {
  return SpectralLaw(j.at("atoms").get<std::vector<double>>(),
                     j.at("weights").get<std::vector<double>>());
}

}  // namespace

std::string ReducedModelConfig::to_json() const {
  nlohmann::json j;
  j["gamma"] = gamma;
  j["rank"] = rank;
  j["spikes"] = spikes;
  j["noise_model"] = noise_model == NoiseModel::ReducedNoise ? "reduced" : "unreduced";
  if (reduction.kind == Reduction::Kind::Bernoulli) {
    j["reduction"] = {{"bernoulli", reduction.mu}};
  } else {
    j["reduction"] = {{"general", {{"mu", reduction.mu}, {"sigma2", reduction.sigma2}}}};
  }
  j["noise_variances"] = law_to_json(noise_variances);
  return j.dump(2);
}

ReducedModelConfig ReducedModelConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("config parse error: ") + e.what());
  }
  try {
    Reduction red;
    const auto& jr = j.at("reduction");
    if (jr.contains("bernoulli")) {
      red = Reduction::bernoulli(jr.at("bernoulli").get<double>());
    } else if (jr.contains("general")) {
      red = Reduction::general_iid(jr.at("general").at("mu").get<double>(),
                                   jr.at("general").at("sigma2").get<double>());
    } else {
      throw std::runtime_error("config reduction must be 'bernoulli' or 'general'");
    }
    const std::string nm = j.value("noise_model", std::string("reduced"));
    if (nm != "reduced" && nm != "unreduced") {
      throw std::runtime_error("config noise_model must be 'reduced' or 'unreduced'");
    }
    SpectralLaw law;  // default: unit point mass (white noise)
    if (j.contains("noise_variances")) law = law_from_json(j.at("noise_variances"));
    ReducedModelConfig config(j.at("gamma").get<double>(),
                              j.value("spikes", std::vector<double>{}),
                              nm == "reduced" ? NoiseModel::ReducedNoise
                                              : NoiseModel::UnreducedNoise,
                              red, std::move(law));
    if (j.contains("rank") && j.at("rank").get<int>() != config.rank) {
      throw std::runtime_error("config rank does not match the number of spikes");
    }
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("config field error: ") + e.what());
  }
}

ReducedModelConfig ReducedModelConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void ReducedModelConfig::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << to_json() << "\n";
}

}  // namespace redpca
