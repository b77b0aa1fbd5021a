#include "mcnet/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "mcnet/core/errors.hpp"

namespace mcnet {
namespace {

constexpr double kConversionThreshold = 1.0;
constexpr double kLatentNoise = 0.05;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

bool probability(double p) { return p >= 0.0 && p <= 1.0; }

struct Loadings {
  // x_mri = mri_base + mri_sev * s + mri_nui * n
  Eigen::RowVectorXd mri_base, mri_sev, mri_nui;
  // x_pet = tanh(pet_base + pet_sev * s + pet_nui * n)
  Eigen::RowVectorXd pet_base, pet_sev, pet_nui;
};

double signed_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution sign(0.5);
  const double v = mag(rng);
  return sign(rng) ? v : -v;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_subjects < 2) throw ConfigError("synth: n_subjects must be >= 2");
  if (d < 2) throw ConfigError("synth: d must be >= 2");
  if (t < 1) throw ConfigError("synth: t must be >= 1");
  for (double p : {p_pet_bl_missing, p_mri_missing, p_pet_missing, attrition, class_balance})
    if (!probability(p)) throw ConfigError("synth: probabilities must lie in [0, 1]");
  if (!(noise_sd >= 0)) throw ConfigError("synth: noise_sd must be >= 0");
  if (severity_features < 1 || severity_features > d) throw ConfigError("synth: severity_features must lie in [1, d]");
}

std::vector<double> visit_times(int visits) {
  static constexpr double grid[] = {0.0, 0.5, 1.0, 2.0, 3.0};
  std::vector<double> out;
  for (int t = 0; t < visits; ++t) out.push_back(t < 5 ? grid[t] : 3.0 + 0.5 * (t - 4));
  return out;
}

SynthCohort generate_cohort(const SynthConfig& cfg) {
  cfg.validate();
  const auto times = visit_times(cfg.t);
  std::mt19937_64 master(splitmix64(cfg.seed));

  SynthCohort out;
  Loadings L;
  for (auto s : kModalities) {
    std::vector<int> order(cfg.d);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), master);
    std::vector<int> chosen(order.begin(), order.begin() + cfg.severity_features);
    std::sort(chosen.begin(), chosen.end());
    out.severity_features[idx(s)] = chosen;
  }
  std::normal_distribution<double> base_dist(0.0, 0.5);
  std::uniform_real_distribution<double> pet_offset(-0.3, 0.3);
  L.mri_base.resize(cfg.d);
  L.mri_sev = Eigen::RowVectorXd::Zero(cfg.d);
  L.mri_nui = Eigen::RowVectorXd::Zero(cfg.d);
  L.pet_base.resize(cfg.d);
  L.pet_sev = Eigen::RowVectorXd::Zero(cfg.d);
  L.pet_nui = Eigen::RowVectorXd::Zero(cfg.d);
  const auto& mri_sev_idx = out.severity_features[idx(Modality::Mri)];
  const auto& pet_sev_idx = out.severity_features[idx(Modality::Pet)];
  std::uniform_real_distribution<double> sev_load(0.8, 1.2);
  for (int j = 0; j < cfg.d; ++j) {
    L.mri_base(j) = base_dist(master);
    if (std::binary_search(mri_sev_idx.begin(), mri_sev_idx.end(), j))
      L.mri_sev(j) = -sev_load(master);  // atrophy: volume falls with severity
    else
      L.mri_nui(j) = signed_uniform(master, 0.5, 1.0);
    L.pet_base(j) = pet_offset(master);
    if (std::binary_search(pet_sev_idx.begin(), pet_sev_idx.end(), j))
      L.pet_sev(j) = -1.25 * sev_load(master);  // hypometabolism
    else
      L.pet_nui(j) = signed_uniform(master, 0.5, 1.0);
  }

  const int n_pmci = static_cast<int>(std::lround(cfg.class_balance * cfg.n_subjects));
  std::vector<int> labels(cfg.n_subjects, 0);
  std::fill(labels.begin(), labels.begin() + n_pmci, 1);
  std::shuffle(labels.begin(), labels.end(), master);

  Cohort& cohort = out.cohort;
  cohort.visits = cfg.t;
  cohort.dim = cfg.d;
  cohort.subjects.reserve(cfg.n_subjects);
  for (int i = 0; i < cfg.n_subjects; ++i) {
    std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(i) + 1)));
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    SubjectRecord r;
    char id[32];
    std::snprintf(id, sizeof(id), "S%05d", i);
    r.id = id;
    r.c = labels[i];

    // Rejection-sample a severity trajectory consistent with the class:
    // pMCI starts below threshold and crosses it by the last visit, sMCI
    // never crosses.
    std::vector<double> sev(cfg.t);
    for (;;) {
      double s0, rate;
      if (r.c == 1) {
        s0 = 0.5 + 0.25 * unit(rng);
        rate = 0.3 + 0.5 * uni(rng);
      } else {
        s0 = 0.3 * unit(rng);
        rate = 0.15 * uni(rng);
      }
      bool crossed = false;
      for (int t = 0; t < cfg.t; ++t) {
        sev[t] = s0 + rate * times[t] + kLatentNoise * unit(rng);
        crossed = crossed || sev[t] >= kConversionThreshold;
      }
      const bool ok = r.c == 1 ? (sev[0] < kConversionThreshold && crossed) : !crossed;
      if (ok) break;
    }
    const double n0 = unit(rng);
    const double n_rate = 0.3 * unit(rng);

    r.y = Eigen::VectorXi::Zero(cfg.t);
    bool converted = false;
    for (int t = 0; t < cfg.t; ++t) {
      converted = converted || sev[t] >= kConversionThreshold;
      r.y(t) = converted ? 1 : 0;
    }

    r.features(Modality::Mri).resize(cfg.t, cfg.d);
    r.features(Modality::Pet).resize(cfg.t, cfg.d);
    for (int t = 0; t < cfg.t; ++t) {
      const double nui = n0 + n_rate * times[t];
      Eigen::RowVectorXd mri = L.mri_base + sev[t] * L.mri_sev + nui * L.mri_nui;
      Eigen::RowVectorXd pet = (L.pet_base + sev[t] * L.pet_sev + nui * L.pet_nui).array().tanh().matrix();
      for (int j = 0; j < cfg.d; ++j) {
        mri(j) += cfg.noise_sd * unit(rng);
        pet(j) += cfg.noise_sd * unit(rng);
      }
      r.features(Modality::Mri).row(t) = mri;
      r.features(Modality::Pet).row(t) = pet;
    }

    r.mask(Modality::Mri) = Mask::Zero(cfg.t);
    r.mask(Modality::Pet) = Mask::Zero(cfg.t);
    r.mask(Modality::Mri)(0) = true;
    r.mask(Modality::Pet)(0) = uni(rng) >= cfg.p_pet_bl_missing;
    bool dropped = false;
    for (int t = 1; t < cfg.t; ++t) {
      const double u_drop = uni(rng), u_mri = uni(rng), u_pet = uni(rng);
      dropped = dropped || u_drop < cfg.attrition;
      if (dropped) continue;
      r.mask(Modality::Mri)(t) = u_mri >= cfg.p_mri_missing;
      r.mask(Modality::Pet)(t) = u_pet >= cfg.p_pet_missing;
    }
    cohort.subjects.push_back(std::move(r));
  }
  return out;
}

}  // namespace mcnet
