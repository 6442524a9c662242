#include "uqtab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "uqtab/numerics.hpp"
#include "uqtab/rng.hpp"

namespace uqtab {
namespace {

void validate(const SyntheticCohortConfig& c) {
  if (c.n_patients < 3) throw std::runtime_error("n_patients must be >= 3");
  if (c.n_variables < 1) throw std::runtime_error("n_variables must be >= 1");
  if (!(c.mortality_rate > 0.0 && c.mortality_rate < 1.0)) {
    throw std::runtime_error("mortality_rate must lie in (0, 1)");
  }
  if (c.label_sharpness < 0.0) throw std::runtime_error("label_sharpness must be >= 0");
  if (c.patient_sd < 0.0 || c.noise_sd < 0.0) {
    throw std::runtime_error("noise scales must be >= 0");
  }
  if (!(c.ar_coeff >= 0.0 && c.ar_coeff < 1.0)) {
    throw std::runtime_error("ar_coeff must lie in [0, 1)");
  }
  if (c.min_obs < 1 || c.max_obs < c.min_obs) {
    throw std::runtime_error("need 1 <= min_obs <= max_obs");
  }
  double prevalence_sum = 0.0;
  for (const auto& g : c.groups) {
    if (g.tag.empty()) throw std::runtime_error("group tag must be non-empty");
    if (!(g.prevalence >= 0.0 && g.prevalence <= 1.0)) {
      throw std::runtime_error("group prevalence must lie in [0, 1]: " + g.tag);
    }
    prevalence_sum += g.prevalence;
  }
  if (prevalence_sum > 1.0 + 1e-12) {
    throw std::runtime_error(
        "group prevalences sum above 1; groups are mutually exclusive");
  }
}

std::string padded_id(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%05d", prefix, i);
  return buf;
}

}  // namespace

std::vector<Episode> generate_synthetic_cohort(const SyntheticCohortConfig& config) {
  validate(config);
  const int n = config.n_patients;
  const int v = config.n_variables;

  // Cohort-level draws: per-variable baselines and the fixed label direction.
  RngStream cohort(config.seed, "synth/cohort", 0);
  std::vector<double> base(v);
  for (int j = 0; j < v; ++j) base[j] = 2.0 * cohort.normal();
  std::vector<double> label_w(v);
  double norm2 = 0.0;
  for (int j = 0; j < v; ++j) {
    label_w[j] = cohort.normal();
    norm2 += label_w[j] * label_w[j];
  }
  const double inv_norm = 1.0 / std::sqrt(std::max(norm2, 1e-300));
  for (int j = 0; j < v; ++j) label_w[j] *= inv_norm;

  // Per-group shift directions: a fixed random sign per variable, so a
  // member's latent mean moves by exactly shift_scale * patient_sd in every
  // column.
  std::vector<std::vector<double>> group_dir(config.groups.size());
  for (size_t g = 0; g < config.groups.size(); ++g) {
    RngStream gs(config.seed, "synth/groupdir", static_cast<std::uint64_t>(g));
    group_dir[g].resize(v);
    for (int j = 0; j < v; ++j) group_dir[g][j] = gs.normal() < 0.0 ? -1.0 : 1.0;
  }

  std::vector<Episode> episodes(n);
  std::vector<double> score(n);        // label_sharpness * (w . z_i)
  std::vector<double> label_u(n);      // pre-drawn label uniforms
  const double innovation_sd =
      config.noise_sd * std::sqrt(1.0 - config.ar_coeff * config.ar_coeff);

  for (int i = 0; i < n; ++i) {
    RngStream rng(config.seed, "synth/patient", static_cast<std::uint64_t>(i));
    Episode& ep = episodes[i];
    ep.patient_id = padded_id("p", i);

    // Draw order is fixed: latents, group uniform, label uniform, then series.
    std::vector<double> z(v);
    for (int j = 0; j < v; ++j) z[j] = rng.normal();

    const double group_u = rng.uniform();
    int group_idx = -1;
    double cum = 0.0;
    for (size_t g = 0; g < config.groups.size(); ++g) {
      cum += config.groups[g].prevalence;
      if (group_u < cum) {
        group_idx = static_cast<int>(g);
        break;
      }
    }
    if (group_idx >= 0) ep.groups.push_back(config.groups[group_idx].tag);

    label_u[i] = rng.uniform();
    double s = 0.0;
    for (int j = 0; j < v; ++j) s += label_w[j] * z[j];
    score[i] = config.label_sharpness * s;

    for (int j = 0; j < v; ++j) {
      double mean = base[j] + config.patient_sd * z[j];
      if (group_idx >= 0) {
        mean += config.groups[group_idx].shift_scale * config.patient_sd *
                group_dir[group_idx][j];
      }
      const int span = config.max_obs - config.min_obs + 1;
      const int n_obs = config.min_obs + static_cast<int>(rng.uniform_int(span));
      std::vector<double> times(n_obs);
      for (int k = 0; k < n_obs; ++k) times[k] = 48.0 * rng.uniform();
      std::sort(times.begin(), times.end());
      auto& series = ep.series[padded_id("var", j)];
      series.reserve(n_obs);
      double x = mean + config.noise_sd * rng.normal();  // stationary start
      series.push_back({times[0], x});
      for (int k = 1; k < n_obs; ++k) {
        x = mean + config.ar_coeff * (x - mean) + innovation_sd * rng.normal();
        series.push_back({times[k], x});
      }
    }
  }

  // Labels: patient i dies iff label_u[i] < sigmoid(b + score[i]), i.e. iff
  // b exceeds the per-patient threshold logit(u_i) - score_i. The realized
  // rate is a nondecreasing step function of b; bisect to the target.
  std::vector<double> threshold(n);
  for (int i = 0; i < n; ++i) {
    const double u = std::clamp(label_u[i], 1e-15, 1.0 - 1e-15);
    threshold[i] = std::log(u / (1.0 - u)) - score[i];
  }
  auto rate_at = [&](double b) {
    int deaths = 0;
    for (int i = 0; i < n; ++i) deaths += b > threshold[i] ? 1 : 0;
    return static_cast<double>(deaths) / n;
  };
  double lo = *std::min_element(threshold.begin(), threshold.end()) - 1.0;
  double hi = *std::max_element(threshold.begin(), threshold.end()) + 1.0;
  double best_b = lo;
  double best_gap = std::abs(rate_at(lo) - config.mortality_rate);
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double r = rate_at(mid);
    const double gap = std::abs(r - config.mortality_rate);
    if (gap < best_gap) {
      best_gap = gap;
      best_b = mid;
    }
    if (r < config.mortality_rate) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-13 * std::max(1.0, std::abs(hi))) break;
  }
  for (int i = 0; i < n; ++i) episodes[i].label = best_b > threshold[i] ? 1 : 0;

  return episodes;
}

}  // namespace uqtab
