#include "secci/locator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "secci/types.hpp"

namespace secci {

PredictionMatrix build_prediction_matrix(const ModelCheckpoint& model,
                                         const std::vector<CsiImage>& images) {
  Network net(model);
  return build_prediction_matrix(net, images);
}

PredictionMatrix build_prediction_matrix(Network& net,
                                         const std::vector<CsiImage>& images) {
  if (images.empty())
    throw ConfigError("prediction matrix needs at least one image");
  PredictionMatrix m;
  m.num_sites = net.config().num_classes;
  m.num_images = static_cast<int>(images.size());
  m.p.resize(static_cast<std::size_t>(m.num_sites) * m.num_images);
  for (int j = 0; j < m.num_images; ++j) {
    const std::vector<double> probs = net.predict_probs(images[j]);
    std::copy(probs.begin(), probs.end(),
              m.p.begin() + static_cast<std::size_t>(j) * m.num_sites);
  }
  return m;
}

void validate_prediction_matrix(const PredictionMatrix& p) {
  if (p.num_sites < 1 || p.num_images < 1 ||
      p.p.size() != static_cast<std::size_t>(p.num_sites) * p.num_images)
    throw StructuralError("prediction matrix has an inconsistent shape");
  for (int j = 0; j < p.num_images; ++j) {
    double sum = 0.0;
    for (int i = 0; i < p.num_sites; ++i) {
      const double v = p.at(i, j);
      if (!(v >= 0.0))
        throw StructuralError("prediction matrix entries must be >= 0");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw StructuralError("prediction matrix columns must sum to 1");
  }
}

CandidateMatrix top_h(const PredictionMatrix& p, int h) {
  if (h < 1 || h > p.num_sites)
    throw ConfigError("h must lie in [1, number of locations]");
  CandidateMatrix cand;
  cand.h = h;
  cand.num_images = p.num_images;
  cand.indices.resize(static_cast<std::size_t>(h) * p.num_images);
  std::vector<int> order(p.num_sites);
  for (int j = 0; j < p.num_images; ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double pa = p.at(a, j), pb = p.at(b, j);
      if (pa != pb) return pa > pb;
      return a < b;
    });
    std::copy(order.begin(), order.begin() + h,
              cand.indices.begin() + static_cast<std::size_t>(j) * h);
  }
  return cand;
}

PositionEstimate estimate_position(const PredictionMatrix& p,
                                   const std::vector<SiteInfo>& sites,
                                   const GreedyConfig& cfg) {
  validate_prediction_matrix(p);
  if (static_cast<int>(sites.size()) != p.num_sites)
    throw ConfigError("site list must cover every location index");
  if (cfg.k < 1) throw ConfigError("k must be at least 1");
  const CandidateMatrix cand = top_h(p, cfg.h);

  // Frequency of each location across the whole candidate matrix, and
  // its occurrence probabilities (sorted before summing so the mass is
  // independent of image order).
  std::vector<int> freq(p.num_sites, 0);
  std::vector<std::vector<double>> occ(p.num_sites);
  for (int j = 0; j < cand.num_images; ++j) {
    for (int r = 0; r < cand.h; ++r) {
      const int i = cand.at(r, j);
      ++freq[i];
      occ[i].push_back(p.at(i, j));
    }
  }
  std::vector<double> mass(p.num_sites, 0.0);
  for (int i = 0; i < p.num_sites; ++i) {
    std::sort(occ[i].begin(), occ[i].end());
    for (const double v : occ[i]) mass[i] += v;
  }

  std::vector<int> distinct;
  for (int i = 0; i < p.num_sites; ++i)
    if (freq[i] > 0) distinct.push_back(i);
  std::sort(distinct.begin(), distinct.end(), [&](int a, int b) {
    if (freq[a] != freq[b]) return freq[a] > freq[b];
    if (mass[a] != mass[b]) return mass[a] > mass[b];
    return a < b;
  });

  PositionEstimate est;
  const int used = std::min<int>(cfg.k, static_cast<int>(distinct.size()));
  est.shortfall = cfg.k - used;
  double sx = 0.0, sy = 0.0, wsum = 0.0;
  for (int s = 0; s < used; ++s) {
    const int i = distinct[s];
    est.support.push_back({i, freq[i], mass[i]});
    const double w =
        cfg.weighting == Weighting::uniform ? 1.0 : mass[i] / freq[i];
    sx += w * sites[i].coords[0];
    sy += w * sites[i].coords[1];
    wsum += w;
  }
  est.coords = {sx / wsum, sy / wsum};
  return est;
}

}  // namespace secci
