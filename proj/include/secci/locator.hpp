#pragma once

#include <array>
#include <string>
#include <vector>

#include "secci/imaging.hpp"
#include "secci/network.hpp"

namespace secci {

// L-by-N matrix of class probabilities: entry (i, j) is the network's
// probability that test image j was taken at training location i.
// Columns are stored contiguously (one per image).
struct PredictionMatrix {
  int num_sites = 0;   // L
  int num_images = 0;  // N
  std::vector<double> p;

  double at(int site, int image) const {
    return p[static_cast<std::size_t>(image) * num_sites + site];
  }
  double& at(int site, int image) {
    return p[static_cast<std::size_t>(image) * num_sites + site];
  }
};

// H-by-N matrix of location indices: column j holds the indices of the
// h largest probabilities of prediction column j, in descending
// probability order (ties broken toward the lower index).
struct CandidateMatrix {
  int h = 0;
  int num_images = 0;
  std::vector<int> indices;

  int at(int rank, int image) const {
    return indices[static_cast<std::size_t>(image) * h + rank];
  }
  int& at(int rank, int image) {
    return indices[static_cast<std::size_t>(image) * h + rank];
  }
};

enum class Weighting { uniform, probability };

struct GreedyConfig {
  int h = 5;
  int k = 5;
  Weighting weighting = Weighting::uniform;
};

// One selected location index with its candidate-occurrence count and
// accumulated probability mass.
struct SupportEntry {
  int site_index = 0;
  int frequency = 0;
  double probability_mass = 0.0;
};

struct PositionEstimate {
  std::array<double, 2> coords{0.0, 0.0};
  // Selected indices in selection order (most frequent first).
  std::vector<SupportEntry> support;
  // How many of the requested k could not be filled because fewer
  // distinct candidates appeared.
  int shortfall = 0;
};

// Runs the model over every image and assembles the prediction matrix;
// column j equals the model's probability vector for images[j]. The
// checkpoint form loads a fresh network; loops over many image sets
// should construct the Network once and use the second form.
PredictionMatrix build_prediction_matrix(const ModelCheckpoint& model,
                                         const std::vector<CsiImage>& images);
PredictionMatrix build_prediction_matrix(Network& net,
                                         const std::vector<CsiImage>& images);

// Throws StructuralError unless every entry is non-negative and every
// column sums to 1 within 1e-6.
void validate_prediction_matrix(const PredictionMatrix& p);

// Indices of the h largest entries per column, descending by
// probability, ties broken by lower index. h must lie in [1, L].
CandidateMatrix top_h(const PredictionMatrix& p, int h);

// Greedy position estimate: take the h most probable locations per
// image, count how often each location appears across the whole
// candidate matrix, keep the k most frequent (ties: larger accumulated
// probability mass over the location's candidate occurrences, then
// lower index), and average the kept locations' coordinates. With
// probability weighting, each kept location is weighted by its mean
// occurrence probability instead of uniformly.
//
// Probability masses are accumulated in ascending value order, so the
// estimate is exactly invariant under any permutation of the images.
// If fewer than k distinct locations appear, all of them are used and
// the shortfall is recorded.
PositionEstimate estimate_position(const PredictionMatrix& p,
                                   const std::vector<SiteInfo>& sites,
                                   const GreedyConfig& cfg);

}  // namespace secci
