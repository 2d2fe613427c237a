#pragma once

#include "secci/types.hpp"

namespace secci {

// Polar decomposition of one channel sample. A zero sample yields
// amplitude 0 and phase 0. The phase is the principal value in (-pi, pi].
struct PolarSample {
  double amplitude;
  double phase;
};
PolarSample amplitude_phase(const ComplexSample& s);

// (phi_a - phi_b) reduced modulo 2*pi into (-pi, pi].
double wrap_phase_difference(double phi_a, double phi_b);

// Angle of arrival from an inter-antenna phase difference:
// theta = arccos(delta_phi * lambda / (2*pi*d)), argument clamped to
// [-1, 1] so noise-driven out-of-range values stay defined. Result in
// [0, pi].
double estimate_aoa(double delta_phi, const AntennaGeometry& geom);

double average_amplitude(double amp_a, double amp_b);

// Per-packet diversified features over antenna pairs (1,2), (1,3), (2,3)
// with subcarriers ascending within each pair. The pair phase difference
// is phase(higher antenna) - phase(lower antenna), the convention under
// which a wavefront arriving at angle theta yields
// delta_phi = 2*pi*d*cos(theta)/lambda between adjacent antennas.
FeatureVector extract_features(const CsiPacket& pkt,
                               const AntennaGeometry& geom);

}  // namespace secci
