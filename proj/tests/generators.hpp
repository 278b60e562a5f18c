#pragma once

#include <cmath>
#include <random>

#include "gbdlab/field.hpp"

namespace gen {

using gbd::Vec;
using gbd::Mat;

inline double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

inline Vec vec(std::mt19937_64& rng, int d, double a, double b) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = uniform(rng, a, b);
  return v;
}

inline Vec unit(std::mt19937_64& rng, int d) {
  for (;;) {
    Vec v = vec(rng, d, -1, 1);
    if (v.norm() > 0.1 && v.norm() <= 1) return v / v.norm();
  }
}

inline gbd::RigidMotion rigid(std::mt19937_64& rng, int d, double scale = 1) {
  Mat W = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      W(i, j) = uniform(rng, -scale, scale);
      W(j, i) = -W(i, j);
    }
  return gbd::RigidMotion(W, vec(rng, d, -scale, scale));
}

/// Smooth field: affine part plus a few sine modes.
struct SmoothField {
  Mat A;
  Vec b;
  std::vector<Vec> freq;
  std::vector<Vec> amp;
  std::vector<double> phase;

  Vec operator()(const Vec& x) const {
    Vec v = A * x + b;
    for (std::size_t m = 0; m < freq.size(); ++m) v += amp[m] * std::sin(freq[m].dot(x) + phase[m]);
    return v;
  }
};

inline SmoothField smooth(std::mt19937_64& rng, int d, double amplitude = 0.1, int modes = 3) {
  SmoothField f;
  f.A = Mat(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) f.A(i, j) = uniform(rng, -amplitude, amplitude);
  f.b = vec(rng, d, -amplitude, amplitude);
  for (int m = 0; m < modes; ++m) {
    f.freq.push_back(vec(rng, d, -2 * M_PI, 2 * M_PI));
    f.amp.push_back(vec(rng, d, -amplitude, amplitude) / (m + 1));
    f.phase.push_back(uniform(rng, 0, 2 * M_PI));
  }
  return f;
}

/// Facet spanning the whole box on a lattice plane of the given axis.
inline gbd::JumpFacet full_facet(const gbd::Domain& dom, int axis, double position, const Vec& jump) {
  Vec lo = dom.lo(), hi = dom.hi();
  lo[axis] = hi[axis] = position;
  return gbd::JumpFacet::axis_aligned(axis, position, lo, hi, jump);
}

}  // namespace gen
