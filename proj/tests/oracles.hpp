#pragma once

// Brute-force references computed from raw data, independent of the library's
// slice extraction.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gbdlab/field.hpp"
#include "gbdlab/slicing.hpp"
#include "generators.hpp"

namespace oracle {

using gbd::Vec;

/// One row of n cells on [0,1] x [0,1/n]; the second component is zero.
/// facet[i] marks the face between cells i and i+1.
struct Row1D {
  int n = 0;
  std::vector<double> v;
  std::vector<bool> facet;

  double h() const { return 1.0 / n; }

  gbd::DisplacementField field() const {
    const double hh = h();
    Vec lo(2), hi(2);
    lo << 0, 0;
    hi << 1, hh;
    const gbd::Domain dom(2, lo, hi, hh);
    std::vector<double> values(static_cast<std::size_t>(2 * n), 0.0);
    std::vector<gbd::JumpFacet> facets;
    for (int i = 0; i < n; ++i) values[static_cast<std::size_t>(2 * i)] = v[static_cast<std::size_t>(i)];
    for (int i = 0; i + 1 < n; ++i) {
      if (!facet[static_cast<std::size_t>(i)]) continue;
      Vec flo(2), fhi(2), jump(2);
      flo << (i + 1) * hh, 0;
      fhi << (i + 1) * hh, hh;
      jump << v[static_cast<std::size_t>(i + 1)] - v[static_cast<std::size_t>(i)], 0;
      facets.push_back(gbd::JumpFacet::axis_aligned(0, (i + 1) * hh, flo, fhi, jump));
    }
    return gbd::DisplacementField(dom, std::move(values), std::move(facets));
  }

  /// Linear pieces (a, b, slope) of the interpolant: linear between centers of
  /// one facet-free run, linear extrapolation on boundary half cells, constant
  /// on half cells next to a facet.
  struct Piece {
    double a, b, slope;
  };
  std::vector<Piece> pieces() const {
    const double hh = h();
    std::vector<Piece> out;
    auto center = [&](int i) { return (i + 0.5) * hh; };
    int start = 0;
    for (int i = 0; i < n; ++i) {
      const bool run_end = i + 1 == n || facet[static_cast<std::size_t>(i)];
      if (!run_end) continue;
      const int s = start, e = i;
      if (e > s) {
        const auto slope = [&](int k) {
          return (v[static_cast<std::size_t>(k + 1)] - v[static_cast<std::size_t>(k)]) / hh;
        };
        out.push_back({s * hh, center(s), s == 0 ? slope(s) : 0.0});
        for (int k = s; k < e; ++k) out.push_back({center(k), center(k + 1), slope(k)});
        out.push_back({center(e), (e + 1) * hh, e == n - 1 ? slope(e - 1) : 0.0});
      }
      start = i + 1;
    }
    return out;
  }

  std::vector<std::pair<double, double>> jumps() const {  // (t, amplitude)
    std::vector<std::pair<double, double>> out;
    for (int i = 0; i + 1 < n; ++i)
      if (facet[static_cast<std::size_t>(i)])
        out.emplace_back((i + 1) * h(), v[static_cast<std::size_t>(i + 1)] - v[static_cast<std::size_t>(i)]);
    return out;
  }

  double mu_hat(const std::vector<gbd::Interval>& B) const {
    double total = 0;
    for (const auto& p : pieces())
      for (const auto& iv : B) total += std::abs(p.slope) * std::max(0.0, std::min(p.b, iv.b) - std::max(p.a, iv.a));
    for (const auto& [t, amp] : jumps())
      for (const auto& iv : B)
        if (t >= iv.a && t <= iv.b) total += std::min(std::abs(amp), 1.0);
    return total;
  }

  double i_sigma(double sigma) const {
    double total = 0;
    for (const auto& p : pieces()) total += std::abs(p.slope) * (p.b - p.a);
    for (const auto& [t, amp] : jumps())
      if (std::abs(amp) < sigma) total += std::abs(amp);
    return total;
  }
};

inline Row1D random_row(std::mt19937_64& rng, int max_cells) {
  Row1D r;
  r.n = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_cells - 1));
  r.facet.assign(static_cast<std::size_t>(r.n), false);
  double x = gen::uniform(rng, -1, 1);
  for (int i = 0; i < r.n; ++i) {
    r.v.push_back(x);
    if (i + 1 < r.n && gen::uniform(rng, 0, 1) < 0.25) {
      r.facet[static_cast<std::size_t>(i)] = true;
      x += gen::uniform(rng, 0, 1) < 0.5 ? gen::uniform(rng, -0.9, 0.9) : gen::uniform(rng, -4, 4);
    } else {
      x += gen::uniform(rng, -0.2, 0.2);
    }
  }
  return r;
}

}  // namespace oracle

namespace oracle {

/// Fraction of cells whose labels agree after the best relabeling of `found`
/// (exhaustive over permutations; label counts up to 6).
inline double best_label_agreement(const std::vector<int>& truth, const std::vector<int>& found) {
  int nt = 0, nf = 0;
  for (int l : truth) nt = std::max(nt, l);
  for (int l : found) nf = std::max(nf, l);
  const int n = std::max(nt, nf);
  std::vector<std::vector<std::size_t>> overlap(static_cast<std::size_t>(n + 1),
                                                std::vector<std::size_t>(static_cast<std::size_t>(n + 1), 0));
  for (std::size_t c = 0; c < truth.size(); ++c)
    ++overlap[static_cast<std::size_t>(found[c])][static_cast<std::size_t>(truth[c])];
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i + 1;
  std::size_t best = 0;
  do {
    std::size_t agree = 0;
    for (int f = 1; f <= n; ++f) agree += overlap[static_cast<std::size_t>(f)][static_cast<std::size_t>(perm[static_cast<std::size_t>(f - 1)])];
    best = std::max(best, agree);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

}  // namespace oracle
