#pragma once

// Independent reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <vector>

#include "amclip/corpus.hpp"

namespace amclip::oracle {

/// Exhaustive full-resolution block matching: every displacement in [-radius, radius]^2 is tried
/// for every block; SAD cost; ties by smallest |d|^2, then dx, then dy.
inline FlowField exhaustive_block_matching(const Image& a, const Image& b, int block, int radius) {
  FlowField out(a.height, a.width);
  auto sample = [&](int y, int x, int c) {
    return b.at(std::clamp(y, 0, b.height - 1), std::clamp(x, 0, b.width - 1), c);
  };
  for (int by = 0; by < a.height; by += block) {
    for (int bx = 0; bx < a.width; bx += block) {
      double best = std::numeric_limits<double>::infinity();
      int best_dx = 0, best_dy = 0;
      for (int dx = -radius; dx <= radius; ++dx) {
        for (int dy = -radius; dy <= radius; ++dy) {
          double cost = 0.0;
          for (int y = by; y < std::min(by + block, a.height); ++y)
            for (int x = bx; x < std::min(bx + block, a.width); ++x)
              for (int c = 0; c < 3; ++c) cost += std::abs(a.at(y, x, c) - sample(y + dy, x + dx, c));
          const int mag = dx * dx + dy * dy;
          const int best_mag = best_dx * best_dx + best_dy * best_dy;
          const bool take = cost < best ||
                            (cost == best && (mag < best_mag || (mag == best_mag && (dx < best_dx ||
                                                                                     (dx == best_dx && dy < best_dy)))));
          if (take) {
            best = cost;
            best_dx = dx;
            best_dy = dy;
          }
        }
      }
      for (int y = by; y < std::min(by + block, a.height); ++y)
        for (int x = bx; x < std::min(bx + block, a.width); ++x) {
          out.dx(y, x) = static_cast<float>(best_dx);
          out.dy(y, x) = static_cast<float>(best_dy);
        }
    }
  }
  return out;
}

/// Pair (a, b) of noise-textured images where b is a translated by (dx, dy): b(y, x) = a(y - dy, x - dx).
inline std::pair<Image, Image> shifted_pair(int h, int w, int dx, int dy, std::mt19937_64& rng) {
  const int m = 8;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image canvas(h + 2 * m, w + 2 * m);
  for (auto& v : canvas.data) v = u(rng);
  Image a(h, w), b(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        a.at(y, x, c) = canvas.at(y + m, x + m, c);
        b.at(y, x, c) = canvas.at(y + m - dy, x + m - dx, c);
      }
  return {a, b};
}

/// Mean absolute component error against a constant displacement, excluding a border.
inline double interior_error(const FlowField& f, double dx, double dy, int border) {
  double err = 0.0;
  int n = 0;
  for (int y = border; y < f.height - border; ++y)
    for (int x = border; x < f.width - border; ++x) {
      err += std::abs(f.dx(y, x) - dx) + std::abs(f.dy(y, x) - dy);
      n += 2;
    }
  return n ? err / n : 0.0;
}

/// Mean absolute component difference between two fields, excluding a border.
inline double interior_difference(const FlowField& a, const FlowField& b, int border) {
  double err = 0.0;
  int n = 0;
  for (int y = border; y < a.height - border; ++y)
    for (int x = border; x < a.width - border; ++x) {
      err += std::abs(a.dx(y, x) - b.dx(y, x)) + std::abs(a.dy(y, x) - b.dy(y, x));
      n += 2;
    }
  return n ? err / n : 0.0;
}

/// AP as a rank-threshold sum evaluated term by term: for every rank threshold n (1..K), count true positives in
/// the top n directly, then sum (R_n - R_{n-1}) * P_n. Ranking: descending score, ties by clip index.
inline double brute_force_ap(const std::vector<double>& scores, const std::vector<int>& labels) {
  const int k = static_cast<int>(scores.size());
  int positives = 0;
  for (int y : labels) positives += y;
  // rank_of[i] = number of clips that outrank clip i.
  std::vector<int> rank_of(k, 0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) ++rank_of[i];
  double ap = 0.0;
  double prev_recall = 0.0;
  for (int n = 1; n <= k; ++n) {
    int tp = 0;
    for (int i = 0; i < k; ++i)
      if (rank_of[i] < n && labels[i]) ++tp;
    const double recall = static_cast<double>(tp) / positives;
    const double precision = static_cast<double>(tp) / n;
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

}  // namespace amclip::oracle
