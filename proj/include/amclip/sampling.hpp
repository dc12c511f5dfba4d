#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace amclip {

/// Half-open frame range [start, end).
struct Window {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool contains(int i) const { return i >= start && i < end; }
  friend bool operator==(const Window&, const Window&) = default;
};

enum class Scheme { Dense, SemiDense, Sparse };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view name);

struct SamplingPlan {
  int classifier_index = 0;
  Scheme scheme = Scheme::Dense;
  std::optional<Window> main_window;  // absent for sparse
  std::vector<int> frame_indices;
  std::uint64_t seed = 0;
};

/// M contiguous, disjoint windows covering [0, n); the first n % m are one frame longer.
std::vector<Window> partition_main_windows(int n, int m);

/// Evenly spaced draw: start + floor(k * len / count).
std::vector<int> sample_dense(Window window, int frames);

/// ceil(P/2) from the main window, floor(P/2) from its complement, merged ascending.
std::vector<int> sample_semidense(Window main, int n, int frames);

/// One uniformly drawn index per quasi-equal stratum, keyed by (seed, classifier_index, stratum).
std::vector<int> sample_sparse(int n, int frames, std::uint64_t seed, int classifier_index);

std::vector<SamplingPlan> build_plans(int n, int m, Scheme scheme, int frames, std::uint64_t seed);

/// Counter-based generator: a stateless 64-bit mix of (seed, stream, counter).
std::uint64_t keyed_random(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

}  // namespace amclip
