#include "amclip/sampling.hpp"

#include <algorithm>

#include "amclip/errors.hpp"

namespace amclip {

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::Dense:
      return "dense";
    case Scheme::SemiDense:
      return "semi-dense";
    case Scheme::Sparse:
      return "sparse";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "dense") return Scheme::Dense;
  if (name == "semi-dense" || name == "semidense") return Scheme::SemiDense;
  if (name == "sparse") return Scheme::Sparse;
  throw ConfigError("unknown sampling scheme '" + std::string(name) + "'");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform integer in [0, bound) by rejection over successive counters.
int keyed_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter, int bound) {
  const std::uint64_t b = static_cast<std::uint64_t>(bound);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % b;
  for (std::uint64_t attempt = 0;; ++attempt) {
    const std::uint64_t r = keyed_random(seed, stream, (counter << 8) + attempt);
    if (r < limit) return static_cast<int>(r % b);
  }
}

}  // namespace

std::uint64_t keyed_random(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter);
}

std::vector<Window> partition_main_windows(int n, int m) {
  if (m < 1 || m > n) {
    throw ArgumentError("partition_main_windows: need 1 <= M <= N, got N=" + std::to_string(n) +
                        ", M=" + std::to_string(m));
  }
  std::vector<Window> windows;
  windows.reserve(m);
  const int base = n / m;
  const int extra = n % m;
  int start = 0;
  for (int i = 0; i < m; ++i) {
    const int len = base + (i < extra ? 1 : 0);
    windows.push_back({start, start + len});
    start += len;
  }
  return windows;
}

std::vector<int> sample_dense(Window window, int frames) {
  const int len = window.length();
  if (frames < 0 || frames > len) {
    throw InfeasiblePlanError("cannot draw " + std::to_string(frames) + " frames from window [" +
                              std::to_string(window.start) + "," + std::to_string(window.end) + ")");
  }
  std::vector<int> out(frames);
  for (int k = 0; k < frames; ++k) {
    out[k] = window.start + static_cast<int>(static_cast<long long>(k) * len / frames);
  }
  return out;
}

std::vector<int> sample_semidense(Window main, int n, int frames) {
  if (main.start < 0 || main.end > n || main.start >= main.end) {
    throw ArgumentError("semi-dense: main window outside [0, N)");
  }
  const int in_main = (frames + 1) / 2;
  const int in_context = frames / 2;
  const int context_len = n - main.length();
  if (in_main > main.length() || in_context > context_len) {
    throw InfeasiblePlanError("semi-dense: budget " + std::to_string(frames) + " infeasible for main window [" +
                              std::to_string(main.start) + "," + std::to_string(main.end) + ") of N=" +
                              std::to_string(n));
  }
  std::vector<int> out = sample_dense(main, in_main);
  // Complement frames in ascending order, addressed through a virtual concatenation.
  for (int pos : sample_dense({0, context_len}, in_context)) {
    out.push_back(pos < main.start ? pos : pos + main.length());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> sample_sparse(int n, int frames, std::uint64_t seed, int classifier_index) {
  if (frames < 1 || frames > n) {
    throw InfeasiblePlanError("sparse: cannot draw " + std::to_string(frames) + " frames from N=" +
                              std::to_string(n));
  }
  std::vector<int> out;
  out.reserve(frames);
  const auto strata = partition_main_windows(n, frames);
  for (std::size_t s = 0; s < strata.size(); ++s) {
    const int offset = keyed_uniform(seed, static_cast<std::uint64_t>(classifier_index), s, strata[s].length());
    out.push_back(strata[s].start + offset);
  }
  return out;
}

std::vector<SamplingPlan> build_plans(int n, int m, Scheme scheme, int frames, std::uint64_t seed) {
  if (frames < 1) throw InfeasiblePlanError("frame budget must be positive");
  std::vector<SamplingPlan> plans;
  plans.reserve(m);
  if (scheme == Scheme::Sparse) {
    if (m < 1) throw ArgumentError("classifier count must be positive");
    for (int i = 0; i < m; ++i) {
      plans.push_back({i, scheme, std::nullopt, sample_sparse(n, frames, seed, i), seed});
    }
    return plans;
  }
  const auto windows = partition_main_windows(n, m);
  for (int i = 0; i < m; ++i) {
    auto idx = scheme == Scheme::Dense ? sample_dense(windows[i], frames)
                                       : sample_semidense(windows[i], n, frames);
    plans.push_back({i, scheme, windows[i], std::move(idx), seed});
  }
  return plans;
}

}  // namespace amclip
