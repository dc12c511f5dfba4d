#include "amclip/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "amclip/errors.hpp"

namespace amclip {

namespace {

Image downsample(const Image& src) {
  Image dst(src.height / 2, src.width / 2);
  for (int y = 0; y < dst.height; ++y) {
    for (int x = 0; x < dst.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        dst.at(y, x, c) = 0.25 * (src.at(2 * y, 2 * x, c) + src.at(2 * y, 2 * x + 1, c) +
                                  src.at(2 * y + 1, 2 * x, c) + src.at(2 * y + 1, 2 * x + 1, c));
      }
    }
  }
  return dst;
}

struct Vec2 {
  int dx = 0;
  int dy = 0;
};

// Lower is better: cost, then squared magnitude, then dx, then dy.
bool better(double cost, Vec2 d, double best_cost, Vec2 best) {
  if (cost != best_cost) return cost < best_cost;
  const int m = d.dx * d.dx + d.dy * d.dy;
  const int bm = best.dx * best.dx + best.dy * best.dy;
  if (m != bm) return m < bm;
  if (d.dx != best.dx) return d.dx < best.dx;
  return d.dy < best.dy;
}

double block_sad(const Image& a, const Image& b, int y0, int x0, int y1, int x1, Vec2 d) {
  double sad = 0.0;
  for (int y = y0; y < y1; ++y) {
    const int by = std::clamp(y + d.dy, 0, b.height - 1);
    for (int x = x0; x < x1; ++x) {
      const int bx = std::clamp(x + d.dx, 0, b.width - 1);
      const double* pa = &a.data[(static_cast<std::size_t>(y) * a.width + x) * 3];
      const double* pb = &b.data[(static_cast<std::size_t>(by) * b.width + bx) * 3];
      sad += std::abs(pa[0] - pb[0]) + std::abs(pa[1] - pb[1]) + std::abs(pa[2] - pb[2]);
    }
  }
  return sad;
}

// Per-block vectors on one pyramid level.
struct BlockGrid {
  int rows = 0;
  int cols = 0;
  int block = 8;
  std::vector<Vec2> v;

  Vec2 at_pixel(int y, int x) const {
    const int r = std::min(y / block, rows - 1);
    const int c = std::min(x / block, cols - 1);
    return v[static_cast<std::size_t>(r) * cols + c];
  }
};

BlockGrid match_level(const Image& a, const Image& b, const BlockMatchConfig& cfg, const BlockGrid* coarse) {
  BlockGrid grid;
  grid.block = cfg.block;
  grid.rows = (a.height + cfg.block - 1) / cfg.block;
  grid.cols = (a.width + cfg.block - 1) / cfg.block;
  grid.v.resize(static_cast<std::size_t>(grid.rows) * grid.cols);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const int y0 = r * cfg.block, y1 = std::min(y0 + cfg.block, a.height);
      const int x0 = c * cfg.block, x1 = std::min(x0 + cfg.block, a.width);
      Vec2 guess;
      if (coarse != nullptr && coarse->rows > 0) {
        const Vec2 g = coarse->at_pixel(((y0 + y1) / 2) / 2, ((x0 + x1) / 2) / 2);
        guess = {2 * g.dx, 2 * g.dy};
      }
      // Search around the propagated guess and around zero, so a wrong coarse vector cannot
      // push the true small displacement out of reach.
      Vec2 best = guess;
      double best_cost = std::numeric_limits<double>::infinity();
      const Vec2 centers[] = {guess, Vec2{}};
      const int n_centers = guess.dx == 0 && guess.dy == 0 ? 1 : 2;
      for (int k = 0; k < n_centers; ++k) {
        for (int oy = -cfg.radius; oy <= cfg.radius; ++oy) {
          for (int ox = -cfg.radius; ox <= cfg.radius; ++ox) {
            const Vec2 d{centers[k].dx + ox, centers[k].dy + oy};
            const double cost = block_sad(a, b, y0, x0, y1, x1, d);
            if (better(cost, d, best_cost, best)) {
              best_cost = cost;
              best = d;
            }
          }
        }
      }
      grid.v[static_cast<std::size_t>(r) * grid.cols + c] = best;
    }
  }
  return grid;
}

}  // namespace

FlowField compute_flow(const Image& a, const Image& b, const BlockMatchConfig& cfg) {
  if (!a.same_shape(b)) {
    throw ArgumentError("compute_flow: frame dimensions differ (" + std::to_string(a.height) + "x" +
                        std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                        std::to_string(b.width) + ")");
  }
  if (cfg.levels < 1 || cfg.block < 1 || cfg.radius < 0) throw ArgumentError("compute_flow: bad config");
  std::vector<Image> pa{a}, pb{b};
  for (int l = 1; l < cfg.levels; ++l) {
    if (pa.back().height < 2 || pa.back().width < 2) break;
    pa.push_back(downsample(pa.back()));
    pb.push_back(downsample(pb.back()));
  }
  BlockGrid grid;
  for (int l = static_cast<int>(pa.size()) - 1; l >= 0; --l) {
    grid = match_level(pa[l], pb[l], cfg, l + 1 < static_cast<int>(pa.size()) ? &grid : nullptr);
  }
  FlowField flow(a.height, a.width);
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      const Vec2 d = grid.at_pixel(y, x);
      flow.dx(y, x) = static_cast<float>(d.dx);
      flow.dy(y, x) = static_cast<float>(d.dy);
    }
  }
  return flow;
}

std::vector<FlowField> compute_clip_flows(const VideoClip& clip, const BlockMatchConfig& cfg) {
  std::vector<FlowField> flows;
  if (clip.frames.size() < 2) return flows;
  flows.reserve(clip.frames.size() - 1);
  for (std::size_t i = 0; i + 1 < clip.frames.size(); ++i) {
    flows.push_back(compute_flow(clip.frames[i], clip.frames[i + 1], cfg));
  }
  return flows;
}

FlowProvider block_matching_provider(BlockMatchConfig cfg) {
  return [cfg](const VideoClip& clip) { return compute_clip_flows(clip, cfg); };
}

FlowProvider cached_flow_provider(std::filesystem::path cache_dir) {
  return [dir = std::move(cache_dir)](const VideoClip& clip) {
    auto flows = read_flow_cache(clip.clip_id, dir, std::make_pair(clip.height(), clip.width()));
    if (static_cast<int>(flows.size()) != clip.frame_count() - 1) {
      throw ShapeMismatchError("flow cache for '" + clip.clip_id + "' holds " + std::to_string(flows.size()) +
                               " fields, clip needs " + std::to_string(clip.frame_count() - 1));
    }
    return flows;
  };
}

Image flow_to_image(const FlowField& flow, double max_displacement) {
  if (!(max_displacement > 0.0)) throw ArgumentError("flow_to_image: max displacement must be positive");
  const double r = max_displacement;
  const double mag_scale = 1.0 / (r * std::sqrt(2.0));
  Image img(flow.height, flow.width);
  for (int y = 0; y < flow.height; ++y) {
    for (int x = 0; x < flow.width; ++x) {
      const double dx = flow.dx(y, x);
      const double dy = flow.dy(y, x);
      img.at(y, x, 0) = std::clamp((dx + r) / (2.0 * r), 0.0, 1.0);
      img.at(y, x, 1) = std::clamp((dy + r) / (2.0 * r), 0.0, 1.0);
      img.at(y, x, 2) = std::clamp(std::hypot(dx, dy) * mag_scale, 0.0, 1.0);
    }
  }
  return img;
}

FlowField image_to_flow(const Image& image, double max_displacement) {
  const double r = max_displacement;
  FlowField flow(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      flow.dx(y, x) = static_cast<float>(image.at(y, x, 0) * 2.0 * r - r);
      flow.dy(y, x) = static_cast<float>(image.at(y, x, 1) * 2.0 * r - r);
    }
  }
  return flow;
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::RgbFlow:
      return "rgb+flow";
    case Modality::Rgb:
      return "rgb";
    case Modality::Flow:
      return "flow";
  }
  return "?";
}

Modality parse_modality(std::string_view name) {
  if (name == "rgb+flow") return Modality::RgbFlow;
  if (name == "rgb") return Modality::Rgb;
  if (name == "flow") return Modality::Flow;
  throw ConfigError("unknown modality '" + std::string(name) + "'");
}

TokenSequence build_tokens(const VideoClip& clip, std::span<const FlowField> flows, std::span<const int> indices,
                           double max_displacement, Modality modality) {
  const int n = clip.frame_count();
  const bool need_flow = modality != Modality::Rgb;
  if (need_flow && static_cast<int>(flows.size()) != n - 1) {
    throw ArgumentError("interleave: expected " + std::to_string(n - 1) + " flow fields, got " +
                        std::to_string(flows.size()));
  }
  TokenSequence seq;
  seq.tokens.reserve(indices.size() * (modality == Modality::RgbFlow ? 2 : 1));
  int prev = -1;
  for (int t : indices) {
    if (t < 0 || t >= n) throw ArgumentError("interleave: frame index " + std::to_string(t) + " out of range");
    if (t <= prev) throw ArgumentError("interleave: frame indices must be strictly increasing");
    prev = t;
    if (modality != Modality::Flow) seq.tokens.push_back({TokenKind::Frame, clip.frames[t], t});
    if (need_flow) {
      const int f = t < n - 1 ? t : n - 2;
      seq.tokens.push_back({TokenKind::Flow, flow_to_image(flows[f], max_displacement), t});
    }
  }
  return seq;
}

TokenSequence interleave(const VideoClip& clip, std::span<const FlowField> flows, std::span<const int> indices,
                         double max_displacement) {
  return build_tokens(clip, flows, indices, max_displacement, Modality::RgbFlow);
}

}  // namespace amclip
