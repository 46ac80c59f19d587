#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "perc/lattice.hpp"

namespace perc {

// SplitMix64 finalizer; the building block of every derived seed and weight.
inline std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t pack_pair(Coord a, Coord b) noexcept {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

// Seed for Monte Carlo sample i of a run: results are then independent of how
// samples are scheduled across workers.
inline std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t sample_index) noexcept {
  return seed ^ mix64(sample_index);
}

// Stream id for the sprinkle configuration attached to renormalised site x.
inline std::uint64_t sprinkle_stream(int x0, int x1) noexcept {
  return mix64(0x73707278ull ^ pack_pair(x0, x1));
}

// The grand coupling: a counter-based hash assigns every canonical edge a
// deterministic uniform weight in [0,1). Distinct streams give independent
// weight fields; nothing is stored, so lattices are lazily infinite and
// concurrent reads need no synchronisation.
struct EdgeWeights {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  double weight(const Edge& e) const noexcept {
    std::uint64_t h = mix64(seed ^ 0x70657263ull);
    h = mix64(h ^ stream);
    h = mix64(h ^ pack_pair(e.base.c[0], e.base.c[1]));
    h = mix64(h ^ pack_pair(e.base.c[2], e.base.c[3]));
    h = mix64(h ^ pack_pair(e.base.c[4], e.base.c[5]));
    h = mix64(h ^ static_cast<std::uint64_t>(e.axis));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  }

  bool operator==(const EdgeWeights&) const = default;
};

// A Bernoulli configuration at parameter p: edge open iff weight(e) < p, so
// open sets are nested pathwise in p. An optional overlay forces the state of
// a handful of edges (the omega^e / omega_e constructions).
class Config {
 public:
  Config() = default;
  Config(EdgeWeights w, double p) : weights_(w), p_(p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("p must be in [0,1]");
  }

  double p() const { return p_; }
  const EdgeWeights& weights() const { return weights_; }
  const std::vector<std::pair<Edge, bool>>& forced() const { return forced_; }

  bool open(const Edge& e) const noexcept {
    for (const auto& f : forced_)
      if (f.first == e) return f.second;
    return weights_.weight(e) < p_;
  }

  // Overlay view with edge e forced to the given state; *this is unchanged.
  Config with_edge(const Edge& e, bool open_state) const {
    Config c = *this;
    for (auto& f : c.forced_)
      if (f.first == e) {
        f.second = open_state;
        return c;
      }
    c.forced_.emplace_back(e, open_state);
    return c;
  }

  Config with_p(double p) const {
    Config c = *this;
    c.p_ = p;
    return c;
  }

 private:
  EdgeWeights weights_{};
  double p_ = 0.0;
  std::vector<std::pair<Edge, bool>> forced_;
};

struct Sprinkle {
  Region region;
  Config config;
};

// omega_total = base v (v_x sprinkles): an edge is open iff it is open in the
// base or in any sprinkle whose region contains both endpoints.
class SprinkledConfig {
 public:
  SprinkledConfig(Config base, std::vector<Sprinkle> sprinkles)
      : base_(std::move(base)), sprinkles_(std::move(sprinkles)) {
    for (std::size_t i = 0; i < sprinkles_.size(); ++i) {
      if (sprinkles_[i].config.weights().stream == base_.weights().stream &&
          sprinkles_[i].config.weights().seed == base_.weights().seed)
        throw std::invalid_argument("sprinkle shares the base weight stream");
      for (std::size_t j = i + 1; j < sprinkles_.size(); ++j)
        if (sprinkles_[i].config.weights() == sprinkles_[j].config.weights())
          throw std::invalid_argument("duplicate sprinkle weight stream");
    }
  }

  const Config& base() const { return base_; }
  const std::vector<Sprinkle>& sprinkles() const { return sprinkles_; }

  bool open(const Edge& e) const {
    if (base_.open(e)) return true;
    for (const auto& s : sprinkles_)
      if (s.region.contains(e.base) && s.region.contains(e.other()) && s.config.open(e))
        return true;
    return false;
  }

 private:
  Config base_;
  std::vector<Sprinkle> sprinkles_;
};

inline bool is_open(const EdgeWeights& w, const Edge& e, double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("p must be in [0,1]");
  return w.weight(e) < p;
}

inline Config flip_edge(const Config& config, const Edge& e, bool open_state) {
  return config.with_edge(e, open_state);
}

inline SprinkledConfig sprinkle_union(Config base, std::vector<Sprinkle> extras) {
  return SprinkledConfig(std::move(base), std::move(extras));
}

}  // namespace perc
