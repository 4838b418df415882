#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "sge/graph.hpp"
#include "sge/rng.hpp"

namespace sge {

struct InfluenceConfig {
  int depth = 1;
  std::uint64_t seed = 0;
};

// Outcome of one cascade. rounds[r] holds the vertices first activated in
// round r + 1, each sorted ascending; influenced is their sorted union and
// never contains the source.
struct InfluenceResult {
  std::vector<VertexId> influenced;
  std::vector<std::vector<VertexId>> rounds;
  std::uint64_t seed = 0;
};

// Derives the per-arrival cascade seed from the global one.
inline std::uint64_t arrival_seed(std::uint64_t global_seed, VertexId vertex) {
  return mix_seed(global_seed, 0x1FF0E5CADE000000ULL +
                                   static_cast<std::uint64_t>(
                                       static_cast<std::uint32_t>(vertex)));
}

// Activation probability of a target: one over its degree in the current
// graph, the weighted-cascade weighting.
inline double influence_probability(const DynGraph& graph, VertexId target) {
  const VertexId d = graph.degree(target);
  if (d == 0)
    throw std::invalid_argument("isolated vertex cannot be a cascade target");
  return 1.0 / static_cast<double>(d);
}

namespace detail {

// One cascade round. Frontier vertices attempt, in ascending id order, each
// currently uninfluenced neighbor with probability 1/degree(target). A
// success activates the target immediately; a failure does not immunize it,
// so a later attacker in the same round gets its own draw.
inline std::vector<VertexId> cascade_round(
    const DynGraph& graph, const std::vector<VertexId>& frontier,
    std::unordered_set<VertexId>& influenced, Rng& rng) {
  std::vector<VertexId> activated;
  for (const VertexId v : frontier) {
    for (const VertexId u : graph.neighbors(v)) {
      if (influenced.contains(u)) continue;
      if (rng.bernoulli(1.0 / static_cast<double>(graph.degree(u)))) {
        influenced.insert(u);
        activated.push_back(u);
      }
    }
  }
  std::sort(activated.begin(), activated.end());
  return activated;
}

inline void finalize_influenced(InfluenceResult& result) {
  for (const auto& round : result.rounds)
    result.influenced.insert(result.influenced.end(), round.begin(),
                             round.end());
  std::sort(result.influenced.begin(), result.influenced.end());
}

}  // namespace detail

// Weighted independent-cascade sample rooted at source, spreading for at
// most cfg.depth rounds. Deterministic given (graph, source, cfg.seed); runs
// with the same seed and increasing depth share the draw sequence of their
// common rounds, so the influenced set grows monotonically with depth.
inline InfluenceResult influenced_set(const DynGraph& graph, VertexId source,
                                      const InfluenceConfig& cfg) {
  if (source < 0 || source >= graph.vertex_count())
    throw std::invalid_argument("cascade source out of range");
  if (cfg.depth < 1) throw std::invalid_argument("cascade depth must be >= 1");

  InfluenceResult result;
  result.seed = cfg.seed;
  Rng rng(cfg.seed);
  std::unordered_set<VertexId> influenced{source};
  std::vector<VertexId> frontier{source};
  for (int r = 0; r < cfg.depth && !frontier.empty(); ++r) {
    std::vector<VertexId> activated =
        detail::cascade_round(graph, frontier, influenced, rng);
    if (activated.empty()) break;
    result.rounds.push_back(activated);
    frontier = std::move(activated);
  }
  detail::finalize_influenced(result);
  return result;
}

// Per-source store of past cascade results, indexed by the source vertex.
class InfluenceCache {
 public:
  bool has(VertexId source) const {
    return source >= 0 &&
           static_cast<std::size_t>(source) < entries_.size() &&
           entries_[static_cast<std::size_t>(source)].has_value();
  }

  const InfluenceResult& get(VertexId source) const {
    return *entries_[static_cast<std::size_t>(source)];
  }

  void store(VertexId source, InfluenceResult result) {
    if (source < 0) throw std::invalid_argument("negative cache key");
    if (static_cast<std::size_t>(source) >= entries_.size())
      entries_.resize(static_cast<std::size_t>(source) + 1);
    entries_[static_cast<std::size_t>(source)] = std::move(result);
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::optional<InfluenceResult>> entries_;
};

// Cascade sample that reuses cached downstream spread. Round 1 draws exactly
// as influenced_set does. A directly activated neighbor with a cache entry
// contributes its stored rounds, truncated to the remaining depth, instead
// of fresh simulation; neighbors without an entry continue by direct
// simulation. Cached contributions are merged after the simulated
// activations of each round, in ascending order of the round-1 neighbor,
// first activation winning. With an empty cache the result is byte-identical
// to influenced_set under the same seed; with cache hits it is an
// approximation of the cascade distribution, since stored spread was drawn
// on an older graph.
inline InfluenceResult incremental_influenced_set(const InfluenceCache& cache,
                                                  const DynGraph& graph,
                                                  VertexId source,
                                                  const InfluenceConfig& cfg) {
  if (source < 0 || source >= graph.vertex_count())
    throw std::invalid_argument("cascade source out of range");
  if (cfg.depth < 1) throw std::invalid_argument("cascade depth must be >= 1");

  InfluenceResult result;
  result.seed = cfg.seed;
  Rng rng(cfg.seed);
  std::unordered_set<VertexId> influenced{source};

  const std::vector<VertexId> first_round =
      detail::cascade_round(graph, {source}, influenced, rng);
  if (first_round.empty()) return result;
  result.rounds.push_back(first_round);

  std::vector<VertexId> simulated_frontier;
  std::vector<VertexId> cached_neighbors;
  for (const VertexId u : first_round)
    (cache.has(u) ? cached_neighbors : simulated_frontier).push_back(u);

  for (int r = 2; r <= cfg.depth; ++r) {
    std::vector<VertexId> round = detail::cascade_round(
        graph, simulated_frontier, influenced, rng);
    simulated_frontier = round;
    for (const VertexId u : cached_neighbors) {
      const auto& stored = cache.get(u).rounds;
      const std::size_t offset = static_cast<std::size_t>(r - 2);
      if (offset >= stored.size()) continue;
      for (const VertexId w : stored[offset]) {
        if (w == source || influenced.contains(w)) continue;
        influenced.insert(w);
        round.push_back(w);
      }
    }
    if (round.empty()) break;
    std::sort(round.begin(), round.end());
    result.rounds.push_back(std::move(round));
  }
  detail::finalize_influenced(result);
  return result;
}

}  // namespace sge
