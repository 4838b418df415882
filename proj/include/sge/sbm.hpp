#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sge/graph.hpp"
#include "sge/rng.hpp"

namespace sge {

struct SbmSpec {
  std::vector<VertexId> block_sizes;
  double intra = 0;
  double inter = 0;
  std::uint64_t seed = 0;
};

struct SbmGraph {
  VertexId vertex_count = 0;
  std::vector<std::pair<VertexId, VertexId>> edges;
  std::vector<int> labels;
};

// Planted-partition sampler. Blocks are assigned round-robin along the
// vertex ids, so replaying the graph as an arrival stream interleaves the
// communities instead of revealing them one after another. Every unordered
// pair is drawn independently, deterministically per seed.
inline SbmGraph generate_sbm(const SbmSpec& spec) {
  if (spec.block_sizes.empty())
    throw std::invalid_argument("at least one block required");
  for (const VertexId size : spec.block_sizes)
    if (size < 1) throw std::invalid_argument("block sizes must be positive");
  if (spec.intra < 0 || spec.intra > 1 || spec.inter < 0 || spec.inter > 1)
    throw std::invalid_argument("probabilities must lie in [0, 1]");

  SbmGraph graph;
  graph.vertex_count = std::accumulate(spec.block_sizes.begin(),
                                       spec.block_sizes.end(), VertexId(0));
  graph.labels.reserve(static_cast<std::size_t>(graph.vertex_count));

  std::vector<VertexId> remaining = spec.block_sizes;
  int block = 0;
  const int blocks = static_cast<int>(spec.block_sizes.size());
  while (static_cast<VertexId>(graph.labels.size()) < graph.vertex_count) {
    if (remaining[static_cast<std::size_t>(block)] > 0) {
      graph.labels.push_back(block);
      --remaining[static_cast<std::size_t>(block)];
    }
    block = (block + 1) % blocks;
  }

  Rng rng(spec.seed);
  for (VertexId v = 1; v < graph.vertex_count; ++v)
    for (VertexId u = 0; u < v; ++u) {
      const double p = graph.labels[static_cast<std::size_t>(u)] ==
                               graph.labels[static_cast<std::size_t>(v)]
                           ? spec.intra
                           : spec.inter;
      if (rng.bernoulli(p)) graph.edges.emplace_back(u, v);
    }
  return graph;
}

}  // namespace sge
