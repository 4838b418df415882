#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sge {

using VertexId = std::int32_t;

// One streaming arrival: a new vertex together with its back-edges. Ids are
// dense and follow arrival order, so every endpoint is strictly smaller than
// the arriving vertex.
struct ArrivalEvent {
  VertexId vertex = 0;
  std::vector<VertexId> edges;
};

// Multi-vertex arrival. Edges may connect two batch vertices or a batch
// vertex with an existing one.
struct BatchArrival {
  std::vector<VertexId> vertices;
  std::vector<std::pair<VertexId, VertexId>> edges;
};

class GraphError : public std::invalid_argument {
 public:
  enum class Kind {
    NonContiguousId,
    ForwardEndpoint,
    SelfLoop,
    DuplicateEdge,
    UnattachableEdge,
    OutOfRange,
  };

  GraphError(Kind kind, const std::string& what)
      : std::invalid_argument(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Undirected simple graph that only ever grows by vertex arrivals.
// Neighbor lists are kept sorted ascending.
class DynGraph {
 public:
  VertexId vertex_count() const { return static_cast<VertexId>(adjacency_.size()); }
  std::int64_t edge_count() const { return edge_count_; }

  VertexId degree(VertexId v) const {
    check_vertex(v);
    return static_cast<VertexId>(adjacency_[static_cast<std::size_t>(v)].size());
  }

  const std::vector<VertexId>& neighbors(VertexId v) const {
    check_vertex(v);
    return adjacency_[static_cast<std::size_t>(v)];
  }

  bool has_edge(VertexId u, VertexId v) const {
    check_vertex(u);
    check_vertex(v);
    const auto& adj = adjacency_[static_cast<std::size_t>(u)];
    return std::binary_search(adj.begin(), adj.end(), v);
  }

  friend void apply_arrival(DynGraph& graph, const ArrivalEvent& event);

 private:
  void check_vertex(VertexId v) const {
    if (v < 0 || v >= vertex_count())
      throw GraphError(GraphError::Kind::OutOfRange,
                       "vertex id " + std::to_string(v) + " out of range");
  }

  std::vector<std::vector<VertexId>> adjacency_;
  std::int64_t edge_count_ = 0;
};

// Appends one vertex with its back-edges. The event is validated fully
// before any mutation, so a throw leaves the graph untouched.
inline void apply_arrival(DynGraph& graph, const ArrivalEvent& event) {
  const VertexId next = graph.vertex_count();
  if (event.vertex != next)
    throw GraphError(GraphError::Kind::NonContiguousId,
                     "expected vertex id " + std::to_string(next) + ", got " +
                         std::to_string(event.vertex));
  std::vector<VertexId> edges = event.edges;
  std::sort(edges.begin(), edges.end());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const VertexId u = edges[i];
    if (u < 0)
      throw GraphError(GraphError::Kind::OutOfRange,
                       "negative endpoint " + std::to_string(u));
    if (u == event.vertex)
      throw GraphError(GraphError::Kind::SelfLoop,
                       "self-loop on vertex " + std::to_string(u));
    if (u > event.vertex)
      throw GraphError(GraphError::Kind::ForwardEndpoint,
                       "endpoint " + std::to_string(u) +
                           " does not precede vertex " +
                           std::to_string(event.vertex));
    if (i > 0 && edges[i - 1] == u)
      throw GraphError(GraphError::Kind::DuplicateEdge,
                       "duplicate edge to " + std::to_string(u));
  }
  for (const VertexId u : edges)
    graph.adjacency_[static_cast<std::size_t>(u)].push_back(event.vertex);
  graph.adjacency_.push_back(std::move(edges));
  graph.edge_count_ += static_cast<std::int64_t>(event.edges.size());
}

// Splits a batch into single arrivals ordered by vertex id; each edge is
// attached to the event of its larger endpoint. Applying the events in
// order reproduces the batch exactly.
inline std::vector<ArrivalEvent> decompose_batch(const BatchArrival& batch) {
  if (batch.vertices.empty()) {
    if (!batch.edges.empty())
      throw GraphError(GraphError::Kind::UnattachableEdge,
                       "batch has edges but no vertices");
    return {};
  }
  for (std::size_t i = 0; i < batch.vertices.size(); ++i) {
    if (batch.vertices[i] < 0)
      throw GraphError(GraphError::Kind::OutOfRange, "negative vertex id");
    if (i > 0 && batch.vertices[i] != batch.vertices[i - 1] + 1)
      throw GraphError(GraphError::Kind::NonContiguousId,
                       "batch vertices must be consecutive ascending ids");
  }
  const VertexId base = batch.vertices.front();
  const VertexId last = batch.vertices.back();

  std::vector<ArrivalEvent> events(batch.vertices.size());
  for (std::size_t i = 0; i < batch.vertices.size(); ++i)
    events[i].vertex = batch.vertices[i];

  for (const auto& [a, b] : batch.edges) {
    const VertexId lo = std::min(a, b);
    const VertexId hi = std::max(a, b);
    if (lo == hi)
      throw GraphError(GraphError::Kind::SelfLoop,
                       "self-loop on vertex " + std::to_string(lo));
    if (lo < 0 || hi > last)
      throw GraphError(GraphError::Kind::OutOfRange,
                       "edge endpoint outside graph and batch");
    if (hi < base)
      throw GraphError(GraphError::Kind::UnattachableEdge,
                       "edge (" + std::to_string(lo) + ", " +
                           std::to_string(hi) +
                           ") connects two pre-existing vertices");
    events[static_cast<std::size_t>(hi - base)].edges.push_back(lo);
  }
  for (auto& event : events) {
    std::sort(event.edges.begin(), event.edges.end());
    if (std::adjacent_find(event.edges.begin(), event.edges.end()) !=
        event.edges.end())
      throw GraphError(GraphError::Kind::DuplicateEdge,
                       "duplicate edge in batch");
  }
  return events;
}

struct StreamPlan {
  std::vector<ArrivalEvent> events;
  std::int64_t duplicates_dropped = 0;
};

// Turns a static edge list over vertices 0..vertex_count-1 into the arrival
// stream that replays the graph in id order. Duplicate edges are dropped and
// counted rather than rejected; isolated vertices yield empty events.
inline StreamPlan stream_from_edgelist(
    const std::vector<std::pair<VertexId, VertexId>>& edges,
    VertexId vertex_count) {
  if (vertex_count < 0)
    throw GraphError(GraphError::Kind::OutOfRange, "negative vertex count");
  StreamPlan plan;
  plan.events.resize(static_cast<std::size_t>(vertex_count));
  for (VertexId v = 0; v < vertex_count; ++v)
    plan.events[static_cast<std::size_t>(v)].vertex = v;

  for (const auto& [a, b] : edges) {
    const VertexId lo = std::min(a, b);
    const VertexId hi = std::max(a, b);
    if (lo < 0 || hi >= vertex_count)
      throw GraphError(GraphError::Kind::OutOfRange,
                       "edge endpoint out of range: (" + std::to_string(a) +
                           ", " + std::to_string(b) + ")");
    if (lo == hi)
      throw GraphError(GraphError::Kind::SelfLoop,
                       "self-loop on vertex " + std::to_string(lo));
    plan.events[static_cast<std::size_t>(hi)].edges.push_back(lo);
  }
  for (auto& event : plan.events) {
    std::sort(event.edges.begin(), event.edges.end());
    const auto first_dup =
        std::unique(event.edges.begin(), event.edges.end());
    plan.duplicates_dropped +=
        static_cast<std::int64_t>(std::distance(first_dup, event.edges.end()));
    event.edges.erase(first_dup, event.edges.end());
  }
  return plan;
}

}  // namespace sge
