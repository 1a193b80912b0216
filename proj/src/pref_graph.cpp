#include "graphdpo/pref_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "graphdpo/errors.hpp"
#include "graphdpo/warnings.hpp"

namespace graphdpo {
namespace {

std::vector<std::size_t> index_classes(std::size_t num_nodes,
                                       const std::vector<NodeSet>& classes) {
  std::vector<std::size_t> class_of(num_nodes, 0);
  for (std::size_t g = 0; g < classes.size(); ++g)
    for (NodeIndex i : classes[g])
      if (i < num_nodes) class_of[i] = g;
  return class_of;
}

std::string format_set(const NodeSet& nodes) {
  std::ostringstream os;
  os << '{';
  for (std::size_t k = 0; k < nodes.size(); ++k) os << (k ? "," : "") << nodes[k];
  os << '}';
  return os.str();
}

// Dense boolean reachability, reach[i*k + j] = path i ~> j of length >= 1.
std::vector<std::uint8_t> transitive_closure(std::size_t k, const EdgeList& edges) {
  std::vector<std::uint8_t> reach(k * k, 0);
  for (const Edge& e : edges) reach[e.better * k + e.worse] = 1;
  for (std::size_t m = 0; m < k; ++m)
    for (std::size_t i = 0; i < k; ++i) {
      if (!reach[i * k + m]) continue;
      for (std::size_t j = 0; j < k; ++j)
        if (reach[m * k + j]) reach[i * k + j] = 1;
    }
  return reach;
}

NodeSet find_cycle(std::size_t k, const EdgeList& edges) {
  std::vector<NodeSet> out(k);
  for (const Edge& e : edges) out[e.better].push_back(e.worse);
  enum : std::uint8_t { kWhite, kGrey, kBlack };
  std::vector<std::uint8_t> colour(k, kWhite);
  std::vector<NodeIndex> parent(k, k);

  for (NodeIndex root = 0; root < k; ++root) {
    if (colour[root] != kWhite) continue;
    // Iterative DFS: (node, next child position).
    std::vector<std::pair<NodeIndex, std::size_t>> stack{{root, 0}};
    colour[root] = kGrey;
    while (!stack.empty()) {
      auto& [node, pos] = stack.back();
      if (pos == out[node].size()) {
        colour[node] = kBlack;
        stack.pop_back();
        continue;
      }
      const NodeIndex next = out[node][pos++];
      if (colour[next] == kGrey) {
        NodeSet cycle{next};
        for (NodeIndex v = node; v != next; v = parent[v]) cycle.push_back(v);
        std::reverse(cycle.begin() + 1, cycle.end());
        return cycle;
      }
      if (colour[next] == kWhite) {
        colour[next] = kGrey;
        parent[next] = node;
        stack.emplace_back(next, 0);
      }
    }
  }
  return {};
}

}  // namespace

PreferenceGraph::PreferenceGraph(std::size_t num_nodes, std::vector<NodeSet> classes)
    : num_nodes_(num_nodes),
      classes_(std::move(classes)),
      class_of_(index_classes(num_nodes_, classes_)) {}

PreferenceGraph PreferenceGraph::unchecked(
    std::size_t num_nodes, std::vector<NodeSet> classes,
    std::optional<std::vector<std::uint8_t>> adjacency) {
  PreferenceGraph g;
  g.num_nodes_ = num_nodes;
  g.classes_ = std::move(classes);
  g.class_of_ = index_classes(num_nodes, g.classes_);
  if (adjacency && adjacency->size() != num_nodes * num_nodes)
    throw InvalidInput("adjacency override must be num_nodes x num_nodes");
  g.adjacency_ = std::move(adjacency);
  return g;
}

bool PreferenceGraph::edge(NodeIndex i, NodeIndex j) const {
  if (i >= num_nodes_ || j >= num_nodes_)
    throw InvalidInput("node index out of range");
  if (adjacency_) return (*adjacency_)[i * num_nodes_ + j] != 0;
  return class_of_[i] < class_of_[j];
}

std::size_t PreferenceGraph::edge_count() const {
  std::size_t count = 0;
  for (NodeIndex i = 0; i < num_nodes_; ++i)
    for (NodeIndex j = 0; j < num_nodes_; ++j) count += edge(i, j) ? 1 : 0;
  return count;
}

std::size_t PreferenceGraph::layered_edge_count() const {
  std::size_t count = 0;
  std::size_t below = 0;
  for (std::size_t g = classes_.size(); g-- > 0;) {
    count += classes_[g].size() * below;
    below += classes_[g].size();
  }
  return count;
}

EdgeList PreferenceGraph::edges() const {
  EdgeList out;
  for (NodeIndex i = 0; i < num_nodes_; ++i)
    for (NodeIndex j = 0; j < num_nodes_; ++j)
      if (edge(i, j)) out.push_back({i, j});
  return out;
}

std::vector<std::uint8_t> PreferenceGraph::adjacency_matrix() const {
  std::vector<std::uint8_t> a(num_nodes_ * num_nodes_, 0);
  for (NodeIndex i = 0; i < num_nodes_; ++i)
    for (NodeIndex j = 0; j < num_nodes_; ++j) a[i * num_nodes_ + j] = edge(i, j);
  return a;
}

PreferenceGraph build_from_labels(const PreferenceLabeling& labeling) {
  const auto& labels = labeling.labels;
  if (labels.empty()) throw InvalidInput("label list is empty");
  if (!(labeling.tie_tolerance >= 0.0) || !std::isfinite(labeling.tie_tolerance))
    throw InvalidInput("tie_tolerance must be a finite nonnegative number");
  for (double l : labels)
    if (!std::isfinite(l)) throw InvalidInput("labels must be finite");

  NodeSet order(labels.size());
  std::iota(order.begin(), order.end(), NodeIndex{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeIndex a, NodeIndex b) { return labels[a] > labels[b]; });

  std::vector<NodeSet> classes{{order.front()}};
  for (std::size_t r = 1; r < order.size(); ++r) {
    const double gap = labels[order[r - 1]] - labels[order[r]];
    if (gap > labeling.tie_tolerance) classes.emplace_back();
    classes.back().push_back(order[r]);
  }
  for (auto& c : classes) std::sort(c.begin(), c.end());
  return PreferenceGraph(labels.size(), std::move(classes));
}

EdgeBuildResult build_from_edges(std::size_t num_nodes, const EdgeList& edges,
                                 LayeringPolicy policy) {
  if (num_nodes == 0) throw InvalidInput("graph needs at least one node");
  for (const Edge& e : edges) {
    if (e.better >= num_nodes || e.worse >= num_nodes) {
      std::ostringstream os;
      os << "edge " << e.better << "->" << e.worse << " references a node outside [0, "
         << num_nodes << ")";
      throw InvalidInput(os.str());
    }
    if (e.better == e.worse)
      throw InvalidInput("self-loop on node " + std::to_string(e.better));
  }

  const std::size_t k = num_nodes;
  const auto reach = transitive_closure(k, edges);
  for (NodeIndex i = 0; i < k; ++i) {
    if (reach[i * k + i]) {
      const NodeSet cycle = find_cycle(k, edges);
      std::ostringstream os;
      os << "preference cycle:";
      for (NodeIndex v : cycle) os << ' ' << v << " ->";
      os << ' ' << cycle.front();
      throw CyclicPreference(os.str());
    }
  }

  // Longest-path depth from the sources. With a closed relation the depth of
  // j is one more than the deepest node reaching it.
  NodeSet topo(k);
  std::iota(topo.begin(), topo.end(), NodeIndex{0});
  std::vector<std::size_t> ancestors(k, 0);
  for (NodeIndex i = 0; i < k; ++i)
    for (NodeIndex j = 0; j < k; ++j) ancestors[j] += reach[i * k + j];
  std::stable_sort(topo.begin(), topo.end(),
                   [&](NodeIndex a, NodeIndex b) { return ancestors[a] < ancestors[b]; });
  std::vector<std::size_t> depth(k, 0);
  for (NodeIndex j : topo)
    for (NodeIndex i = 0; i < k; ++i)
      if (reach[i * k + j]) depth[j] = std::max(depth[j], depth[i] + 1);

  const std::size_t layers = *std::max_element(depth.begin(), depth.end()) + 1;
  std::vector<NodeSet> classes(layers);
  for (NodeIndex i = 0; i < k; ++i) classes[depth[i]].push_back(i);

  EdgeBuildResult result{PreferenceGraph(k, std::move(classes)), {}};
  for (const NodeSet& c : result.graph.classes())
    if (c.size() > 1)
      result.warnings.push_back("layering approximation: incomparable nodes " +
                                format_set(c) + " merged into one class");

  std::vector<std::string> added;
  for (NodeIndex i = 0; i < k; ++i)
    for (NodeIndex j = 0; j < k; ++j)
      if (result.graph.edge(i, j) && !reach[i * k + j])
        added.push_back(std::to_string(i) + "->" + std::to_string(j));
  if (!added.empty()) {
    std::string list;
    for (std::size_t n = 0; n < added.size(); ++n) list += (n ? ", " : "") + added[n];
    if (policy == LayeringPolicy::kReject)
      throw NonLayerable("partial order is not layerable; layering would add " + list);
    result.warnings.push_back("layering approximation: added comparisons absent from "
                              "the input closure: " + list);
  }
  for (const auto& w : result.warnings) warn(w);
  return result;
}

NodeSet dominated_set(const PreferenceGraph& graph, NodeIndex i) {
  if (i >= graph.num_nodes()) throw InvalidInput("node index out of range");
  NodeSet out;
  if (graph.has_adjacency_override()) {
    for (NodeIndex j = 0; j < graph.num_nodes(); ++j)
      if (graph.edge(i, j)) out.push_back(j);
    return out;
  }
  for (std::size_t g = graph.class_of(i) + 1; g < graph.num_classes(); ++g) {
    const NodeSet& c = graph.class_members(g);
    out.insert(out.end(), c.begin(), c.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ValidationReport validate(const PreferenceGraph& graph) {
  ValidationReport report;
  auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
  const std::size_t k = graph.num_nodes();

  if (k == 0) fail("graph has no nodes");
  if (graph.num_classes() == 0) fail("graph has no classes");

  std::vector<std::size_t> seen(k, 0);
  bool partition_ok = true;
  for (std::size_t g = 0; g < graph.num_classes(); ++g) {
    const NodeSet& c = graph.class_members(g);
    if (c.empty()) {
      fail("partition: class " + std::to_string(g) + " is empty");
      partition_ok = false;
    }
    for (NodeIndex i : c) {
      if (i >= k) {
        fail("partition: class " + std::to_string(g) + " contains out-of-range node " +
             std::to_string(i));
        partition_ok = false;
        continue;
      }
      ++seen[i];
    }
  }
  for (NodeIndex i = 0; i < k; ++i) {
    if (seen[i] == 0) {
      fail("partition: node " + std::to_string(i) + " belongs to no class");
      partition_ok = false;
    } else if (seen[i] > 1) {
      fail("partition: node " + std::to_string(i) + " appears in " +
           std::to_string(seen[i]) + " classes");
      partition_ok = false;
    }
  }
  if (!partition_ok || k == 0) return report;

  const auto a = graph.adjacency_matrix();
  auto at = [&](NodeIndex i, NodeIndex j) { return a[i * k + j] != 0; };

  for (NodeIndex i = 0; i < k; ++i) {
    if (at(i, i)) fail("masking: self-loop on node " + std::to_string(i));
    for (NodeIndex j = 0; j < k; ++j) {
      if (i == j) continue;
      const bool expected = graph.class_of(i) < graph.class_of(j);
      if (at(i, j) != expected) {
        fail(std::string("masking: A(") + std::to_string(i) + "," + std::to_string(j) +
             ") = " + (at(i, j) ? "1" : "0") +
             (graph.class_of(i) == graph.class_of(j) ? " between same-class nodes"
                                                     : " contradicts class order"));
      }
      if (i < j && at(i, j) && at(j, i))
        fail("antisymmetry: both " + std::to_string(i) + "->" + std::to_string(j) +
             " and the reverse edge are present");
    }
  }
  for (NodeIndex i = 0; i < k; ++i)
    for (NodeIndex j = 0; j < k; ++j) {
      if (!at(i, j)) continue;
      for (NodeIndex m = 0; m < k; ++m)
        if (at(j, m) && !at(i, m))
          fail("transitivity: " + std::to_string(i) + "->" + std::to_string(j) + "->" +
               std::to_string(m) + " without " + std::to_string(i) + "->" +
               std::to_string(m));
    }

  EdgeList edges;
  for (NodeIndex i = 0; i < k; ++i)
    for (NodeIndex j = 0; j < k; ++j)
      if (i != j && at(i, j)) edges.push_back({i, j});
  const NodeSet cycle = find_cycle(k, edges);
  if (!cycle.empty()) fail("acyclicity: cycle through " + format_set(cycle));

  if (graph.edge_count() != graph.layered_edge_count())
    fail("edge count " + std::to_string(graph.edge_count()) +
         " differs from layered count " + std::to_string(graph.layered_edge_count()));
  return report;
}

std::size_t first_class_below(const PreferenceLabeling& labeling,
                              const PreferenceGraph& graph, double gt_label) {
  if (labeling.labels.size() != graph.num_nodes())
    throw InvalidInput("labeling and graph sizes differ");
  for (std::size_t g = 0; g < graph.num_classes(); ++g) {
    double best = labeling.labels[graph.class_members(g).front()];
    for (NodeIndex i : graph.class_members(g)) best = std::max(best, labeling.labels[i]);
    if (gt_label - best > labeling.tie_tolerance) return g;
  }
  return graph.num_classes();
}

}  // namespace graphdpo
