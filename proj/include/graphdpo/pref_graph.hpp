#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace graphdpo {

using NodeIndex = std::size_t;
using NodeSet = std::vector<NodeIndex>;

/// Ordinal labels for one prompt's responses. Higher labels are preferred.
/// Labels within `tie_tolerance` of their sorted neighbour share a class
/// (single linkage), so a run a, b, c with |a-b| and |b-c| inside the
/// tolerance lands in one class even if |a-c| is not.
struct PreferenceLabeling {
  std::vector<double> labels;
  double tie_tolerance = 0.0;
};

/// A directed pair `better -> worse`, 0-based.
struct Edge {
  NodeIndex better;
  NodeIndex worse;

  friend bool operator==(const Edge&, const Edge&) = default;
};

using EdgeList = std::vector<Edge>;

/// Layered preference DAG over K responses.
///
/// Responses are partitioned into equivalence classes ordered best first.
/// Node i dominates node j exactly when class_of(i) < class_of(j); nodes in
/// the same class are tied and never joined by an edge. The resulting edge
/// relation is acyclic and transitively closed.
///
/// Graphs built through `build_from_labels` / `build_from_edges` always
/// satisfy these invariants. `PreferenceGraph::unchecked` exists so that
/// externally supplied (possibly corrupt) structures can be run through
/// `validate`.
class PreferenceGraph {
 public:
  /// Trusted constructor: `classes` must partition {0..num_nodes-1}.
  PreferenceGraph(std::size_t num_nodes, std::vector<NodeSet> classes);

  /// Builds a graph without checking any invariant. When `adjacency` is
  /// given (row-major num_nodes x num_nodes, 0/1) it overrides the
  /// class-derived edge predicate.
  static PreferenceGraph unchecked(
      std::size_t num_nodes, std::vector<NodeSet> classes,
      std::optional<std::vector<std::uint8_t>> adjacency = std::nullopt);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_classes() const { return classes_.size(); }
  const std::vector<NodeSet>& classes() const { return classes_; }
  const NodeSet& class_members(std::size_t g) const { return classes_.at(g); }
  std::size_t class_of(NodeIndex i) const { return class_of_.at(i); }

  /// A(i, j): true iff i is strictly preferred to j.
  bool edge(NodeIndex i, NodeIndex j) const;

  /// Number of directed edges, counted by enumeration.
  std::size_t edge_count() const;

  /// Sum over class pairs g < h of |C_g| * |C_h|.
  std::size_t layered_edge_count() const;

  /// All edges in row-major order.
  EdgeList edges() const;

  /// Dense 0/1 adjacency, row-major.
  std::vector<std::uint8_t> adjacency_matrix() const;

  bool has_adjacency_override() const { return adjacency_.has_value(); }

 private:
  PreferenceGraph() = default;

  std::size_t num_nodes_ = 0;
  std::vector<NodeSet> classes_;
  std::vector<std::size_t> class_of_;
  std::optional<std::vector<std::uint8_t>> adjacency_;
};

/// Groups labels into classes by descending value. Throws InvalidInput for an
/// empty label list, a negative tolerance or non-finite labels.
PreferenceGraph build_from_labels(const PreferenceLabeling& labeling);

/// What to do when the closure of an edge list is a partial order that no
/// ordered partition reproduces exactly.
enum class LayeringPolicy {
  kReject,       ///< throw NonLayerable
  kApproximate,  ///< keep the longest-path layering and warn
};

struct EdgeBuildResult {
  PreferenceGraph graph;
  std::vector<std::string> warnings;
};

/// Transitive closure of `edges` followed by longest-path layering.
///
/// Incomparable nodes that end up on the same layer are treated as tied;
/// each such merge is reported in `warnings` (and through `warn`). If the
/// layering would add edges the closure does not contain, the policy decides
/// between NonLayerable and an approximation warning. A directed cycle
/// raises CyclicPreference naming the nodes on one cycle.
EdgeBuildResult build_from_edges(std::size_t num_nodes, const EdgeList& edges,
                                 LayeringPolicy policy = LayeringPolicy::kReject);

/// Nodes strictly below i: the union of all classes after class_of(i).
NodeSet dominated_set(const PreferenceGraph& graph, NodeIndex i);

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks partition, masking, antisymmetry, transitivity, acyclicity and the
/// layered edge-count identity. Never throws.
ValidationReport validate(const PreferenceGraph& graph);

/// Index of the first class that is strictly worse than a ground-truth
/// response carrying `gt_label`. Classes at or after the returned index form
/// V_worse; a class within tie tolerance of the ground truth is excluded.
std::size_t first_class_below(const PreferenceLabeling& labeling,
                              const PreferenceGraph& graph, double gt_label);

}  // namespace graphdpo
