///////////////////////////////////////////////////////////////////////////////
// config_graph.hpp: Detector configuration graphs and family synthesis.
// A detector config is a forward-only DAG of layer nodes split into backbone
// and head sections. Families are synthesized by dependency closure over the
// selected detection heads, depth/width scaling with channel caps, optional
// attention simplification, and link re-indexing.
///////////////////////////////////////////////////////////////////////////////

#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ace::synth {

enum class ModuleKind {
  Conv,
  ResidualBlock,
  AttentionBlock,
  Upsample,
  Concat,
  Detect,
  Other,
};

enum class PLevel { P3, P4, P5 };

std::string to_string(ModuleKind kind);
std::string to_string(PLevel level);
std::optional<PLevel> parse_p_level(const std::string& text);

struct LayerNode {
  int index = 0;
  std::vector<int> from_links;  // -1 means previous layer, >=0 absolute
  int repeats = 1;
  ModuleKind kind = ModuleKind::Conv;
  std::string other_name;  // set when kind == Other
  std::vector<int> channel_args;
  std::optional<PLevel> p_level;

  bool operator==(const LayerNode&) const = default;
};

struct DetectorGraph {
  std::vector<LayerNode> layers;
  int backbone_len = 0;
  int detect_index = -1;

  bool operator==(const DetectorGraph&) const = default;
};

struct FamilySpec {
  double alpha = 1.0;  // depth multiplier on layer repeats
  double beta = 1.0;   // width multiplier on channels
  int c_max = 1 << 30;
  std::set<PLevel> heads = {PLevel::P3, PLevel::P4, PLevel::P5};
  bool simplify_attention = false;
  int granularity = 8;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Resolve a link reference relative to the node holding it.
inline int resolve_link(int link, int holder_index) {
  return link < 0 ? holder_index - 1 : link;
}

DetectorGraph parse_config(const std::string& text);
std::string emit_config(const DetectorGraph& graph, int indent = 2);

// Validates all DetectorGraph invariants, throwing ConfigError on violation.
void validate_graph(const DetectorGraph& graph);

// Minimal index set containing the detect node, the selected p-level nodes,
// and all transitive predecessors. Unselected head branches are excluded.
std::set<int> dependency_closure(const DetectorGraph& graph,
                                 const std::set<PLevel>& heads);

DetectorGraph scale_graph(const DetectorGraph& graph, const FamilySpec& spec);

DetectorGraph simplify_attention(const DetectorGraph& graph);

// Renumber the retained nodes densely, remapping every link. Links of the
// detect node that point at pruned head branches are dropped; any other
// reference to a pruned node is an error.
DetectorGraph reindex_and_split(const DetectorGraph& graph,
                                const std::set<int>& retained);

// Full pipeline: closure -> scale -> optional simplify -> reindex.
DetectorGraph synthesize_family(const DetectorGraph& base,
                                const FamilySpec& spec);

// Output channel count per node (0 for detect). Upsample passes through its
// input; concat sums its inputs.
std::vector<int> resolve_channels(const DetectorGraph& graph);

struct GraphReport {
  int layer_count = 0;
  long long total_channels = 0;
  long long parameter_proxy = 0;  // sum over nodes of repeats * c_in * c_out
};

GraphReport summarize(const DetectorGraph& graph);

}  // namespace ace::synth
