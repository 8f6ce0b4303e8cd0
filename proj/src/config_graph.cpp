#include "ace/config_graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

namespace ace::synth {

using nlohmann::json;

std::string to_string(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::Conv: return "conv";
    case ModuleKind::ResidualBlock: return "residual_block";
    case ModuleKind::AttentionBlock: return "attention_block";
    case ModuleKind::Upsample: return "upsample";
    case ModuleKind::Concat: return "concat";
    case ModuleKind::Detect: return "detect";
    case ModuleKind::Other: return "other";
  }
  return "other";
}

std::string to_string(PLevel level) {
  switch (level) {
    case PLevel::P3: return "P3";
    case PLevel::P4: return "P4";
    case PLevel::P5: return "P5";
  }
  return "P3";
}

std::optional<PLevel> parse_p_level(const std::string& text) {
  if (text == "P3") return PLevel::P3;
  if (text == "P4") return PLevel::P4;
  if (text == "P5") return PLevel::P5;
  return std::nullopt;
}

namespace {

ModuleKind parse_module_kind(const std::string& name) {
  if (name == "conv") return ModuleKind::Conv;
  if (name == "residual_block") return ModuleKind::ResidualBlock;
  if (name == "attention_block") return ModuleKind::AttentionBlock;
  if (name == "upsample") return ModuleKind::Upsample;
  if (name == "concat") return ModuleKind::Concat;
  if (name == "detect") return ModuleKind::Detect;
  return ModuleKind::Other;
}

LayerNode parse_row(const json& row, int index) {
  if (!row.is_array() || row.size() < 4)
    throw ConfigError("malformed entry at layer " + std::to_string(index) +
                      ": expected [from, repeats, module, args]");
  LayerNode node;
  node.index = index;
  const json& from = row[0];
  if (from.is_number_integer()) {
    node.from_links.push_back(from.get<int>());
  } else if (from.is_array()) {
    for (const json& f : from) {
      if (!f.is_number_integer())
        throw ConfigError("malformed from link at layer " +
                          std::to_string(index));
      node.from_links.push_back(f.get<int>());
    }
  } else {
    throw ConfigError("malformed from link at layer " + std::to_string(index));
  }
  if (!row[1].is_number_integer())
    throw ConfigError("malformed repeats at layer " + std::to_string(index));
  node.repeats = row[1].get<int>();
  if (!row[2].is_string())
    throw ConfigError("malformed module name at layer " +
                      std::to_string(index));
  const std::string module_name = row[2].get<std::string>();
  node.kind = parse_module_kind(module_name);
  if (node.kind == ModuleKind::Other) node.other_name = module_name;
  if (!row[3].is_array())
    throw ConfigError("malformed args at layer " + std::to_string(index));
  for (const json& a : row[3]) {
    if (!a.is_number_integer())
      throw ConfigError("malformed args at layer " + std::to_string(index));
    node.channel_args.push_back(a.get<int>());
  }
  if (row.size() > 4) {
    if (!row[4].is_string())
      throw ConfigError("malformed p_level at layer " + std::to_string(index));
    node.p_level = parse_p_level(row[4].get<std::string>());
    if (!node.p_level)
      throw ConfigError("unknown p_level '" + row[4].get<std::string>() +
                        "' at layer " + std::to_string(index));
  }
  return node;
}

// Round half away from zero.
int round_repeats(int repeats, double alpha) {
  return std::max(1, static_cast<int>(std::llround(repeats * alpha)));
}

// Nearest multiple of granularity with ties rounding up, floored at
// granularity and capped at c_max.
int round_channels(int channels, double beta, int granularity, int c_max) {
  const double scaled = channels * beta;
  const long long multiple = std::llround(scaled / granularity);
  const long long rounded =
      std::max<long long>(multiple, 1) * granularity;
  return static_cast<int>(std::min<long long>(rounded, c_max));
}

}  // namespace

DetectorGraph parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid config document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("backbone") || !doc.contains("head"))
    throw ConfigError("config document must contain backbone and head arrays");

  DetectorGraph graph;
  for (const char* section : {"backbone", "head"}) {
    const json& rows = doc[section];
    if (!rows.is_array())
      throw ConfigError(std::string(section) + " must be an array");
    for (const json& row : rows) {
      graph.layers.push_back(
          parse_row(row, static_cast<int>(graph.layers.size())));
    }
    if (section == std::string("backbone"))
      graph.backbone_len = static_cast<int>(graph.layers.size());
  }

  for (const LayerNode& node : graph.layers) {
    if (node.kind == ModuleKind::Detect) {
      if (graph.detect_index >= 0)
        throw ConfigError("multiple detect nodes");
      graph.detect_index = node.index;
    }
  }
  if (graph.detect_index < 0) throw ConfigError("missing detect node");

  // Fallback: detect inputs ordered P3, P4, P5 when no annotations exist.
  const bool annotated = std::any_of(
      graph.layers.begin(), graph.layers.end(),
      [](const LayerNode& n) { return n.p_level.has_value(); });
  if (!annotated) {
    static constexpr PLevel kOrder[] = {PLevel::P3, PLevel::P4, PLevel::P5};
    const LayerNode& detect = graph.layers[graph.detect_index];
    if (detect.from_links.size() > 3)
      throw ConfigError("detect node has more than three inputs");
    for (size_t i = 0; i < detect.from_links.size(); ++i) {
      const int target = resolve_link(detect.from_links[i], detect.index);
      if (target < 0 || target >= static_cast<int>(graph.layers.size()))
        throw ConfigError("dangling link on detect node");
      graph.layers[target].p_level = kOrder[i];
    }
  }

  validate_graph(graph);
  return graph;
}

void validate_graph(const DetectorGraph& graph) {
  const int n = static_cast<int>(graph.layers.size());
  if (n == 0) throw ConfigError("empty graph");
  if (graph.backbone_len < 0 || graph.backbone_len > n)
    throw ConfigError("backbone length out of range");

  int detect_count = 0;
  for (int i = 0; i < n; ++i) {
    const LayerNode& node = graph.layers[i];
    if (node.index != i) throw ConfigError("layer indices out of order");
    if (node.repeats < 1)
      throw ConfigError("zero/negative repeats at layer " + std::to_string(i));
    for (int c : node.channel_args)
      if (c < 1)
        throw ConfigError("non-positive channel arg at layer " +
                          std::to_string(i));
    for (int link : node.from_links) {
      const int target = resolve_link(link, i);
      if (target == -1 && i == 0) continue;  // network input
      if (target < 0 || target >= i)
        throw ConfigError("dangling link " + std::to_string(link) +
                          " at layer " + std::to_string(i));
    }
    if (node.kind == ModuleKind::Detect) ++detect_count;
  }
  if (detect_count != 1)
    throw ConfigError("graph must contain exactly one detect node");
  if (graph.detect_index < 0 || graph.detect_index >= n ||
      graph.layers[graph.detect_index].kind != ModuleKind::Detect)
    throw ConfigError("detect_index does not reference the detect node");

  const LayerNode& detect = graph.layers[graph.detect_index];
  if (detect.from_links.empty())
    throw ConfigError("detect node has no inputs");
  std::set<PLevel> seen;
  for (int link : detect.from_links) {
    const int target = resolve_link(link, detect.index);
    const std::optional<PLevel>& level = graph.layers[target].p_level;
    if (!level)
      throw ConfigError("detect input " + std::to_string(target) +
                        " lacks a p_level tag");
    if (!seen.insert(*level).second)
      throw ConfigError("duplicate p_level on detect inputs");
  }
}

std::string emit_config(const DetectorGraph& graph, int indent) {
  json backbone = json::array();
  json head = json::array();
  for (const LayerNode& node : graph.layers) {
    json row = json::array();
    if (node.from_links.size() == 1)
      row.push_back(node.from_links[0]);
    else
      row.push_back(node.from_links);
    row.push_back(node.repeats);
    row.push_back(node.kind == ModuleKind::Other ? node.other_name
                                                 : to_string(node.kind));
    row.push_back(node.channel_args);
    if (node.p_level) row.push_back(to_string(*node.p_level));
    (node.index < graph.backbone_len ? backbone : head).push_back(row);
  }
  json doc;
  doc["backbone"] = std::move(backbone);
  doc["head"] = std::move(head);
  return doc.dump(indent);
}

std::set<int> dependency_closure(const DetectorGraph& graph,
                                 const std::set<PLevel>& heads) {
  if (heads.empty()) throw ConfigError("empty head subset");

  std::set<PLevel> present;
  for (const LayerNode& node : graph.layers)
    if (node.p_level) present.insert(*node.p_level);
  for (PLevel level : heads)
    if (!present.count(level))
      throw ConfigError("requested head " + to_string(level) +
                        " not present in graph");

  const LayerNode& detect = graph.layers[graph.detect_index];
  std::vector<int> stack;
  for (int link : detect.from_links) {
    const int target = resolve_link(link, detect.index);
    if (graph.layers[target].p_level &&
        heads.count(*graph.layers[target].p_level))
      stack.push_back(target);
  }

  std::set<int> retained = {graph.detect_index};
  while (!stack.empty()) {
    const int idx = stack.back();
    stack.pop_back();
    if (!retained.insert(idx).second) continue;
    for (int link : graph.layers[idx].from_links) {
      const int target = resolve_link(link, idx);
      if (target >= 0) stack.push_back(target);  // skip the network input
    }
  }
  return retained;
}

DetectorGraph scale_graph(const DetectorGraph& graph, const FamilySpec& spec) {
  DetectorGraph out = graph;
  for (LayerNode& node : out.layers) {
    if (node.kind == ModuleKind::Detect) continue;
    node.repeats = round_repeats(node.repeats, spec.alpha);
    const bool has_channels = node.kind == ModuleKind::Conv ||
                              node.kind == ModuleKind::ResidualBlock ||
                              node.kind == ModuleKind::AttentionBlock ||
                              node.kind == ModuleKind::Other;
    if (has_channels && !node.channel_args.empty())
      node.channel_args[0] = round_channels(node.channel_args[0], spec.beta,
                                            spec.granularity, spec.c_max);
  }
  // Concat outputs are the sum of their scaled inputs.
  const std::vector<int> channels = resolve_channels(out);
  for (LayerNode& node : out.layers) {
    if (node.kind != ModuleKind::Concat) continue;
    int sum = 0;
    for (int link : node.from_links) {
      const int target = resolve_link(link, node.index);
      sum += target < 0 ? 3 : channels[target];
    }
    if (!node.channel_args.empty())
      node.channel_args[0] = sum;
    else
      node.channel_args.push_back(sum);
  }
  return out;
}

DetectorGraph simplify_attention(const DetectorGraph& graph) {
  DetectorGraph out = graph;
  for (LayerNode& node : out.layers)
    if (node.kind == ModuleKind::AttentionBlock)
      node.kind = ModuleKind::ResidualBlock;
  return out;
}

DetectorGraph reindex_and_split(const DetectorGraph& graph,
                                const std::set<int>& retained) {
  std::map<int, int> remap;
  for (int idx : retained) {
    if (idx < 0 || idx >= static_cast<int>(graph.layers.size()))
      throw ConfigError("retained index out of range");
    const int next = static_cast<int>(remap.size());
    remap[idx] = next;
  }

  DetectorGraph out;
  for (const auto& [old_idx, new_idx] : remap) {
    LayerNode node = graph.layers[old_idx];
    node.index = new_idx;
    std::vector<int> links;
    for (int link : node.from_links) {
      const int target = resolve_link(link, old_idx);
      if (target < 0) {  // network input stays a -1 link
        links.push_back(-1);
        continue;
      }
      auto it = remap.find(target);
      if (it == remap.end()) {
        if (node.kind == ModuleKind::Detect) continue;  // pruned head branch
        throw ConfigError("retained layer " + std::to_string(old_idx) +
                          " references pruned layer " + std::to_string(target));
      }
      // Absolute links stay absolute; -1 links stay relative while their
      // target is still the immediately preceding retained node.
      if (link < 0)
        links.push_back(it->second == new_idx - 1 ? -1 : it->second);
      else
        links.push_back(it->second);
    }
    node.from_links = std::move(links);
    if (node.kind == ModuleKind::Detect)
      out.detect_index = new_idx;
    out.layers.push_back(std::move(node));
    if (old_idx < graph.backbone_len) ++out.backbone_len;
  }
  validate_graph(out);
  return out;
}

DetectorGraph synthesize_family(const DetectorGraph& base,
                                const FamilySpec& spec) {
  validate_graph(base);
  const std::set<int> retained = dependency_closure(base, spec.heads);
  DetectorGraph graph = scale_graph(base, spec);
  if (spec.simplify_attention) graph = simplify_attention(graph);
  return reindex_and_split(graph, retained);
}

std::vector<int> resolve_channels(const DetectorGraph& graph) {
  std::vector<int> channels(graph.layers.size(), 0);
  for (const LayerNode& node : graph.layers) {
    switch (node.kind) {
      case ModuleKind::Conv:
      case ModuleKind::ResidualBlock:
      case ModuleKind::AttentionBlock:
      case ModuleKind::Other:
        channels[node.index] =
            node.channel_args.empty() ? 0 : node.channel_args[0];
        break;
      case ModuleKind::Upsample: {
        const int target = node.from_links.empty()
                               ? -1
                               : resolve_link(node.from_links[0], node.index);
        channels[node.index] = target < 0 ? 0 : channels[target];
        break;
      }
      case ModuleKind::Concat: {
        int sum = 0;
        for (int link : node.from_links) {
          const int target = resolve_link(link, node.index);
          sum += target < 0 ? 3 : channels[target];
        }
        channels[node.index] = sum;
        break;
      }
      case ModuleKind::Detect:
        channels[node.index] = 0;
        break;
    }
  }
  return channels;
}

GraphReport summarize(const DetectorGraph& graph) {
  GraphReport report;
  report.layer_count = static_cast<int>(graph.layers.size());
  const std::vector<int> channels = resolve_channels(graph);
  for (const LayerNode& node : graph.layers) {
    report.total_channels += channels[node.index];
    const int target = node.from_links.empty()
                           ? -1
                           : resolve_link(node.from_links[0], node.index);
    const int c_in = target < 0 ? 3 : channels[target];  // input is RGB
    report.parameter_proxy += static_cast<long long>(node.repeats) * c_in *
                              std::max(channels[node.index], 1);
  }
  return report;
}

}  // namespace ace::synth
