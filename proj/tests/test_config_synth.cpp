#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "ace/config_graph.hpp"

using namespace ace::synth;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

DetectorGraph load_toy_base() {
  return parse_config(read_file(std::string(ACE_DATA_DIR) + "/toy_base.json"));
}

// Random valid graph: a chain with occasional extra skip links, three
// annotated head nodes and a trailing detect node.
DetectorGraph random_graph(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> chain_len(4, 12);
  std::uniform_int_distribution<int> repeats(1, 4);
  std::uniform_int_distribution<int> channel_mult(1, 16);
  const int n = chain_len(rng);

  DetectorGraph graph;
  for (int i = 0; i < n; ++i) {
    LayerNode node;
    node.index = i;
    if (i > 0) node.from_links.push_back(-1);
    if (i > 1 && rng() % 3 == 0)
      node.from_links.push_back(static_cast<int>(rng() % i));
    node.repeats = repeats(rng);
    node.kind = rng() % 4 == 0 ? ModuleKind::ResidualBlock : ModuleKind::Conv;
    node.channel_args = {8 * channel_mult(rng)};
    graph.layers.push_back(node);
  }
  // Tag the last three chain nodes as heads, then append detect.
  graph.layers[n - 3].p_level = PLevel::P3;
  graph.layers[n - 2].p_level = PLevel::P4;
  graph.layers[n - 1].p_level = PLevel::P5;
  LayerNode detect;
  detect.index = n;
  detect.from_links = {n - 3, n - 2, n - 1};
  detect.kind = ModuleKind::Detect;
  detect.channel_args = {18};
  graph.layers.push_back(detect);
  graph.detect_index = n;
  graph.backbone_len = std::max(1, n / 2);
  validate_graph(graph);
  return graph;
}

// Brute-force reachability from the detect node via the selected heads.
std::set<int> brute_force_closure(const DetectorGraph& graph,
                                  const std::set<PLevel>& heads) {
  std::set<int> reach = {graph.detect_index};
  const LayerNode& detect = graph.layers[graph.detect_index];
  std::vector<int> frontier;
  for (int link : detect.from_links) {
    const int t = resolve_link(link, detect.index);
    if (graph.layers[t].p_level && heads.count(*graph.layers[t].p_level))
      frontier.push_back(t);
  }
  while (!frontier.empty()) {
    int idx = frontier.back();
    frontier.pop_back();
    if (!reach.insert(idx).second) continue;
    for (int link : graph.layers[idx].from_links) {
      const int t = resolve_link(link, idx);
      if (t >= 0) frontier.push_back(t);  // t == -1 is the network input
    }
  }
  return reach;
}

}  // namespace

TEST_CASE("parse five-layer toy config") {
  const std::string doc = R"({
    "backbone": [
      [-1, 1, "conv", [32]],
      [-1, 2, "conv", [64]]
    ],
    "head": [
      [-1, 1, "conv", [64], "P3"],
      [-1, 1, "conv", [128], "P4"],
      [[2, 3], 1, "detect", [10]]
    ]
  })";
  const DetectorGraph graph = parse_config(doc);
  CHECK(graph.layers.size() == 5);
  CHECK(graph.backbone_len == 2);
  CHECK(graph.detect_index == 4);
  CHECK(graph.layers[1].repeats == 2);
}

TEST_CASE("dangling link is rejected") {
  const std::string doc = R"({
    "backbone": [
      [-1, 1, "conv", [32]],
      [-1, 1, "conv", [64]],
      [-1, 1, "conv", [64]],
      [7, 1, "conv", [64], "P3"]
    ],
    "head": [[3, 1, "detect", [10]]]
  })";
  CHECK_THROWS_WITH_AS(parse_config(doc),
                       doctest::Contains("dangling link"), ConfigError);
}

TEST_CASE("parse rejects malformed entries") {
  CHECK_THROWS_AS(parse_config("not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"backbone": [], "head": []})"),
                  ConfigError);
  // zero repeats
  CHECK_THROWS_AS(parse_config(R"({
    "backbone": [[-1, 0, "conv", [32], "P3"]],
    "head": [[0, 1, "detect", [10]]]
  })"),
                  ConfigError);
  // no detect node
  CHECK_THROWS_AS(parse_config(R"({
    "backbone": [[-1, 1, "conv", [32]]],
    "head": [[-1, 1, "conv", [64]]]
  })"),
                  ConfigError);
}

TEST_CASE("fallback head annotation orders detect inputs P3,P4,P5") {
  const std::string doc = R"({
    "backbone": [
      [-1, 1, "conv", [32]],
      [-1, 1, "conv", [64]],
      [-1, 1, "conv", [64]]
    ],
    "head": [[[0, 1, 2], 1, "detect", [10]]]
  })";
  const DetectorGraph graph = parse_config(doc);
  CHECK(graph.layers[0].p_level == PLevel::P3);
  CHECK(graph.layers[1].p_level == PLevel::P4);
  CHECK(graph.layers[2].p_level == PLevel::P5);
}

TEST_CASE("parse/emit round trip") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const DetectorGraph graph = random_graph(rng);
    const DetectorGraph reparsed = parse_config(emit_config(graph));
    CHECK(reparsed == graph);
  }
}

TEST_CASE("dependency closure") {
  SUBCASE("linear chain with single head") {
    const std::string doc = R"({
      "backbone": [
        [-1, 1, "conv", [32]],
        [-1, 1, "conv", [64]]
      ],
      "head": [
        [-1, 1, "conv", [64], "P3"],
        [-1, 1, "detect", [10]]
      ]
    })";
    const DetectorGraph graph = parse_config(doc);
    CHECK(dependency_closure(graph, {PLevel::P3}) ==
          std::set<int>{0, 1, 2, 3});
  }

  SUBCASE("all heads retain every feeding layer") {
    const DetectorGraph graph = load_toy_base();
    const auto closure =
        dependency_closure(graph, {PLevel::P3, PLevel::P4, PLevel::P5});
    CHECK(closure.size() == graph.layers.size());
  }

  SUBCASE("diamond drops unselected branches") {
    // P4/P5 branches hang off node 2.
    const std::string doc = R"({
      "backbone": [
        [-1, 1, "conv", [32]],
        [-1, 1, "conv", [64]],
        [-1, 1, "conv", [64]]
      ],
      "head": [
        [2, 1, "conv", [64], "P3"],
        [2, 1, "conv", [128], "P4"],
        [2, 1, "conv", [256], "P5"],
        [[3, 4, 5], 1, "detect", [10]]
      ]
    })";
    const DetectorGraph graph = parse_config(doc);
    const auto closure = dependency_closure(graph, {PLevel::P3});
    CHECK(closure == brute_force_closure(graph, {PLevel::P3}));
    CHECK(closure == std::set<int>{0, 1, 2, 3, 6});
    CHECK(!closure.count(4));
    CHECK(!closure.count(5));
  }

  SUBCASE("missing head is an error") {
    const std::string doc = R"({
      "backbone": [[-1, 1, "conv", [32]]],
      "head": [
        [-1, 1, "conv", [64], "P3"],
        [-1, 1, "detect", [10]]
      ]
    })";
    const DetectorGraph graph = parse_config(doc);
    CHECK_THROWS_AS(dependency_closure(graph, {PLevel::P5}), ConfigError);
  }

  SUBCASE("matches brute force on random graphs") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
      const DetectorGraph graph = random_graph(rng);
      for (const std::set<PLevel> heads :
           {std::set<PLevel>{PLevel::P3},
            std::set<PLevel>{PLevel::P4, PLevel::P5},
            std::set<PLevel>{PLevel::P3, PLevel::P4, PLevel::P5}}) {
        CHECK(dependency_closure(graph, heads) ==
              brute_force_closure(graph, heads));
      }
    }
  }
}

TEST_CASE("scale_graph") {
  const DetectorGraph graph = load_toy_base();

  SUBCASE("width scaling hits exact multiples") {
    FamilySpec spec;
    spec.beta = 0.125;
    const DetectorGraph scaled = scale_graph(graph, spec);
    CHECK(scaled.layers[3].channel_args[0] == 32);  // 256 * 0.125
  }

  SUBCASE("channel cap applies") {
    FamilySpec spec;
    spec.beta = 0.5;
    spec.c_max = 320;
    const DetectorGraph scaled = scale_graph(graph, spec);
    CHECK(scaled.layers[7].channel_args[0] == 320);  // 1024*0.5 capped
  }

  SUBCASE("identity spec leaves the graph unchanged") {
    const FamilySpec spec;
    CHECK(scale_graph(graph, spec) == graph);
  }

  SUBCASE("detect class counts are never scaled") {
    FamilySpec spec;
    spec.beta = 0.1;
    const DetectorGraph scaled = scale_graph(graph, spec);
    CHECK(scaled.layers[graph.detect_index].channel_args ==
          std::vector<int>{18});
  }

  SUBCASE("depth scaling floors at one repeat") {
    FamilySpec spec;
    spec.alpha = 0.1;
    const DetectorGraph scaled = scale_graph(graph, spec);
    for (const LayerNode& node : scaled.layers) CHECK(node.repeats >= 1);
  }

  SUBCASE("channels are monotone in beta") {
    for (double beta1 = 0.1; beta1 < 1.0; beta1 += 0.17) {
      FamilySpec s1, s2;
      s1.beta = beta1;
      s2.beta = beta1 + 0.1;
      const DetectorGraph g1 = scale_graph(graph, s1);
      const DetectorGraph g2 = scale_graph(graph, s2);
      const auto c1 = resolve_channels(g1);
      const auto c2 = resolve_channels(g2);
      for (size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] <= c2[i]);
    }
  }
}

TEST_CASE("simplify_attention") {
  const DetectorGraph graph = load_toy_base();
  const DetectorGraph simplified = simplify_attention(graph);
  CHECK(simplified.layers[4].kind == ModuleKind::ResidualBlock);
  CHECK(simplified.layers[4].from_links == graph.layers[4].from_links);
  CHECK(simplified.layers[4].repeats == graph.layers[4].repeats);
  CHECK(simplified.layers[4].channel_args == graph.layers[4].channel_args);
  CHECK(simplify_attention(simplified) == simplified);  // idempotent

  DetectorGraph no_attention = simplified;
  CHECK(simplify_attention(no_attention) == no_attention);
}

TEST_CASE("reindex_and_split") {
  SUBCASE("identity retained set renumbers identically") {
    const DetectorGraph graph = load_toy_base();
    std::set<int> all;
    for (const LayerNode& node : graph.layers) all.insert(node.index);
    CHECK(reindex_and_split(graph, all) == graph);
  }

  SUBCASE("pruned chain remaps absolute link") {
    const std::string doc = R"({
      "backbone": [
        [-1, 1, "conv", [32]],
        [-1, 1, "conv", [64]]
      ],
      "head": [
        [0, 1, "conv", [64], "P3"],
        [-1, 1, "detect", [10]]
      ]
    })";
    const DetectorGraph graph = parse_config(doc);
    const DetectorGraph pruned = reindex_and_split(graph, {0, 2, 3});
    CHECK(pruned.layers.size() == 3);
    CHECK(pruned.backbone_len == 1);
    CHECK(resolve_link(pruned.layers[1].from_links[0], 1) == 0);
    // emitted document re-parses to a valid graph
    CHECK(parse_config(emit_config(pruned)) == pruned);
  }

  SUBCASE("non-closed retained set is an error") {
    const DetectorGraph graph = load_toy_base();
    CHECK_THROWS_AS(reindex_and_split(graph, {6, 20}), ConfigError);
  }
}

TEST_CASE("synthesize_family") {
  const DetectorGraph base = load_toy_base();

  SUBCASE("single-head compact family") {
    FamilySpec spec;
    spec.alpha = 0.25;
    spec.beta = 0.125;
    spec.c_max = 320;
    spec.heads = {PLevel::P3};
    spec.simplify_attention = true;
    const DetectorGraph family = synthesize_family(base, spec);

    // Single detect input, graph shrinks to the P3 branch.
    CHECK(family.layers[family.detect_index].from_links.size() == 1);
    CHECK(family.layers.size() < base.layers.size());

    // All channels hardware-friendly and capped.
    const auto channels = resolve_channels(family);
    for (const LayerNode& node : family.layers) {
      if (node.kind == ModuleKind::Detect) continue;
      CHECK(channels[node.index] % spec.granularity == 0);
      CHECK(channels[node.index] <= spec.c_max);
    }
    for (const LayerNode& node : family.layers)
      CHECK(node.kind != ModuleKind::AttentionBlock);

    // Pruning soundness: every node backward-reachable from detect.
    const auto closure = dependency_closure(
        family, {PLevel::P3});
    CHECK(closure.size() == family.layers.size());
  }

  SUBCASE("second compact family") {
    FamilySpec spec;
    spec.alpha = 0.18;
    spec.beta = 0.15;
    spec.c_max = 192;
    spec.heads = {PLevel::P3};
    const DetectorGraph family = synthesize_family(base, spec);
    const auto channels = resolve_channels(family);
    int max_conv_channels = 0;
    for (const LayerNode& node : family.layers)
      if (node.kind == ModuleKind::Conv)
        max_conv_channels = std::max(max_conv_channels, channels[node.index]);
    CHECK(max_conv_channels <= 192);
  }

  SUBCASE("identity spec returns the base graph") {
    const FamilySpec spec;  // alpha=beta=1, all heads, no cap
    CHECK(synthesize_family(base, spec) == base);
  }

  SUBCASE("deterministic") {
    FamilySpec spec;
    spec.alpha = 0.25;
    spec.beta = 0.125;
    spec.c_max = 320;
    spec.heads = {PLevel::P3};
    CHECK(synthesize_family(base, spec) == synthesize_family(base, spec));
  }

  SUBCASE("closure minimality on the synthesized family") {
    FamilySpec spec;
    spec.heads = {PLevel::P3};
    const DetectorGraph family = synthesize_family(base, spec);
    const auto closure = dependency_closure(family, {PLevel::P3});
    // Removing any non-detect node breaks reachability of the head.
    for (int victim : closure) {
      if (victim == family.detect_index) continue;
      std::set<int> reduced = closure;
      reduced.erase(victim);
      CHECK_THROWS_AS(reindex_and_split(family, reduced), ConfigError);
    }
  }
}

TEST_CASE("summarize reports layer and channel totals") {
  const DetectorGraph base = load_toy_base();
  const GraphReport report = summarize(base);
  CHECK(report.layer_count == 21);
  CHECK(report.total_channels > 0);
  CHECK(report.parameter_proxy > 0);
}
