#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "nep/hetgraph.hpp"

namespace nep::synth {

/// One relation of the planted schema, declared with its dual.
struct RelationSpec {
  std::string name;
  std::string source;
  std::string target;
  std::string dual;
  std::size_t edges_per_source = 1;
  /// Class alignment of the relation: a homophilous edge joins a source of
  /// class c to a target of class (c + class_shift) mod C.
  std::size_t class_shift = 0;
};

struct PlantedSpec {
  std::vector<std::pair<std::string, std::size_t>> object_types;  // name, count
  std::string targeted_type;
  std::vector<RelationSpec> relations;
  std::size_t num_classes = 4;
  double homophily = 0.85;
  double label_fraction = 1.0;  // share of targeted objects whose label is revealed
  std::uint64_t seed = 1;

  void validate() const;
  Schema schema() const;

  /// 3 object types (user 5000 targeted, repository, organization), 4
  /// relations, C = 4, h = 0.85.
  static PlantedSpec acceptance_default();
};

struct PlantedGraph {
  HetGraph graph;
  LabelSet truth;     // every targeted object
  LabelSet revealed;  // label_fraction of them
  /// Planted class of every object (hidden affiliation for non-targeted).
  std::vector<ClassId> affiliation;
  std::size_t same_class_edges = 0;
  std::size_t total_edges = 0;
};

/// Every object draws a uniform class. Each edge keeps the relation's
/// class alignment with probability h and otherwise lands on a uniformly
/// chosen different class; the endpoint is uniform within the chosen class.
PlantedGraph generate_planted(const PlantedSpec& spec);

/// Writes schema.txt, nodes.tsv, edges.tsv and labels.tsv (revealed labels).
void write_dataset(const std::filesystem::path& dir, const PlantedGraph& planted);

}  // namespace nep::synth
