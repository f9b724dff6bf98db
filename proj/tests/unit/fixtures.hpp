#pragma once

#include <sstream>
#include <string>

#include "nep/hetgraph.hpp"

namespace nep::testing {

inline Schema github_schema() {
  std::istringstream in(
      "object user\n"
      "object repository\n"
      "object organization\n"
      "link creates user repository created_by\n"
      "link watches user repository watched_by\n"
      "link belongs_to user organization includes\n");
  return Schema::parse(in);
}

inline HetGraph graph_from(const Schema& schema, const std::string& nodes, const std::string& edges) {
  std::istringstream n(nodes), e(edges);
  return read_graph(n, e, schema);
}

/// u1..u3, r1..r2, o1. u1 creates r1 and r2, u2 watches r1, u1 and u3
/// belong to o1.
inline HetGraph small_github() {
  return graph_from(github_schema(),
                    "u1\tuser\nu2\tuser\nu3\tuser\nr1\trepository\nr2\trepository\no1\torganization\n",
                    "u1\tcreates\tr1\nu1\tcreates\tr2\nu2\twatches\tr1\nu1\tbelongs_to\to1\n"
                    "u3\tbelongs_to\to1\n");
}

inline LabelSet labels_from(const HetGraph& g, const std::string& text, std::string_view type) {
  std::istringstream in(text);
  return read_labels(in, g, type);
}

}  // namespace nep::testing
