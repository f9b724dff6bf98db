#include "nep/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "nep/error.hpp"
#include "nep/sampler.hpp"
#include "text_util.hpp"

namespace nep::synth {

void PlantedSpec::validate() const {
  if (num_classes < 2) throw Error(ErrorCode::kInvalidArgument, "planted graphs need C >= 2");
  if (!(homophily >= 0.0 && homophily <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "homophily must lie in [0, 1]");
  if (!(label_fraction >= 0.0 && label_fraction <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "label fraction must lie in [0, 1]");
  if (object_types.empty()) throw Error(ErrorCode::kInvalidArgument, "no object types");
  bool found = false;
  for (const auto& [name, count] : object_types) found = found || name == targeted_type;
  if (!found) throw Error(ErrorCode::kUnknownType, "targeted type '" + targeted_type + "' not declared");
}

Schema PlantedSpec::schema() const {
  Schema s;
  for (const auto& [name, count] : object_types) s.add_object_type(name);
  for (const auto& r : relations) s.add_link_type(r.name, r.source, r.target, r.dual);
  return s;
}

PlantedSpec PlantedSpec::acceptance_default() {
  PlantedSpec spec;
  spec.object_types = {{"user", 5000}, {"repository", 2000}, {"organization", 250}};
  spec.targeted_type = "user";
  spec.relations = {
      {"creates", "user", "repository", "created_by", 2, 0},
      {"watches", "user", "repository", "watched_by", 2, 1},
      {"belongs_to", "user", "organization", "includes", 1, 0},
      {"owned_by", "repository", "organization", "owns", 1, 0},
  };
  spec.num_classes = 4;
  spec.homophily = 0.85;
  spec.label_fraction = 1.0;
  spec.seed = 20190411;
  return spec;
}

PlantedGraph generate_planted(const PlantedSpec& spec) {
  spec.validate();
  const auto schema = spec.schema();
  Rng rng(spec.seed);
  const auto c = spec.num_classes;

  HetGraph::Builder builder(schema);
  std::vector<ClassId> affiliation;
  // bucket[type][class] -> objects
  std::vector<std::vector<std::vector<ObjectIndex>>> bucket(schema.num_object_types(),
                                                             std::vector<std::vector<ObjectIndex>>(c));
  for (const auto& [name, count] : spec.object_types) {
    const auto type = schema.object_type(name);
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = builder.add_node(name + "_" + std::to_string(i), type);
      const auto cls = static_cast<ClassId>(uniform_index(rng, c));
      affiliation.push_back(cls);
      bucket[type.value][static_cast<std::size_t>(cls)].push_back(v);
    }
  }

  std::size_t same = 0, total = 0;
  std::bernoulli_distribution keep(spec.homophily);
  for (const auto& rel : spec.relations) {
    const auto link = schema.link_type(rel.name);
    const auto src_type = schema.object_type(rel.source);
    const auto dst_type = schema.object_type(rel.target);
    const auto& sources = bucket[src_type.value];
    std::size_t dst_count = 0;
    for (const auto& b : bucket[dst_type.value]) dst_count += b.size();
    const std::size_t partners = src_type == dst_type ? dst_count - 1 : dst_count;
    if (rel.edges_per_source > 0 && rel.edges_per_source > partners)
      throw Error(ErrorCode::kInfeasible, "relation '" + rel.name + "' asks for " +
                                              std::to_string(rel.edges_per_source) +
                                              " edges per object but only " +
                                              std::to_string(partners) + " partners exist");
    // Iterate sources in index order for reproducibility.
    std::vector<ObjectIndex> src_objects;
    for (const auto& b : sources) src_objects.insert(src_objects.end(), b.begin(), b.end());
    std::sort(src_objects.begin(), src_objects.end());
    for (const auto s : src_objects) {
      const auto aligned = (static_cast<std::size_t>(affiliation[s]) + rel.class_shift) % c;
      for (std::size_t k = 0; k < rel.edges_per_source; ++k) {
        std::size_t cls = aligned;
        if (!keep(rng)) {
          cls = uniform_index(rng, c - 1);
          if (cls >= aligned) ++cls;
        }
        const auto& pool = bucket[dst_type.value][cls];
        if (pool.empty() || (pool.size() == 1 && pool.front() == s))
          throw Error(ErrorCode::kInfeasible, "no " + rel.target + " object of planted class " +
                                                  std::to_string(cls) + " to link to");
        ObjectIndex d = pool[uniform_index(rng, pool.size())];
        while (d == s) d = pool[uniform_index(rng, pool.size())];
        builder.add_edge(s, link, d);
        ++total;
        if (cls == aligned) ++same;
      }
    }
  }

  std::vector<std::string> class_names;
  for (std::size_t k = 0; k < c; ++k) class_names.push_back("class" + std::to_string(k));
  const auto targeted = schema.object_type(spec.targeted_type);

  PlantedGraph out{std::move(builder).build(), {}, {}, std::move(affiliation), same, total};
  std::vector<std::pair<ObjectIndex, ClassId>> truth;
  for (const auto v : out.graph.objects_of_type(targeted)) truth.emplace_back(v, out.affiliation[v]);

  auto shuffled = truth;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto n_reveal = static_cast<std::size_t>(
      std::llround(spec.label_fraction * static_cast<double>(shuffled.size())));
  shuffled.resize(n_reveal);

  out.truth = LabelSet(targeted, class_names, std::move(truth));
  out.revealed = LabelSet(targeted, class_names, std::move(shuffled));
  return out;
}

void write_dataset(const std::filesystem::path& dir, const PlantedGraph& planted) {
  std::filesystem::create_directories(dir);
  {
    auto out = detail::open_output(dir / "schema.txt");
    planted.graph.schema().write(out);
  }
  {
    auto out = detail::open_output(dir / "nodes.tsv");
    planted.graph.write_nodes(out);
  }
  {
    auto out = detail::open_output(dir / "edges.tsv");
    planted.graph.write_edges(out);
  }
  {
    auto out = detail::open_output(dir / "labels.tsv");
    planted.revealed.write(out, planted.graph);
  }
}

}  // namespace nep::synth
