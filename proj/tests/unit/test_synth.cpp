#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "nep/baseline.hpp"
#include "nep/error.hpp"
#include "nep/eval.hpp"
#include "nep/synth.hpp"

using namespace nep;

namespace {

synth::PlantedSpec spec_with(double h, std::size_t classes = 4, bool shift = true) {
  auto s = synth::PlantedSpec::acceptance_default();
  s.object_types = {{"user", 2000}, {"repository", 800}, {"organization", 100}};
  s.num_classes = classes;
  s.homophily = h;
  if (!shift)
    for (auto& r : s.relations) r.class_shift = 0;
  return s;
}

// Fraction of relation edges whose endpoints respect the relation's class
// alignment, recounted from the graph itself.
double aligned_fraction(const synth::PlantedGraph& p, const synth::PlantedSpec& spec) {
  const auto& schema = p.graph.schema();
  std::size_t same = 0, total = 0;
  for (const auto& rel : spec.relations) {
    const auto link = schema.link_type(rel.name);
    for (ObjectIndex v = 0; v < p.graph.num_objects(); ++v)
      for (const auto& nb : p.graph.neighbors(v, link)) {
        ++total;
        same += p.affiliation[nb.object] == (p.affiliation[v] + rel.class_shift) % spec.num_classes;
      }
  }
  return static_cast<double>(same) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("planted graph shape") {
  const auto spec = spec_with(0.85);
  const auto p = synth::generate_planted(spec);
  const auto& schema = p.graph.schema();
  CHECK(p.graph.num_objects() == 2900);
  CHECK(p.graph.objects_of_type(schema.object_type("user")).size() == 2000);
  CHECK(schema.num_link_types() == 8);
  CHECK(p.total_edges == 2000 * 5 + 800);
  CHECK(p.graph.num_adjacency_entries() == 2 * p.total_edges);
  for (const auto v : p.graph.objects_of_type(schema.object_type("user"))) {
    CHECK(p.graph.neighbors(v, schema.link_type("creates")).size() == 2);
    CHECK(p.graph.neighbors(v, schema.link_type("watches")).size() == 2);
    CHECK(p.graph.neighbors(v, schema.link_type("belongs_to")).size() == 1);
  }
  CHECK(p.truth.size() == 2000);
  CHECK(p.revealed.size() == 2000);
  CHECK(p.truth.class_names() == std::vector<std::string>{"class0", "class1", "class2", "class3"});
  for (std::size_t i = 0; i < p.truth.size(); ++i)
    CHECK(p.truth.classes()[i] == p.affiliation[p.truth.objects()[i]]);
}

TEST_CASE("aligned-edge fraction tracks homophily") {
  for (const double h : {0.85, 0.25, 0.6}) {
    const auto spec = spec_with(h);
    const auto p = synth::generate_planted(spec);
    const double f = aligned_fraction(p, spec);
    CAPTURE(h);
    CHECK(std::abs(f - h) <= 0.02);
    CHECK(f == doctest::Approx(static_cast<double>(p.same_class_edges) / static_cast<double>(p.total_edges)));
  }
}

TEST_CASE("h = 1 without shifts makes the class recoverable by LP") {
  const auto spec = spec_with(1.0, 4, false);
  const auto p = synth::generate_planted(spec);
  CHECK(aligned_fraction(p, spec) == 1.0);
  const auto parts = eval::split(p.truth, 0.2, 3);
  const auto d = lp::label_propagate(lp::homogenize(p.graph), parts.train);
  std::vector<ClassId> pred;
  for (const auto v : parts.test.objects()) pred.push_back(d.predict(v));
  CHECK(eval::accuracy(parts.test.objects(), pred, parts.test) >= 0.99);
}

TEST_CASE("generation is reproducible per seed") {
  auto spec = spec_with(0.85);
  const auto a = synth::generate_planted(spec);
  const auto b = synth::generate_planted(spec);
  std::ostringstream ea, eb;
  a.graph.write_edges(ea);
  b.graph.write_edges(eb);
  CHECK(ea.str() == eb.str());
  CHECK(a.affiliation == b.affiliation);
  spec.seed += 1;
  std::ostringstream ec;
  synth::generate_planted(spec).graph.write_edges(ec);
  CHECK(ec.str() != ea.str());
}

TEST_CASE("label fraction reveals a subset of the truth") {
  auto spec = spec_with(0.85);
  spec.label_fraction = 0.05;
  const auto p = synth::generate_planted(spec);
  CHECK(p.revealed.size() == 100);
  for (const auto v : p.revealed.objects()) CHECK(p.revealed.label(v) == p.truth.label(v));
}

TEST_CASE("infeasible and invalid specs are rejected") {
  auto spec = spec_with(0.85);
  spec.relations[0].edges_per_source = 801;
  try {
    synth::generate_planted(spec);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfeasible);
  }
  spec = spec_with(0.85);
  spec.homophily = 1.5;
  CHECK_THROWS_AS(synth::generate_planted(spec), Error);
  spec = spec_with(0.85);
  spec.num_classes = 1;
  CHECK_THROWS_AS(synth::generate_planted(spec), Error);
  spec = spec_with(0.85);
  spec.targeted_type = "project";
  CHECK_THROWS_AS(synth::generate_planted(spec), Error);
  // Eight organizations cannot cover 20 classes.
  spec = spec_with(0.85, 20);
  spec.object_types[2].second = 8;
  CHECK_THROWS_AS(synth::generate_planted(spec), Error);
}

TEST_CASE("written datasets reload to the same graph and labels") {
  auto spec = spec_with(0.85);
  spec.label_fraction = 0.3;
  const auto p = synth::generate_planted(spec);
  const auto dir = std::filesystem::temp_directory_path() / "nep_synth_test";
  std::filesystem::remove_all(dir);
  synth::write_dataset(dir, p);
  const auto g = load_graph(dir / "nodes.tsv", dir / "edges.tsv", Schema::load(dir / "schema.txt"));
  const auto labels = load_labels(dir / "labels.tsv", g, "user");
  std::filesystem::remove_all(dir);

  std::ostringstream e1, e2;
  p.graph.write_edges(e1);
  g.write_edges(e2);
  CHECK(e1.str() == e2.str());
  REQUIRE(labels.size() == p.revealed.size());
  for (const auto v : p.revealed.objects())
    CHECK(labels.class_names()[labels.label(g.index_of(p.graph.id(v)))] ==
          p.revealed.class_names()[p.revealed.label(v)]);
}
