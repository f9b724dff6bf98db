#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "nep/error.hpp"
#include "nep/synth.hpp"
#include "nep/trainer.hpp"

using namespace nep;

namespace {

synth::PlantedGraph two_class_graph(std::uint64_t seed = 7) {
  synth::PlantedSpec spec;
  spec.object_types = {{"user", 300}, {"repository", 120}, {"organization", 12}};
  spec.targeted_type = "user";
  spec.relations = {
      {"creates", "user", "repository", "created_by", 2, 0},
      {"belongs_to", "user", "organization", "includes", 1, 0},
  };
  spec.num_classes = 2;
  spec.homophily = 0.95;
  spec.seed = seed;
  return synth::generate_planted(spec);
}

TrainConfig small_config(Variant v = Variant::kLabel) {
  TrainConfig c;
  c.variant = v;
  c.dim = 8;
  c.batch_size = 32;
  c.iterations = 60;
  c.max_len = 4;
  c.lambda = 0.05;
  c.learning_rate = 0.01;
  c.targeted_type = "user";
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("training config survives its key/value form") {
  auto c = small_config(Variant::kTarget);
  c.linear = true;
  c.lambda = 0.1 + 1e-17;
  c.grad_clip = 0.0;
  c.order = nn::CompositionOrder::kNotation;
  const auto back = TrainConfig::from_map(c.to_map());
  CHECK(back.to_map() == c.to_map());
  CHECK(back.lambda == c.lambda);
  CHECK_THROWS_AS(TrainConfig::from_map({{"dim", "many"}}), Error);

  TrainConfig bad = small_config();
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = small_config();
  bad.targeted_type.clear();
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("variant wiring") {
  CHECK(select_variant(small_config(Variant::kBasic)).embed_all);
  CHECK_FALSE(select_variant(small_config(Variant::kTarget)).embed_all);
  CHECK(select_variant(small_config(Variant::kLabel)).reverse_sampling);
  auto lin = small_config();
  lin.linear = true;
  CHECK(select_variant(lin).link_activation == nn::Activation::kIdentity);
  CHECK(select_variant(lin).hidden_activation == nn::Activation::kIdentity);

  const auto p = two_class_graph();
  const auto basic = init_model(p.graph, p.truth, small_config(Variant::kBasic));
  CHECK(basic.table.rows() == p.graph.num_objects());
  const auto target = init_model(p.graph, p.truth, small_config(Variant::kTarget));
  CHECK(target.table.rows() == 300);
}

TEST_CASE("logged J' equals J_l + lambda J_u' at every step") {
  const auto p = two_class_graph();
  for (const auto v : {Variant::kBasic, Variant::kTarget, Variant::kLabel}) {
    const auto m = train_nep(p.graph, p.truth, small_config(v));
    REQUIRE(m.log.records.size() == 60);
    for (const auto& r : m.log.records)
      CHECK(r.total == doctest::Approx(r.supervised + 0.05 * r.propagation).epsilon(1e-12));
  }
}

TEST_CASE("lambda = 0 leaves every link module untouched") {
  const auto p = two_class_graph();
  auto c = small_config();
  c.lambda = 0.0;
  const auto init = init_model(p.graph, p.truth, c);
  const auto m = train_nep(p.graph, p.truth, c);
  for (std::uint16_t t = 0; t < p.graph.schema().num_link_types(); ++t)
    for (const auto& layer : m.modules.at(LinkTypeId{t}).layers) {
      CHECK(m.params.value(layer.weight) == init.params.value(layer.weight));
      CHECK(m.params.value(*layer.bias) == init.params.value(*layer.bias));
    }
  CHECK(m.params.value(m.predictor.classifier) != init.params.value(m.predictor.classifier));
}

TEST_CASE("J' decreases on a separable planted graph") {
  const auto p = two_class_graph();
  auto c = small_config();
  c.iterations = 300;
  const auto m = train_nep(p.graph, p.truth, c);
  CHECK(m.log.mean_total(250, 300) < m.log.mean_total(0, 50));
  const auto pred = predict_labels(m, p.graph, p.truth.objects());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.objects.size(); ++i) hits += pred.classes[i] == p.truth.classes()[i];
  CHECK(static_cast<double>(hits) / static_cast<double>(pred.objects.size()) > 0.9);
}

TEST_CASE("training is reproducible per seed") {
  const auto p = two_class_graph();
  const auto a = train_nep(p.graph, p.truth, small_config());
  const auto b = train_nep(p.graph, p.truth, small_config());
  CHECK(a.table.values() == b.table.values());
  for (std::uint32_t i = 0; i < a.params.size(); ++i) CHECK(a.params.value(nn::ParamId{i}) == b.params.value(nn::ParamId{i}));
  auto other = small_config();
  other.seed = 12;
  CHECK(train_nep(p.graph, p.truth, other).table.values() != a.table.values());
  CHECK(derive_seed(5, 1) != derive_seed(5, 2));
  CHECK(derive_seed(5, 1) == derive_seed(5, 1));
}

TEST_CASE("only rows that took part in a step move") {
  const auto p = two_class_graph();
  auto c = small_config(Variant::kBasic);
  c.batch_size = 4;
  const auto init = init_model(p.graph, p.truth.subset(std::vector<ObjectIndex>{p.truth.objects()[0], p.truth.objects()[1]}), c);
  Trainer t(p.graph, p.truth.subset(std::vector<ObjectIndex>{p.truth.objects()[0], p.truth.objects()[1]}), c);
  t.step();
  const auto& m = t.model();
  std::size_t moved = 0;
  for (std::size_t r = 0; r < m.table.rows(); ++r) {
    const bool changed = m.table.values().row(static_cast<Eigen::Index>(r)) !=
                         init.table.values().row(static_cast<Eigen::Index>(r));
    if (!m.table.touched(r)) CHECK_FALSE(changed);
    moved += changed;
  }
  CHECK(moved >= 1);
  CHECK(moved <= 2 + 2 * c.batch_size);
}

TEST_CASE("labeled embeddings change during label-variant training") {
  const auto p = two_class_graph();
  const auto init = init_model(p.graph, p.truth, small_config());
  const auto m = train_nep(p.graph, p.truth, small_config());
  for (const auto v : p.truth.objects()) {
    const auto r = static_cast<Eigen::Index>(*m.table.row_of(v));
    CHECK(m.table.values().row(r) != init.table.values().row(r));
  }
}

TEST_CASE("prediction rules") {
  const auto p = two_class_graph();
  const auto m = train_nep(p.graph, p.truth, small_config());
  const auto repo = p.graph.objects_of_type(p.graph.schema().object_type("repository")).front();
  try {
    const std::vector<ObjectIndex> objs{repo};
    predict_labels(m, p.graph, objs);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotTargeted);
  }

  // An untouched row is reported and falls back to the majority class.
  auto copy = train_nep(p.graph, p.truth, small_config());
  const auto v = p.truth.objects()[3];
  copy.table.touched_flags()[*copy.table.row_of(v)] = 0;
  copy.majority_class = 1;
  const std::vector<ObjectIndex> one{v};
  const auto pred = predict_labels(copy, p.graph, one);
  CHECK(pred.uncovered == one);
  CHECK(pred.classes[0] == 1);
}

TEST_CASE("training refuses bad inputs") {
  const auto p = two_class_graph();
  CHECK_THROWS_AS(train_nep(p.graph, LabelSet(), small_config()), Error);
  auto c = small_config();
  c.targeted_type = "repository";
  try {
    train_nep(p.graph, p.truth, c);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotTargeted);
  }
}

TEST_CASE("saved models predict identically after reload") {
  const auto p = two_class_graph();
  const auto m = train_nep(p.graph, p.truth, small_config());
  const auto path = std::filesystem::temp_directory_path() / "nep_trainer_test.ckpt";
  save_model(path, m);
  const auto back = load_model(path, p.graph);
  std::filesystem::remove(path);
  CHECK(back.config.to_map() == m.config.to_map());
  CHECK(back.class_names == m.class_names);
  const auto a = predict_labels(m, p.graph, p.truth.objects());
  const auto b = predict_labels(back, p.graph, p.truth.objects());
  CHECK(a.classes == b.classes);
  CHECK(back.table.values() == m.table.values());

  std::ostringstream emb;
  write_embeddings(emb, m, p.graph);
  std::size_t lines = 0;
  for (const char ch : emb.str()) lines += ch == '\n';
  CHECK(lines == m.table.rows());
}

TEST_CASE("early stopping keeps the best hold-out state") {
  const auto p = two_class_graph();
  auto c = small_config();
  c.iterations = 400;
  c.eval_every = 10;
  c.early_stop_patience = 2;
  Trainer t(p.graph, p.truth, c);
  t.run();
  CHECK(t.fit_labels().size() == p.truth.size() - p.truth.size() / 10);
  CHECK(t.steps_done() <= 400);
  if (t.stopped_early()) CHECK(t.steps_done() < 400);
}

TEST_CASE("observer sees every interval and the final step") {
  const auto p = two_class_graph();
  auto c = small_config();
  c.iterations = 25;
  Trainer t(p.graph, p.truth, c);
  std::vector<std::size_t> seen;
  t.set_observer(10, [&](std::size_t s, const Model&) { seen.push_back(s); });
  t.run();
  CHECK(seen == std::vector<std::size_t>{10, 20, 25});
}
