#include "nep/sampler.hpp"

#include <algorithm>

#include "nep/error.hpp"

namespace nep {

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// --------------------------------------------------------------- MetaPath

MetaPath::MetaPath(std::vector<LinkTypeId> links, const Schema& schema)
    : links_(std::move(links)) {
  for (std::size_t k = 0; k < links_.size(); ++k) {
    const auto& cur = schema.link(links_[k]);
    if (k + 1 < links_.size() && cur.target != schema.link(links_[k + 1]).source) {
      throw Error(ErrorCode::kTypeMismatch,
                  "metapath step '" + cur.name + "' does not compose with '" +
                      schema.link(links_[k + 1]).name + "'");
    }
  }
}

ObjectTypeId MetaPath::source_type(const Schema& schema) const {
  if (links_.empty()) throw Error(ErrorCode::kInvalidArgument, "empty metapath");
  return schema.link(links_.front()).source;
}

ObjectTypeId MetaPath::target_type(const Schema& schema) const {
  if (links_.empty()) throw Error(ErrorCode::kInvalidArgument, "empty metapath");
  return schema.link(links_.back()).target;
}

MetaPath MetaPath::reversed(const Schema& schema) const {
  std::vector<LinkTypeId> out;
  out.reserve(links_.size());
  for (auto it = links_.rbegin(); it != links_.rend(); ++it) out.push_back(schema.dual(*it));
  return MetaPath(std::move(out), schema);
}

MetaPath MetaPath::concat(const MetaPath& tail, const Schema& schema) const {
  std::vector<LinkTypeId> out = links_;
  out.insert(out.end(), tail.links_.begin(), tail.links_.end());
  return MetaPath(std::move(out), schema);
}

std::string MetaPath::to_string(const Schema& schema) const {
  std::string out;
  for (std::size_t k = 0; k < links_.size(); ++k) {
    if (k > 0) out += ',';
    out += schema.link(links_[k]).name;
  }
  return out;
}

bool TypeSet::empty() const {
  return std::none_of(bits_.begin(), bits_.end(), [](bool b) { return b; });
}

// ------------------------------------------------------------------ walks

Path uniform_walk(const HetGraph& graph, ObjectIndex start, std::size_t max_len,
                  const TypeSet& stop_types, Rng& rng) {
  if (max_len == 0) throw Error(ErrorCode::kInvalidArgument, "max path length must be >= 1");
  if (graph.degree(start) == 0)
    throw Error(ErrorCode::kDeadStart,
                "walk cannot start at isolated object '" + graph.id(start) + "'");
  Path path;
  path.source = start;
  path.steps.reserve(max_len);
  ObjectIndex tail = start;
  while (path.steps.size() < max_len) {
    const auto adj = graph.neighbors(tail);
    if (adj.empty()) {
      path.truncated = true;
      break;
    }
    const auto& pick = adj[uniform_index(rng, adj.size())];
    path.steps.push_back({pick.link, pick.object});
    tail = pick.object;
    if (stop_types.contains(graph.type_of(tail))) break;
  }
  return path;
}

MetaPath extract_metapath(const Path& path, const Schema& schema) {
  std::vector<LinkTypeId> links;
  links.reserve(path.steps.size());
  for (const auto& s : path.steps) links.push_back(s.link);
  return MetaPath(std::move(links), schema);
}

Path reverse_path(const Path& path, const Schema& schema) {
  Path out;
  out.truncated = path.truncated;
  out.source = path.destination();
  out.steps.reserve(path.steps.size());
  for (std::size_t k = path.steps.size(); k-- > 0;) {
    const ObjectIndex reached = k == 0 ? path.source : path.steps[k - 1].object;
    out.steps.push_back({schema.dual(path.steps[k].link), reached});
  }
  return out;
}

std::optional<Path> metapath_guided_sample(const HetGraph& graph, const MetaPath& metapath,
                                           std::span<const ObjectIndex> start_pool, Rng& rng,
                                           int max_restarts) {
  if (start_pool.empty()) throw Error(ErrorCode::kInvalidArgument, "empty start pool");
  if (metapath.empty()) throw Error(ErrorCode::kInvalidArgument, "empty metapath");
  const auto start_type = metapath.source_type(graph.schema());
  const auto links = metapath.links();
  for (int attempt = 0; attempt <= max_restarts; ++attempt) {
    Path path;
    path.source = start_pool[uniform_index(rng, start_pool.size())];
    if (graph.type_of(path.source) != start_type)
      throw Error(ErrorCode::kTypeMismatch, "start pool member '" + graph.id(path.source) +
                                                "' does not match the metapath's start type");
    path.steps.reserve(links.size());
    ObjectIndex tail = path.source;
    bool dead_end = false;
    for (const auto link : links) {
      const auto candidates = graph.neighbors(tail, link);
      if (candidates.empty()) {
        dead_end = true;
        break;
      }
      tail = candidates[uniform_index(rng, candidates.size())].object;
      path.steps.push_back({link, tail});
    }
    if (!dead_end) return path;
  }
  return std::nullopt;
}

// ---------------------------------------------------------- BatchSampler

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kBasic: return "basic";
    case Variant::kTarget: return "target";
    case Variant::kLabel: return "label";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "basic") return Variant::kBasic;
  if (name == "target") return Variant::kTarget;
  if (name == "label") return Variant::kLabel;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown variant '" + std::string(name) + "' (expected basic, target or label)");
}

BatchSampler::BatchSampler(const HetGraph& graph, const LabelSet& labels,
                           BatchSamplerConfig config, std::uint64_t seed)
    : graph_(graph), config_(config), rng_(seed) {
  if (config_.batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  if (config_.max_len == 0) throw Error(ErrorCode::kInvalidArgument, "max length must be >= 1");

  auto non_isolated = [&](std::span<const ObjectIndex> objects) {
    std::vector<ObjectIndex> out;
    for (const auto v : objects)
      if (graph_.degree(v) > 0) out.push_back(v);
    return out;
  };

  switch (config_.variant) {
    case Variant::kBasic: {
      std::vector<ObjectIndex> all(graph_.num_objects());
      for (std::size_t v = 0; v < all.size(); ++v) all[v] = static_cast<ObjectIndex>(v);
      seed_pool_ = non_isolated(all);
      if (seed_pool_.empty())
        throw Error(ErrorCode::kInvalidArgument, "graph has no edges to sample from");
      break;
    }
    case Variant::kTarget:
      stop_types_.insert(config_.targeted);
      seed_pool_ = non_isolated(graph_.objects_of_type(config_.targeted));
      if (seed_pool_.empty())
        throw Error(ErrorCode::kInvalidArgument, "no linked objects of the targeted type");
      break;
    case Variant::kLabel:
      if (labels.empty()) throw Error(ErrorCode::kEmptyLabels, "label variant needs labels");
      if (labels.targeted_type() != config_.targeted)
        throw Error(ErrorCode::kNotTargeted, "labels are not on the targeted type");
      stop_types_.insert(config_.targeted);
      seed_pool_ = non_isolated(labels.objects());
      if (seed_pool_.empty())
        throw Error(ErrorCode::kEmptyLabels, "no labeled object has any link");
      break;
  }

  // Guided samples start anywhere of the right type; under `label` they
  // start from labeled objects (and are reversed afterwards).
  pool_by_type_.resize(graph_.schema().num_object_types());
  for (std::size_t t = 0; t < pool_by_type_.size(); ++t) {
    const ObjectTypeId type{static_cast<std::uint16_t>(t)};
    if (config_.variant == Variant::kLabel && type == config_.targeted)
      pool_by_type_[t] = seed_pool_;
    else
      pool_by_type_[t] = non_isolated(graph_.objects_of_type(type));
  }
}

std::optional<Path> BatchSampler::sample_seed() {
  for (int attempt = 0; attempt <= config_.seed_retries; ++attempt) {
    const auto start = seed_pool_[uniform_index(rng_, seed_pool_.size())];
    auto path = uniform_walk(graph_, start, config_.max_len, stop_types_, rng_);
    if (path.length() == 0) continue;
    if (config_.variant != Variant::kBasic &&
        graph_.type_of(path.destination()) != config_.targeted)
      continue;
    return path;
  }
  return std::nullopt;
}

std::optional<PathBatch> BatchSampler::next() {
  auto seed = sample_seed();
  if (!seed) return std::nullopt;
  last_seed_ = *seed;
  const auto& schema = graph_.schema();
  const auto metapath = extract_metapath(*seed, schema);
  const auto& pool = pool_by_type_[metapath.source_type(schema).value];

  PathBatch batch;
  batch.pairs.reserve(config_.batch_size);
  const bool reverse = config_.variant == Variant::kLabel;
  batch.metapath = reverse ? metapath.reversed(schema) : metapath;
  for (std::size_t i = 0; i < config_.batch_size; ++i) {
    auto p = metapath_guided_sample(graph_, metapath, pool, rng_, config_.guided_retries);
    if (!p) continue;  // slot skipped
    if (reverse)
      batch.pairs.emplace_back(p->destination(), p->source);
    else
      batch.pairs.emplace_back(p->source, p->destination());
  }
  return batch;
}

}  // namespace nep
