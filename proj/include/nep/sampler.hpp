#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nep/hetgraph.hpp"

namespace nep {

using Rng = std::mt19937_64;

/// Uniform draw from [0, n). `n` must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

struct PathStep {
  LinkTypeId link;
  ObjectIndex object;  // object reached by this step
  auto operator<=>(const PathStep&) const = default;
};

/// A walk (v_i, e_1, ..., e_n, v_j). `truncated` marks a walk that hit a
/// degree-0 object before its stopping condition.
struct Path {
  ObjectIndex source = 0;
  std::vector<PathStep> steps;
  bool truncated = false;

  std::size_t length() const { return steps.size(); }
  ObjectIndex destination() const { return steps.empty() ? source : steps.back().object; }
  bool operator==(const Path&) const = default;
  auto operator<=>(const Path&) const = default;
};

class MetaPath {
 public:
  MetaPath() = default;
  /// Validates composability against the schema (throws kTypeMismatch).
  MetaPath(std::vector<LinkTypeId> links, const Schema& schema);

  std::span<const LinkTypeId> links() const { return links_; }
  std::size_t length() const { return links_.size(); }
  bool empty() const { return links_.empty(); }
  ObjectTypeId source_type(const Schema& schema) const;
  ObjectTypeId target_type(const Schema& schema) const;

  /// Reversed order with every link replaced by its dual.
  MetaPath reversed(const Schema& schema) const;
  MetaPath concat(const MetaPath& tail, const Schema& schema) const;
  /// Comma-joined link type names.
  std::string to_string(const Schema& schema) const;

  bool operator==(const MetaPath&) const = default;
  auto operator<=>(const MetaPath&) const = default;

 private:
  std::vector<LinkTypeId> links_;
};

/// Set of object types that end a uniform walk.
class TypeSet {
 public:
  TypeSet() = default;
  TypeSet(std::initializer_list<ObjectTypeId> types) {
    for (auto t : types) insert(t);
  }
  void insert(ObjectTypeId t) {
    if (t.value >= bits_.size()) bits_.resize(t.value + 1u, false);
    bits_[t.value] = true;
  }
  bool contains(ObjectTypeId t) const { return t.value < bits_.size() && bits_[t.value]; }
  bool empty() const;

 private:
  std::vector<bool> bits_;
};

/// Uniform random walk: every step picks one of the tail's incident links
/// with probability 1/deg. Stops as soon as the newly reached object's type
/// is in `stop_types`, otherwise after `max_len` links.
Path uniform_walk(const HetGraph& graph, ObjectIndex start, std::size_t max_len,
                  const TypeSet& stop_types, Rng& rng);

MetaPath extract_metapath(const Path& path, const Schema& schema);

Path reverse_path(const Path& path, const Schema& schema);

inline constexpr int kGuidedRetries = 20;

/// Walk that follows `metapath` exactly, choosing uniformly among the
/// incident links of the required type at each step. The start is drawn
/// uniformly from `start_pool`; a dead end triggers a restart from a fresh
/// start, up to `max_restarts` times.
std::optional<Path> metapath_guided_sample(const HetGraph& graph, const MetaPath& metapath,
                                           std::span<const ObjectIndex> start_pool, Rng& rng,
                                           int max_restarts = kGuidedRetries);

enum class Variant { kBasic, kTarget, kLabel };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

/// (source, destination) pairs that all realize one metapath.
struct PathBatch {
  MetaPath metapath;
  std::vector<std::pair<ObjectIndex, ObjectIndex>> pairs;
  std::size_t size() const { return pairs.size(); }
};

struct BatchSamplerConfig {
  Variant variant = Variant::kLabel;
  std::size_t batch_size = 1000;  // B
  std::size_t max_len = 5;        // L
  ObjectTypeId targeted;
  int seed_retries = kGuidedRetries;
  int guided_retries = kGuidedRetries;
};

/// Two-step path sampling: each call to next() samples one seed walk,
/// takes its metapath, then fills a batch with up to B guided samples of
/// that metapath.
///
///   basic  seeds from any non-isolated object, walks exactly L links;
///   target seeds from a targeted object and stops at targeted objects;
///   label  seeds from a labeled object, stops at targeted objects, and
///          emits reversed paths so every destination is labeled.
///
/// Seeds that do not end at a targeted object (target/label) are discarded
/// and redrawn up to `seed_retries` times.
class BatchSampler {
 public:
  BatchSampler(const HetGraph& graph, const LabelSet& labels, BatchSamplerConfig config,
               std::uint64_t seed);

  /// Nullopt when no usable seed walk was found within the retry budget.
  std::optional<PathBatch> next();

  /// The walk that selected the most recent batch's metapath.
  const Path& last_seed() const { return last_seed_; }
  const BatchSamplerConfig& config() const { return config_; }

 private:
  std::optional<Path> sample_seed();

  const HetGraph& graph_;
  BatchSamplerConfig config_;
  Rng rng_;
  TypeSet stop_types_;
  std::vector<ObjectIndex> seed_pool_;
  std::vector<std::vector<ObjectIndex>> pool_by_type_;
  Path last_seed_;
};

}  // namespace nep
