#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nep {

struct ObjectTypeId {
  std::uint16_t value = 0;
  auto operator<=>(const ObjectTypeId&) const = default;
};

struct LinkTypeId {
  std::uint16_t value = 0;
  auto operator<=>(const LinkTypeId&) const = default;
};

using ObjectIndex = std::uint32_t;
using ClassId = std::int32_t;

struct LinkTypeInfo {
  std::string name;
  ObjectTypeId source;
  ObjectTypeId target;
  LinkTypeId dual;
};

/// Object types plus directional link types. Every link type is declared
/// together with its dual (the reverse traversal direction); a link type
/// whose dual is itself is allowed only between objects of the same type.
///
/// Text format, one declaration per line, `#` starts a comment:
///
///     object user
///     object repository
///     link creates user repository created_by
class Schema {
 public:
  ObjectTypeId add_object_type(std::string name);

  /// Declares `name` (source -> target) and `dual_name` (target -> source).
  /// Re-declaring an existing pair with consistent endpoints is a no-op.
  LinkTypeId add_link_type(std::string name, std::string_view source,
                           std::string_view target, std::string dual_name);

  std::size_t num_object_types() const { return object_types_.size(); }
  std::size_t num_link_types() const { return link_types_.size(); }

  const std::string& object_type_name(ObjectTypeId t) const;
  const LinkTypeInfo& link(LinkTypeId t) const;
  LinkTypeId dual(LinkTypeId t) const { return link(t).dual; }

  std::optional<ObjectTypeId> find_object_type(std::string_view name) const;
  std::optional<LinkTypeId> find_link_type(std::string_view name) const;
  ObjectTypeId object_type(std::string_view name) const;  // throws kUnknownType
  LinkTypeId link_type(std::string_view name) const;      // throws kUnknownType

  static Schema parse(std::istream& in);
  static Schema load(const std::filesystem::path& path);
  void write(std::ostream& out) const;

 private:
  std::vector<std::string> object_types_;
  std::vector<LinkTypeInfo> link_types_;
};

struct Neighbor {
  LinkTypeId link;
  ObjectIndex object;
  auto operator<=>(const Neighbor&) const = default;
};

/// Immutable typed multigraph in CSR form. Each input edge (u, t, v) is
/// stored twice: as (u, t, v) and as (v, dual(t), u). Adjacency lists are
/// sorted by (link type, neighbor), so the neighbors reached through one
/// link type form a contiguous run.
class HetGraph {
 public:
  class Builder;

  const Schema& schema() const { return schema_; }
  std::size_t num_objects() const { return types_.size(); }
  /// Number of stored directed adjacency entries (twice the input edges).
  std::size_t num_adjacency_entries() const { return adjacency_.size(); }

  ObjectTypeId type_of(ObjectIndex v) const;
  std::size_t degree(ObjectIndex v) const;
  std::span<const Neighbor> neighbors(ObjectIndex v) const;
  std::span<const Neighbor> neighbors(ObjectIndex v, LinkTypeId link) const;

  const std::string& id(ObjectIndex v) const;
  std::optional<ObjectIndex> find(std::string_view id) const;
  ObjectIndex index_of(std::string_view id) const;  // throws kUnknownObject

  std::span<const ObjectIndex> objects_of_type(ObjectTypeId t) const;

  void write_nodes(std::ostream& out) const;
  /// Writes each input edge once, in its canonical direction (the member of
  /// a dual pair with the smaller id; self-dual edges with src < dst).
  void write_edges(std::ostream& out) const;

 private:
  HetGraph() = default;
  void check_index(ObjectIndex v) const;

  Schema schema_;
  std::vector<ObjectTypeId> types_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, ObjectIndex> index_;
  std::vector<std::size_t> offsets_;
  std::vector<Neighbor> adjacency_;
  std::vector<std::vector<ObjectIndex>> by_type_;
};

class HetGraph::Builder {
 public:
  explicit Builder(Schema schema);

  ObjectIndex add_node(std::string id, std::string_view type_name);
  ObjectIndex add_node(std::string id, ObjectTypeId type);
  void add_edge(std::string_view src_id, std::string_view link_name,
                std::string_view dst_id);
  void add_edge(ObjectIndex src, LinkTypeId link, ObjectIndex dst);

  const Schema& schema() const { return schema_; }
  std::size_t num_objects() const { return types_.size(); }

  HetGraph build() &&;

 private:
  Schema schema_;
  std::vector<ObjectTypeId> types_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, ObjectIndex> index_;
  std::vector<std::pair<ObjectIndex, Neighbor>> edges_;
};

/// Nodes: `id<TAB>object_type`; edges: `src_id<TAB>link_type<TAB>dst_id`.
/// Blank lines and lines starting with `#` are skipped in both.
HetGraph read_graph(std::istream& nodes, std::istream& edges, Schema schema);
HetGraph load_graph(const std::filesystem::path& nodes,
                    const std::filesystem::path& edges, Schema schema);

/// Ground-truth labels on objects of a single targeted type.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(ObjectTypeId targeted, std::vector<std::string> class_names,
           std::vector<std::pair<ObjectIndex, ClassId>> entries);

  ObjectTypeId targeted_type() const { return targeted_; }
  std::size_t num_classes() const { return class_names_.size(); }
  const std::vector<std::string>& class_names() const { return class_names_; }

  std::size_t size() const { return objects_.size(); }
  bool empty() const { return objects_.empty(); }
  /// Labeled objects, ascending.
  std::span<const ObjectIndex> objects() const { return objects_; }
  std::span<const ClassId> classes() const { return classes_; }

  std::optional<ClassId> find(ObjectIndex v) const;
  ClassId label(ObjectIndex v) const;  // throws kUnknownObject
  bool contains(ObjectIndex v) const { return find(v).has_value(); }

  /// Restriction to `objects` (each must be labeled); class names kept.
  LabelSet subset(std::span<const ObjectIndex> objects) const;

  std::vector<std::size_t> class_counts() const;

  void write(std::ostream& out, const HetGraph& graph) const;

 private:
  ObjectTypeId targeted_;
  std::vector<std::string> class_names_;
  std::vector<ObjectIndex> objects_;
  std::vector<ClassId> classes_;
};

/// Labels: `id<TAB>class_name`. Class ids are assigned in sorted name order.
LabelSet read_labels(std::istream& in, const HetGraph& graph,
                     std::string_view targeted_type);
LabelSet load_labels(const std::filesystem::path& path, const HetGraph& graph,
                     std::string_view targeted_type);

}  // namespace nep
