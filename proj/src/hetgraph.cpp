#include "nep/hetgraph.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "nep/error.hpp"
#include "text_util.hpp"

namespace nep {

// ---------------------------------------------------------------- Schema

ObjectTypeId Schema::add_object_type(std::string name) {
  if (name.empty()) throw Error(ErrorCode::kInvalidArgument, "empty object type name");
  if (auto existing = find_object_type(name)) return *existing;
  if (object_types_.size() >= 0xFFFF)
    throw Error(ErrorCode::kInvalidArgument, "too many object types");
  object_types_.push_back(std::move(name));
  return ObjectTypeId{static_cast<std::uint16_t>(object_types_.size() - 1)};
}

LinkTypeId Schema::add_link_type(std::string name, std::string_view source,
                                 std::string_view target, std::string dual_name) {
  const auto src = object_type(source);
  const auto dst = object_type(target);
  if (name.empty() || dual_name.empty())
    throw Error(ErrorCode::kInvalidArgument, "empty link type name");

  if (auto existing = find_link_type(name)) {
    const auto& info = link_types_[existing->value];
    if (info.source != src || info.target != dst ||
        link_types_[info.dual.value].name != dual_name) {
      throw Error(ErrorCode::kTypeMismatch,
                  "conflicting redeclaration of link type '" + name + "'");
    }
    return *existing;
  }
  if (find_link_type(dual_name))
    throw Error(ErrorCode::kTypeMismatch,
                "dual '" + dual_name + "' of '" + name + "' already bound to another link type");
  if (link_types_.size() + 2 > 0xFFFF)
    throw Error(ErrorCode::kInvalidArgument, "too many link types");

  const auto id = LinkTypeId{static_cast<std::uint16_t>(link_types_.size())};
  if (dual_name == name) {
    if (src != dst)
      throw Error(ErrorCode::kTypeMismatch,
                  "self-dual link type '" + name + "' must join one object type");
    link_types_.push_back({std::move(name), src, dst, id});
    return id;
  }
  const auto dual_id = LinkTypeId{static_cast<std::uint16_t>(id.value + 1)};
  link_types_.push_back({std::move(name), src, dst, dual_id});
  link_types_.push_back({std::move(dual_name), dst, src, id});
  return id;
}

const std::string& Schema::object_type_name(ObjectTypeId t) const {
  if (t.value >= object_types_.size())
    throw Error(ErrorCode::kOutOfRange, "object type id out of range");
  return object_types_[t.value];
}

const LinkTypeInfo& Schema::link(LinkTypeId t) const {
  if (t.value >= link_types_.size())
    throw Error(ErrorCode::kOutOfRange, "link type id out of range");
  return link_types_[t.value];
}

std::optional<ObjectTypeId> Schema::find_object_type(std::string_view name) const {
  for (std::size_t i = 0; i < object_types_.size(); ++i)
    if (object_types_[i] == name) return ObjectTypeId{static_cast<std::uint16_t>(i)};
  return std::nullopt;
}

std::optional<LinkTypeId> Schema::find_link_type(std::string_view name) const {
  for (std::size_t i = 0; i < link_types_.size(); ++i)
    if (link_types_[i].name == name) return LinkTypeId{static_cast<std::uint16_t>(i)};
  return std::nullopt;
}

ObjectTypeId Schema::object_type(std::string_view name) const {
  if (auto t = find_object_type(name)) return *t;
  throw Error(ErrorCode::kUnknownType, "unknown object type '" + std::string(name) + "'");
}

LinkTypeId Schema::link_type(std::string_view name) const {
  if (auto t = find_link_type(name)) return *t;
  throw Error(ErrorCode::kUnknownType, "unknown link type '" + std::string(name) + "'");
}

Schema Schema::parse(std::istream& in) {
  Schema schema;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_skippable(line)) continue;
    const auto tok = detail::tokens(line);
    if (tok[0] == "object" && tok.size() == 2) {
      schema.add_object_type(std::string(tok[1]));
    } else if (tok[0] == "link" && tok.size() == 5) {
      schema.add_link_type(std::string(tok[1]), tok[2], tok[3], std::string(tok[4]));
    } else {
      throw Error(ErrorCode::kParse,
                  detail::location("schema", line_no) + ": expected 'object <name>' or "
                  "'link <name> <source> <target> <dual>'");
    }
  }
  return schema;
}

Schema Schema::load(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return parse(in);
}

void Schema::write(std::ostream& out) const {
  for (const auto& name : object_types_) out << "object " << name << '\n';
  for (std::size_t i = 0; i < link_types_.size(); ++i) {
    const auto& info = link_types_[i];
    if (info.dual.value < i) continue;
    out << "link " << info.name << ' ' << object_types_[info.source.value] << ' '
        << object_types_[info.target.value] << ' ' << link_types_[info.dual.value].name
        << '\n';
  }
}

// -------------------------------------------------------------- HetGraph

void HetGraph::check_index(ObjectIndex v) const {
  if (v >= types_.size())
    throw Error(ErrorCode::kOutOfRange,
                "object index " + std::to_string(v) + " out of range");
}

ObjectTypeId HetGraph::type_of(ObjectIndex v) const {
  check_index(v);
  return types_[v];
}

std::size_t HetGraph::degree(ObjectIndex v) const {
  check_index(v);
  return offsets_[v + 1] - offsets_[v];
}

std::span<const Neighbor> HetGraph::neighbors(ObjectIndex v) const {
  check_index(v);
  return {adjacency_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
}

std::span<const Neighbor> HetGraph::neighbors(ObjectIndex v, LinkTypeId link) const {
  const auto all = neighbors(v);
  const auto lo = std::lower_bound(all.begin(), all.end(), Neighbor{link, 0});
  auto hi = lo;
  while (hi != all.end() && hi->link == link) ++hi;
  return {all.data() + (lo - all.begin()), static_cast<std::size_t>(hi - lo)};
}

const std::string& HetGraph::id(ObjectIndex v) const {
  check_index(v);
  return ids_[v];
}

std::optional<ObjectIndex> HetGraph::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ObjectIndex HetGraph::index_of(std::string_view id) const {
  if (auto v = find(id)) return *v;
  throw Error(ErrorCode::kUnknownObject, "unknown object id '" + std::string(id) + "'");
}

std::span<const ObjectIndex> HetGraph::objects_of_type(ObjectTypeId t) const {
  if (t.value >= by_type_.size())
    throw Error(ErrorCode::kOutOfRange, "object type id out of range");
  return by_type_[t.value];
}

void HetGraph::write_nodes(std::ostream& out) const {
  for (std::size_t v = 0; v < types_.size(); ++v)
    out << ids_[v] << '\t' << schema_.object_type_name(types_[v]) << '\n';
}

void HetGraph::write_edges(std::ostream& out) const {
  for (ObjectIndex u = 0; u < types_.size(); ++u) {
    for (const auto& n : neighbors(u)) {
      const auto dual = schema_.dual(n.link);
      const bool canonical = dual == n.link ? u < n.object : n.link < dual;
      if (!canonical) continue;
      out << ids_[u] << '\t' << schema_.link(n.link).name << '\t' << ids_[n.object] << '\n';
    }
  }
}

HetGraph::Builder::Builder(Schema schema) : schema_(std::move(schema)) {}

ObjectIndex HetGraph::Builder::add_node(std::string id, std::string_view type_name) {
  return add_node(std::move(id), schema_.object_type(type_name));
}

ObjectIndex HetGraph::Builder::add_node(std::string id, ObjectTypeId type) {
  if (type.value >= schema_.num_object_types())
    throw Error(ErrorCode::kUnknownType, "object type id out of range");
  if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "empty node id");
  const auto index = static_cast<ObjectIndex>(types_.size());
  if (!index_.emplace(id, index).second)
    throw Error(ErrorCode::kDuplicateNode, "duplicate node id '" + id + "'");
  types_.push_back(type);
  ids_.push_back(std::move(id));
  return index;
}

void HetGraph::Builder::add_edge(std::string_view src_id, std::string_view link_name,
                                 std::string_view dst_id) {
  const auto link = schema_.link_type(link_name);
  const auto src = index_.find(std::string(src_id));
  const auto dst = index_.find(std::string(dst_id));
  if (src == index_.end() || dst == index_.end()) {
    throw Error(ErrorCode::kDanglingEdge,
                "edge (" + std::string(src_id) + ", " + std::string(link_name) + ", " +
                    std::string(dst_id) + ") references an undeclared node");
  }
  add_edge(src->second, link, dst->second);
}

void HetGraph::Builder::add_edge(ObjectIndex src, LinkTypeId link, ObjectIndex dst) {
  if (src >= types_.size() || dst >= types_.size())
    throw Error(ErrorCode::kDanglingEdge, "edge endpoint index out of range");
  const auto& info = schema_.link(link);
  if (types_[src] != info.source || types_[dst] != info.target) {
    throw Error(ErrorCode::kTypeMismatch,
                "edge (" + ids_[src] + ", " + info.name + ", " + ids_[dst] +
                    ") joins " + schema_.object_type_name(types_[src]) + " -> " +
                    schema_.object_type_name(types_[dst]) + " but '" + info.name +
                    "' requires " + schema_.object_type_name(info.source) + " -> " +
                    schema_.object_type_name(info.target));
  }
  if (src == dst)
    throw Error(ErrorCode::kSelfLoop, "self loop on '" + ids_[src] + "' rejected");
  edges_.emplace_back(src, Neighbor{link, dst});
  edges_.emplace_back(dst, Neighbor{info.dual, src});
}

HetGraph HetGraph::Builder::build() && {
  HetGraph g;
  const auto n = types_.size();
  g.offsets_.assign(n + 1, 0);
  for (const auto& [u, nb] : edges_) ++g.offsets_[u + 1];
  for (std::size_t v = 0; v < n; ++v) g.offsets_[v + 1] += g.offsets_[v];
  g.adjacency_.resize(edges_.size());
  auto cursor = g.offsets_;
  for (const auto& [u, nb] : edges_) g.adjacency_[cursor[u]++] = nb;
  for (std::size_t v = 0; v < n; ++v)
    std::sort(g.adjacency_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[v]),
              g.adjacency_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[v + 1]));

  g.by_type_.resize(schema_.num_object_types());
  for (std::size_t v = 0; v < n; ++v)
    g.by_type_[types_[v].value].push_back(static_cast<ObjectIndex>(v));

  g.schema_ = std::move(schema_);
  g.types_ = std::move(types_);
  g.ids_ = std::move(ids_);
  g.index_ = std::move(index_);
  edges_.clear();
  return g;
}

HetGraph read_graph(std::istream& nodes, std::istream& edges, Schema schema) {
  HetGraph::Builder builder(std::move(schema));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(nodes, line)) {
    ++line_no;
    if (detail::is_skippable(line)) continue;
    const auto f = detail::fields(line);
    if (f.size() != 2)
      throw Error(ErrorCode::kParse,
                  detail::location("nodes", line_no) + ": expected id<TAB>object_type");
    builder.add_node(std::string(f[0]), f[1]);
  }
  line_no = 0;
  while (std::getline(edges, line)) {
    ++line_no;
    if (detail::is_skippable(line)) continue;
    const auto f = detail::fields(line);
    if (f.size() != 3)
      throw Error(ErrorCode::kParse, detail::location("edges", line_no) +
                                         ": expected src_id<TAB>link_type<TAB>dst_id");
    try {
      builder.add_edge(f[0], f[1], f[2]);
    } catch (const Error& e) {
      throw Error(e.code(), detail::location("edges", line_no) + ": " + e.what());
    }
  }
  return std::move(builder).build();
}

HetGraph load_graph(const std::filesystem::path& nodes, const std::filesystem::path& edges,
                    Schema schema) {
  auto n = detail::open_input(nodes);
  auto e = detail::open_input(edges);
  return read_graph(n, e, std::move(schema));
}

// -------------------------------------------------------------- LabelSet

LabelSet::LabelSet(ObjectTypeId targeted, std::vector<std::string> class_names,
                   std::vector<std::pair<ObjectIndex, ClassId>> entries)
    : targeted_(targeted), class_names_(std::move(class_names)) {
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto [v, c] = entries[i];
    if (i > 0 && entries[i - 1].first == v)
      throw Error(ErrorCode::kInvalidArgument,
                  "object " + std::to_string(v) + " carries two different labels");
    if (c < 0 || static_cast<std::size_t>(c) >= class_names_.size())
      throw Error(ErrorCode::kOutOfRange, "class id " + std::to_string(c) + " out of range");
    objects_.push_back(v);
    classes_.push_back(c);
  }
}

std::optional<ClassId> LabelSet::find(ObjectIndex v) const {
  const auto it = std::lower_bound(objects_.begin(), objects_.end(), v);
  if (it == objects_.end() || *it != v) return std::nullopt;
  return classes_[static_cast<std::size_t>(it - objects_.begin())];
}

ClassId LabelSet::label(ObjectIndex v) const {
  if (auto c = find(v)) return *c;
  throw Error(ErrorCode::kUnknownObject, "object " + std::to_string(v) + " is unlabeled");
}

LabelSet LabelSet::subset(std::span<const ObjectIndex> objects) const {
  std::vector<std::pair<ObjectIndex, ClassId>> entries;
  entries.reserve(objects.size());
  for (const auto v : objects) entries.emplace_back(v, label(v));
  return LabelSet(targeted_, class_names_, std::move(entries));
}

std::vector<std::size_t> LabelSet::class_counts() const {
  std::vector<std::size_t> counts(class_names_.size(), 0);
  for (const auto c : classes_) ++counts[static_cast<std::size_t>(c)];
  return counts;
}

void LabelSet::write(std::ostream& out, const HetGraph& graph) const {
  for (std::size_t i = 0; i < objects_.size(); ++i)
    out << graph.id(objects_[i]) << '\t' << class_names_[static_cast<std::size_t>(classes_[i])]
        << '\n';
}

LabelSet read_labels(std::istream& in, const HetGraph& graph, std::string_view targeted_type) {
  const auto targeted = graph.schema().object_type(targeted_type);
  std::vector<std::pair<ObjectIndex, std::string>> raw;
  std::set<std::string> names;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_skippable(line)) continue;
    const auto f = detail::fields(line);
    if (f.size() != 2)
      throw Error(ErrorCode::kParse,
                  detail::location("labels", line_no) + ": expected id<TAB>class_name");
    const auto v = graph.find(f[0]);
    if (!v)
      throw Error(ErrorCode::kUnknownObject, detail::location("labels", line_no) +
                                                 ": unknown object id '" + std::string(f[0]) +
                                                 "'");
    if (graph.type_of(*v) != targeted)
      throw Error(ErrorCode::kNotTargeted,
                  detail::location("labels", line_no) + ": object '" + std::string(f[0]) +
                      "' has type " + graph.schema().object_type_name(graph.type_of(*v)) +
                      ", not the targeted type " + std::string(targeted_type));
    raw.emplace_back(*v, std::string(f[1]));
    names.insert(std::string(f[1]));
  }
  std::vector<std::string> class_names(names.begin(), names.end());
  std::map<std::string, ClassId, std::less<>> ids;
  for (std::size_t i = 0; i < class_names.size(); ++i)
    ids.emplace(class_names[i], static_cast<ClassId>(i));
  std::vector<std::pair<ObjectIndex, ClassId>> entries;
  entries.reserve(raw.size());
  for (const auto& [v, name] : raw) entries.emplace_back(v, ids.at(name));
  return LabelSet(targeted, std::move(class_names), std::move(entries));
}

LabelSet load_labels(const std::filesystem::path& path, const HetGraph& graph,
                     std::string_view targeted_type) {
  auto in = detail::open_input(path);
  return read_labels(in, graph, targeted_type);
}

}  // namespace nep
