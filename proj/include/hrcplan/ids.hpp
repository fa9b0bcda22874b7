#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <ostream>
#include <string>
#include <utility>

namespace hrcplan {

/// String-backed identifier, distinct per domain via the tag type.
template <class Tag>
class Id {
public:
  Id() = default;
  explicit Id(std::string value) : value_(std::move(value)) {}
  explicit Id(const char* value) : value_(value) {}

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  auto operator<=>(const Id&) const = default;
  bool operator==(const Id&) const = default;

private:
  std::string value_;
};

template <class Tag>
std::ostream& operator<<(std::ostream& os, const Id<Tag>& id) {
  return os << id.str();
}

struct NodeTag {};
struct HyperArcTag {};
struct ActionTag {};
struct GraphTag {};
struct AgentTag {};
struct ItemTag {};

using NodeId = Id<NodeTag>;
using HyperArcId = Id<HyperArcTag>;
using ActionId = Id<ActionTag>;
using GraphId = Id<GraphTag>;
using AgentId = Id<AgentTag>;
using ItemId = Id<ItemTag>;

}  // namespace hrcplan

template <class Tag>
struct std::hash<hrcplan::Id<Tag>> {
  std::size_t operator()(const hrcplan::Id<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
