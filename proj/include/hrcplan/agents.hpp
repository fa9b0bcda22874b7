#pragma once

#include <string>
#include <vector>

#include "hrcplan/ids.hpp"

namespace hrcplan {

/// A logical agent: one arm, one mobile base, one operator...
struct AgentSpec {
  AgentId id;
  std::string agent_class;  // e.g. "human-operator", "arm", "mobile-base"
  double gesture_miss_probability = 0.0;

  bool human() const noexcept { return agent_class == "human-operator"; }
  bool operator==(const AgentSpec&) const = default;
};

/// An agent qualifies when its id or its class appears in the tag list.
inline bool is_eligible(const AgentSpec& agent, const std::vector<std::string>& tags) {
  for (const auto& t : tags)
    if (t == agent.id.str() || t == agent.agent_class) return true;
  return false;
}

}  // namespace hrcplan
