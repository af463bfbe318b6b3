#include <map>
#include <set>

#include "rmsd/sim/sim.hpp"

namespace rmsd::sim {

std::string_view property_name(Property p) {
  switch (p) {
    case Property::ElectionSafety: return "ElectionSafety";
    case Property::LogMatching: return "LogMatching";
    case Property::LeaderCompleteness: return "LeaderCompleteness";
    case Property::StateMachineSafety: return "StateMachineSafety";
    case Property::PrivacySeparation: return "PrivacySeparation";
  }
  return "Unknown";
}

namespace {

struct Commit {
  std::uint64_t height;
  std::uint64_t at_term;
  std::string hash;
  std::size_t index;
};

std::string num(std::uint64_t v) { return std::to_string(v); }

}  // namespace

std::optional<TraceViolation> check_trace(const Trace& trace, std::span<const Property> properties) {
  auto enabled = [&](Property p) {
    return std::find(properties.begin(), properties.end(), p) != properties.end();
  };
  // Sentinels are collected up front so a leak is caught wherever it sits in the trace.
  std::vector<std::string> sentinels;
  for (const auto& e : trace.events)
    if (e.value("ev", "") == "personal")
      for (const auto& f : e.at("fields")) sentinels.push_back(f.get<std::string>());

  std::map<std::uint64_t, std::uint64_t> leader_of_term;
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::string> entry_at;  // (height, term)
  std::map<std::uint64_t, std::string> committed_hash;
  std::map<std::string, std::string> digest_of;
  std::vector<Commit> commits;

  for (std::size_t k = 0; k < trace.events.size(); ++k) {
    const auto& e = trace.events[k];
    const auto ev = e.value("ev", "");
    if (ev == "leader") {
      auto term = e.at("term").get<std::uint64_t>();
      auto node = e.at("node").get<std::uint64_t>();
      if (enabled(Property::ElectionSafety)) {
        auto [it, fresh] = leader_of_term.emplace(term, node);
        if (!fresh && it->second != node)
          return TraceViolation{Property::ElectionSafety, k,
                                "nodes " + num(it->second) + " and " + num(node) +
                                    " both led term " + num(term)};
      }
      if (enabled(Property::LeaderCompleteness)) {
        const auto& log = e.at("log");
        for (const auto& c : commits) {
          if (term <= c.at_term) continue;
          if (c.height >= log.size() || log[c.height].get<std::string>() != c.hash)
            return TraceViolation{Property::LeaderCompleteness, k,
                                  "leader " + num(node) + " of term " + num(term) +
                                      " lacks committed height " + num(c.height) +
                                      " (committed at event " + num(c.index) + ")"};
        }
      }
    } else if (ev == "append") {
      if (!enabled(Property::LogMatching)) continue;
      auto key = std::make_pair(e.at("height").get<std::uint64_t>(), e.at("term").get<std::uint64_t>());
      auto hash = e.at("hash").get<std::string>();
      auto [it, fresh] = entry_at.emplace(key, hash);
      if (!fresh && it->second != hash)
        return TraceViolation{Property::LogMatching, k,
                              "two different entries at height " + num(key.first) + " term " +
                                  num(key.second)};
    } else if (ev == "commit") {
      auto height = e.at("height").get<std::uint64_t>();
      auto hash = e.at("hash").get<std::string>();
      auto digest = e.at("digest").get<std::string>();
      commits.push_back({height, e.value("at_term", e.at("term").get<std::uint64_t>()), hash, k});
      if (enabled(Property::StateMachineSafety)) {
        auto [it, fresh] = committed_hash.emplace(height, hash);
        if (!fresh && it->second != hash)
          return TraceViolation{Property::StateMachineSafety, k,
                                "node " + num(e.at("node").get<std::uint64_t>()) +
                                    " committed a different block at height " + num(height)};
        auto [dit, dfresh] = digest_of.emplace(hash, digest);
        if (!dfresh && dit->second != digest)
          return TraceViolation{Property::StateMachineSafety, k,
                                "state digest diverges after block " + hash};
      }
      if (enabled(Property::PrivacySeparation) && !sentinels.empty()) {
        auto raw = from_base64(e.at("block").get<std::string>());
        if (!raw)
          return TraceViolation{Property::PrivacySeparation, k, "undecodable block in trace"};
        std::string_view bytes(reinterpret_cast<const char*>(raw->data()), raw->size());
        for (const auto& s : sentinels)
          if (bytes.find(s) != std::string_view::npos)
            return TraceViolation{Property::PrivacySeparation, k,
                                  "personal field found in committed block at height " +
                                      num(height)};
      }
    }
  }
  return std::nullopt;
}

}  // namespace rmsd::sim
