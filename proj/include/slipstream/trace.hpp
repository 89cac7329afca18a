#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include <json.hpp>

#include "slipstream/core.hpp"

namespace slipstream {

using Json = nlohmann::json;

// One trace line. `node` is -1 for run-wide events.
struct Event {
  std::int64_t round = 0;
  std::int64_t node = -1;
  std::string type;
  Json payload = Json::object();
};

class Trace {
 public:
  void emit(std::int64_t round, std::int64_t node, std::string type, Json payload = Json::object());
  void push(Event e) { events_.push_back(std::move(e)); }

  const std::vector<Event>& events() const { return events_; }
  std::vector<Event>& events() { return events_; }

  std::string to_jsonl() const;
  Hash32 hash() const;  // SHA-256 over the JSONL text
  void write(const std::string& path) const;
  static Trace from_jsonl(std::istream& in);
  static Trace read(const std::string& path);

 private:
  std::vector<Event> events_;
};

Json event_to_json(const Event& e);
Event event_from_json(const Json& j);

}  // namespace slipstream
