#include "slipstream/trace.hpp"

#include <fstream>
#include <sstream>

namespace slipstream {

void Trace::emit(std::int64_t round, std::int64_t node, std::string type, Json payload) {
  events_.push_back({round, node, std::move(type), std::move(payload)});
}

Json event_to_json(const Event& e) {
  return Json{{"round", e.round}, {"node", e.node}, {"type", e.type}, {"payload", e.payload}};
}

Event event_from_json(const Json& j) {
  Event e;
  e.round = j.at("round").get<std::int64_t>();
  e.node = j.at("node").get<std::int64_t>();
  e.type = j.at("type").get<std::string>();
  e.payload = j.value("payload", Json::object());
  return e;
}

std::string Trace::to_jsonl() const {
  std::string out;
  for (const auto& e : events_) {
    out += event_to_json(e).dump();
    out += '\n';
  }
  return out;
}

Hash32 Trace::hash() const {
  std::string text = to_jsonl();
  return sha256(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                              text.size()));
}

void Trace::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Parse, "cannot write " + path);
  out << to_jsonl();
}

Trace Trace::from_jsonl(std::istream& in) {
  Trace t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      t.events_.push_back(event_from_json(Json::parse(line)));
    } catch (const Json::exception& ex) {
      throw Error(ErrorCode::Parse, "trace line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return t;
}

Trace Trace::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Parse, "cannot read " + path);
  return from_jsonl(in);
}

}  // namespace slipstream
