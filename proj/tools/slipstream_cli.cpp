#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "slipstream/harness.hpp"

using namespace slipstream;

namespace {

#ifndef SLIPSTREAM_SCENARIO_DIR
#define SLIPSTREAM_SCENARIO_DIR "scenarios"
#endif

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Json report_json(const std::vector<PropertyReport>& reps, const std::string& hash) {
  Json props = Json::array();
  for (const auto& r : reps) props.push_back(r.to_json());
  return {{"pass", all_pass(reps)}, {"trace_hash", hash}, {"properties", props}};
}

void print_table(const std::vector<PropertyReport>& reps) {
  for (const auto& r : reps) {
    const char* verdict = !r.applicable ? "n/a " : r.pass ? "ok  " : "FAIL";
    std::cout << "  " << verdict << " " << r.property << " (" << r.checked << " checks)";
    if (r.first) std::cout << " round " << r.first->round << ": " << r.first->detail;
    std::cout << "\n";
  }
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Parse, "cannot write " + path);
  out << j.dump(2) << "\n";
}

std::pair<std::uint64_t, std::uint64_t> parse_range(const std::string& r) {
  auto dots = r.find("..");
  if (dots == std::string::npos) {
    auto v = std::stoull(r);
    return {v, v};
  }
  return {std::stoull(r.substr(0, dots)), std::stoull(r.substr(dots + 2))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slipstream simulator"};
  app.require_subcommand(1);

  std::string scenario_path, trace_path, report_path, properties, seeds, dir = SLIPSTREAM_SCENARIO_DIR;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "run a scenario and check it");
  run->add_option("scenario", scenario_path)->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed);
  run->add_option("--trace", trace_path, "write the JSONL trace here");
  run->add_option("--report", report_path);
  run->add_option("--properties", properties, "comma separated property names");

  auto* check = app.add_subcommand("check", "check a recorded trace");
  check->add_option("trace", trace_path)->required()->check(CLI::ExistingFile);
  check->add_option("--properties", properties);
  check->add_option("--report", report_path);

  auto* sw = app.add_subcommand("sweep", "run a scenario over a seed range");
  sw->add_option("scenario", scenario_path)->required()->check(CLI::ExistingFile);
  sw->add_option("--seeds", seeds, "A..B")->required();
  sw->add_option("--report", report_path);
  sw->add_option("--properties", properties);

  auto* demo = app.add_subcommand("demo", "run every bundled scenario");
  demo->add_option("--dir", dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      Scenario s = load_scenario(scenario_path);
      if (seed) s.seed = *seed;
      auto res = run_scenario(s);
      if (!trace_path.empty()) res.trace.write(trace_path);
      auto reps = check_all(res.trace, split_csv(properties));
      std::cout << s.name << " seed " << s.seed << " trace " << res.hash << "\n";
      print_table(reps);
      if (!report_path.empty()) write_json(report_path, report_json(reps, res.hash));
      return all_pass(reps) ? 0 : 1;
    }
    if (check->parsed()) {
      Trace t = Trace::read(trace_path);
      auto reps = check_all(t, split_csv(properties));
      Json j = report_json(reps, hex(t.hash()));
      if (!report_path.empty()) write_json(report_path, j);
      std::cout << j.dump(2) << "\n";
      return all_pass(reps) ? 0 : 1;
    }
    if (sw->parsed()) {
      Scenario s = load_scenario(scenario_path);
      auto [a, b] = parse_range(seeds);
      auto sum = sweep(s, a, b, split_csv(properties));
      Json j = sum.to_json();
      j["scenario"] = s.name;
      if (!report_path.empty()) write_json(report_path, j);
      std::cout << s.name << ": " << sum.seeds.size() << " runs, s_same-GST "
                << j["s_same_minus_gst"].dump() << ", failures " << j["failures"].dump() << "\n";
      return sum.failures.empty() ? 0 : 1;
    }
    if (demo->parsed()) {
      std::vector<std::filesystem::path> files;
      for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      bool ok = !files.empty();
      for (const auto& p : files) {
        auto t0 = std::chrono::steady_clock::now();
        Scenario s = load_scenario(p.string());
        auto res = run_scenario(s);
        auto reps = check_all(res.trace);
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
        std::cout << s.name << " (" << ms << " ms) " << (all_pass(reps) ? "pass" : "FAIL") << "\n";
        print_table(reps);
        ok = ok && all_pass(reps);
      }
      return ok ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << Json{{"error", to_string(e.code())}, {"detail", e.what()}}.dump() << "\n";
    return 2;
  }
  return 0;
}
