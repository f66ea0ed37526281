#include "manifest.hpp"

#include <fstream>

#include "json.hpp"
#include "proofgrade/digest.hpp"
#include "proofgrade/error.hpp"

namespace proofgrade::cli {

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)) {}

void RunManifest::add_input(const std::filesystem::path& path) { inputs_.push_back(path); }
void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path); }

void RunManifest::note(std::string key, std::string value) {
  notes_.emplace_back(std::move(key), std::move(value));
}

void RunManifest::start(const std::string& phase) {
  timings_.push_back({phase, std::chrono::steady_clock::now(), -1.0});
}

void RunManifest::stop(const std::string& phase) {
  for (auto it = timings_.rbegin(); it != timings_.rend(); ++it) {
    if (it->phase == phase && it->ms < 0.0) {
      it->ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         it->begin)
                   .count();
      return;
    }
  }
}

std::filesystem::path RunManifest::write(const std::filesystem::path& path) const {
  std::filesystem::path target = path;
  if (target.empty()) {
    if (outputs_.empty()) return {};
    target = outputs_.front();
    target += ".manifest.json";
  }
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["argv"] = argv_;
  j["seed"] = seed_;
  j["config"] = config_;
  auto files = [](const std::vector<std::filesystem::path>& paths) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& p : paths) {
      nlohmann::ordered_json f;
      f["path"] = p.string();
      if (std::filesystem::is_regular_file(p)) {
        f["sha256"] = to_hex(sha256_file(p));
        f["bytes"] = std::filesystem::file_size(p);
      }
      arr.push_back(std::move(f));
    }
    return arr;
  };
  j["inputs"] = files(inputs_);
  j["outputs"] = files(outputs_);
  nlohmann::ordered_json notes = nlohmann::ordered_json::object();
  for (const auto& [k, v] : notes_) notes[k] = v;
  j["notes"] = notes;
  nlohmann::ordered_json timings = nlohmann::ordered_json::object();
  for (const auto& t : timings_)
    if (t.ms >= 0.0) timings[t.phase] = t.ms;
  j["timings_ms"] = timings;

  std::ofstream out(target);
  if (!out) throw Error(ErrorKind::Config, "cannot write manifest " + target.string());
  out << j.dump(2) << '\n';
  return target;
}

}  // namespace proofgrade::cli
