#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vda/errors.hpp"

namespace vda {

/// Append-only log of training records, one json object per entry.
struct Diagnostics {
  std::vector<nlohmann::json> records;

  void add(nlohmann::json rec) { records.push_back(std::move(rec)); }
  void event(const std::string& name) { add({{"event", name}}); }
};

inline void write_jsonl(const std::filesystem::path& path,
                        const Diagnostics& diag) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& rec : diag.records) out << rec.dump() << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace vda
