#pragma once

#include <string>
#include <vector>

namespace hmiway {

// Versioned flat-vector checkpoint: a magic line, one JSON header line
// (metadata plus the section layout), then raw little-endian doubles per
// section. Reload is bit-exact.
struct CheckpointSection {
  std::string name;
  std::vector<double> values;
};

struct Checkpoint {
  int version = 1;
  std::string meta_json = "{}";
  std::vector<CheckpointSection> sections;

  bool has(const std::string& name) const;
  const std::vector<double>& section(const std::string& name) const;

  void add(const std::string& name, std::vector<double> values);

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& data, const std::string& source_name);

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace hmiway
