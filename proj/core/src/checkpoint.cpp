#include "hmiway/checkpoint.hpp"

#include <cstring>

#include <json.hpp>

#include "hmiway/errors.hpp"
#include "hmiway/util.hpp"

namespace hmiway {

namespace {
constexpr const char* kMagic = "HMWC1";
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& s : sections)
    if (s.name == name) return true;
  return false;
}

const std::vector<double>& Checkpoint::section(const std::string& name) const {
  for (const auto& s : sections)
    if (s.name == name) return s.values;
  throw IoError("checkpoint: missing section '" + name + "'");
}

void Checkpoint::add(const std::string& name, std::vector<double> values) {
  if (has(name)) throw ContractError("checkpoint: duplicate section '" + name + "'");
  sections.push_back({name, std::move(values)});
}

std::string Checkpoint::serialize() const {
  nlohmann::json header;
  header["version"] = version;
  header["meta"] = nlohmann::json::parse(meta_json);
  nlohmann::json layout = nlohmann::json::array();
  for (const auto& s : sections)
    layout.push_back({{"name", s.name}, {"count", s.values.size()}});
  header["sections"] = layout;

  std::string out = std::string(kMagic) + "\n" + header.dump() + "\n";
  for (const auto& s : sections) {
    const char* bytes = reinterpret_cast<const char*>(s.values.data());
    out.append(bytes, s.values.size() * sizeof(double));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& data, const std::string& source_name) {
  size_t p1 = data.find('\n');
  if (p1 == std::string::npos || data.substr(0, p1) != kMagic)
    throw IoError(source_name + ": not a checkpoint file (bad magic)");
  size_t p2 = data.find('\n', p1 + 1);
  if (p2 == std::string::npos) throw IoError(source_name + ": truncated checkpoint header");

  Checkpoint ck;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(data.substr(p1 + 1, p2 - p1 - 1));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(source_name + ": malformed checkpoint header: " + e.what());
  }
  ck.version = header.value("version", 0);
  if (ck.version != 1)
    throw IoError(source_name + ": unsupported checkpoint version " + std::to_string(ck.version));
  ck.meta_json = header.contains("meta") ? header["meta"].dump() : std::string("{}");

  size_t offset = p2 + 1;
  for (const auto& entry : header["sections"]) {
    CheckpointSection s;
    s.name = entry.at("name").get<std::string>();
    size_t count = entry.at("count").get<size_t>();
    size_t bytes = count * sizeof(double);
    if (offset + bytes > data.size())
      throw IoError(source_name + ": truncated checkpoint section '" + s.name + "'");
    s.values.resize(count);
    std::memcpy(s.values.data(), data.data() + offset, bytes);
    offset += bytes;
    ck.sections.push_back(std::move(s));
  }
  if (offset != data.size())
    throw IoError(source_name + ": trailing bytes after checkpoint sections");
  return ck;
}

void Checkpoint::save(const std::string& path) const { write_file_atomic(path, serialize()); }

Checkpoint Checkpoint::load(const std::string& path) {
  return deserialize(read_file(path), path);
}

}  // namespace hmiway
