#include "gamenet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace gamenet {
namespace {

constexpr const char* kFormat = "gamenet-checkpoint";
constexpr int kVersion = 1;

void put_le64(std::vector<char>& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

double get_le64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) {
    bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::vector<char> payload;
  payload.reserve(static_cast<std::size_t>(checkpoint.tensors.scalar_count()) * 8);
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  for (const auto& [name, m] : checkpoint.tensors) {
    tensors.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", payload.size()}});
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_le64(payload, m(r, c));
    }
  }
  nlohmann::ordered_json manifest;
  manifest["format"] = kFormat;
  manifest["version"] = kVersion;
  manifest["metadata"] = checkpoint.metadata;
  manifest["payload_bytes"] = payload.size();
  manifest["tensors"] = std::move(tensors);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  const std::string header = manifest.dump();
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.put('\n');
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw DataError("checkpoint has no manifest: " + path.string());
  nlohmann::ordered_json manifest;
  try {
    manifest = nlohmann::ordered_json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint manifest is not valid JSON: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != kFormat || manifest.value("version", 0) != kVersion) {
    throw DataError("not a gamenet checkpoint (version " + std::to_string(kVersion) + "): " + path.string());
  }
  const std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (payload.size() != manifest.at("payload_bytes").get<std::size_t>()) {
    throw DataError("checkpoint payload truncated: " + path.string());
  }

  Checkpoint ckpt;
  ckpt.metadata = manifest.at("metadata");
  for (const auto& t : manifest.at("tensors")) {
    const auto rows = t.at("shape").at(0).get<Eigen::Index>();
    const auto cols = t.at("shape").at(1).get<Eigen::Index>();
    const auto offset = t.at("offset").get<std::size_t>();
    if (rows < 0 || cols < 0 || offset + static_cast<std::size_t>(rows * cols) * 8 > payload.size()) {
      throw DataError("checkpoint tensor '" + t.at("name").get<std::string>() + "' out of bounds");
    }
    ad::Matrix<double> m(rows, cols);
    const char* p = payload.data() + offset;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c, p += 8) m(r, c) = get_le64(p);
    }
    ckpt.tensors.add(t.at("name").get<std::string>(), std::move(m));
  }
  return ckpt;
}

}  // namespace gamenet
