#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "laud/tensor.hpp"

namespace laud {

/// Named-tensor container: magic "LAUD", u32 format version, u32-length-
/// prefixed UTF-8 JSON header mapping tensor names to {shape, dtype:"f32",
/// byte_offset}, then raw little-endian f32 payloads in header order. The
/// reserved "__meta__" header key carries arbitrary JSON (e.g. model config).
class TensorArchive {
 public:
  static constexpr uint32_t kVersion = 1;

  void add(const std::string& name, const Tensor& t);
  void set_meta(nlohmann::ordered_json meta) { meta_ = std::move(meta); }

  const std::vector<std::pair<std::string, Tensor>>& tensors() const {
    return entries_;
  }
  const nlohmann::ordered_json& meta() const { return meta_; }
  const Tensor& find(const std::string& name) const;

  std::vector<uint8_t> serialize() const;
  static TensorArchive deserialize(std::span<const uint8_t> bytes);

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  nlohmann::ordered_json meta_;
};

}  // namespace laud
