#include "laud/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace laud {

namespace {

constexpr char kMagic[4] = {'L', 'A', 'U', 'D'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

uint32_t get_u32(std::span<const uint8_t> b, size_t off) {
  return static_cast<uint32_t>(b[off]) | (static_cast<uint32_t>(b[off + 1]) << 8) |
         (static_cast<uint32_t>(b[off + 2]) << 16) |
         (static_cast<uint32_t>(b[off + 3]) << 24);
}

static_assert(std::endian::native == std::endian::little,
              "payload writer assumes a little-endian host");

}  // namespace

void TensorArchive::add(const std::string& name, const Tensor& t) {
  if (name.rfind("__", 0) == 0)
    throw FormatError("tensor names must not start with '__': " + name);
  for (const auto& [n, _] : entries_)
    if (n == name) throw FormatError("duplicate tensor name: " + name);
  entries_.emplace_back(name, t);
}

const Tensor& TensorArchive::find(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw FormatError("archive has no tensor named '" + name + "'");
}

std::vector<uint8_t> TensorArchive::serialize() const {
  nlohmann::ordered_json header;
  if (!meta_.is_null()) header["__meta__"] = meta_;
  uint64_t offset = 0;
  for (const auto& [name, t] : entries_) {
    const Shape& s = t.shape();
    header[name] = {{"shape", {s.b, s.c, s.h, s.w}},
                    {"dtype", "f32"},
                    {"byte_offset", offset}};
    offset += static_cast<uint64_t>(t.numel()) * 4;
  }
  const std::string header_str = header.dump();

  std::vector<uint8_t> out;
  out.reserve(12 + header_str.size() + offset);
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(header_str.size()));
  out.insert(out.end(), header_str.begin(), header_str.end());
  for (const auto& [name, t] : entries_) {
    for (double v : t.data()) {
      const auto f = static_cast<float>(v);
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
  }
  return out;
}

TensorArchive TensorArchive::deserialize(std::span<const uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("bad magic: not a LAUD tensor archive");
  const uint32_t version = get_u32(bytes, 4);
  if (version != kVersion)
    throw FormatError("unsupported archive version " + std::to_string(version));
  const uint32_t header_len = get_u32(bytes, 8);
  if (bytes.size() < 12 + static_cast<size_t>(header_len))
    throw FormatError("truncated archive header");

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(
        bytes.begin() + 12, bytes.begin() + 12 + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid archive header: ") + e.what());
  }

  TensorArchive arch;
  const std::span<const uint8_t> payload = bytes.subspan(12 + header_len);
  for (auto& [name, desc] : header.items()) {
    if (name == "__meta__") {
      arch.meta_ = desc;
      continue;
    }
    if (!desc.contains("shape") || !desc.contains("dtype") ||
        !desc.contains("byte_offset"))
      throw FormatError("malformed descriptor for tensor '" + name + "'");
    if (desc["dtype"] != "f32")
      throw FormatError("unsupported dtype for tensor '" + name + "'");
    const auto dims = desc["shape"].get<std::vector<int64_t>>();
    if (dims.size() != 4)
      throw FormatError("tensor '" + name + "' is not rank 4");
    const Shape s{dims[0], dims[1], dims[2], dims[3]};
    const auto offset = desc["byte_offset"].get<uint64_t>();
    const auto nbytes = static_cast<uint64_t>(s.numel()) * 4;
    if (offset + nbytes > payload.size())
      throw FormatError("truncated payload for tensor '" + name + "'");
    std::vector<double> data(static_cast<size_t>(s.numel()));
    for (int64_t i = 0; i < s.numel(); ++i) {
      uint32_t bits = get_u32(payload, static_cast<size_t>(offset) + 4 * i);
      float f;
      std::memcpy(&f, &bits, 4);
      data[static_cast<size_t>(i)] = static_cast<double>(f);
    }
    arch.entries_.emplace_back(name, Tensor::from_data(s, std::move(data)));
  }
  return arch;
}

void TensorArchive::save(const std::filesystem::path& path) const {
  const std::vector<uint8_t> bytes = serialize();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing '" + path.string() + "'");
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "' for reading");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace laud
