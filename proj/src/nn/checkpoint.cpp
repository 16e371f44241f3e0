#include "shearo/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "shearo/core/error.hpp"

namespace shearo::nn {

namespace {

constexpr char kMagic[4] = {'S', 'H', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& bytes, std::size_t& off, const std::filesystem::path& path) {
  if (off + sizeof(T) > bytes.size()) throw IoError("truncated checkpoint: " + path.string());
  T v;
  std::memcpy(&v, bytes.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void save_blob(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::string bytes;
  bytes.append(kMagic, 4);
  put<std::uint32_t>(bytes, kVersion);
  put<std::uint32_t>(bytes, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    put<std::uint32_t>(bytes, static_cast<std::uint32_t>(name.size()));
    bytes.append(name);
    put<std::uint32_t>(bytes, static_cast<std::uint32_t>(tensor.ndim()));
    for (int d = 0; d < tensor.ndim(); ++d) put<std::int64_t>(bytes, tensor.dim(d));
    for (std::int64_t i = 0; i < tensor.numel(); ++i) put<double>(bytes, tensor[i]);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short checkpoint write: " + path.string());
}

NamedTensors load_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t off = 0;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError("not a checkpoint blob: " + path.string());
  off = 4;
  const auto version = take<std::uint32_t>(bytes, off, path);
  if (version != kVersion) throw IoError("unsupported checkpoint version in " + path.string());
  const auto count = take<std::uint32_t>(bytes, off, path);

  NamedTensors tensors;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto name_len = take<std::uint32_t>(bytes, off, path);
    if (off + name_len > bytes.size()) throw IoError("truncated checkpoint: " + path.string());
    std::string name = bytes.substr(off, name_len);
    off += name_len;
    const auto ndim = take<std::uint32_t>(bytes, off, path);
    std::vector<std::int64_t> shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(take<std::int64_t>(bytes, off, path));
    Tensor t(shape);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = take<double>(bytes, off, path);
    tensors.emplace(std::move(name), std::move(t));
  }
  if (off != bytes.size()) throw IoError("trailing bytes in checkpoint: " + path.string());
  return tensors;
}

}  // namespace shearo::nn
