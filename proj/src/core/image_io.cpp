#include "shearo/core/image_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "shearo/core/error.hpp"

namespace shearo {

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32_le(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write: " + path.string());
}

}  // namespace

void write_tensor_file(const std::filesystem::path& path, const Tensor& hw, const char* magic) {
  if (hw.ndim() != 2) throw ValidationError("tensor file payload must be (H,W)");
  std::string bytes;
  bytes.reserve(16 + static_cast<std::size_t>(hw.numel()) * 4);
  bytes.append(magic, 4);
  put_u32_le(bytes, static_cast<std::uint32_t>(hw.dim(0)));
  put_u32_le(bytes, static_cast<std::uint32_t>(hw.dim(1)));
  put_u32_le(bytes, 1u);  // dtype tag: f32
  for (std::int64_t i = 0; i < hw.numel(); ++i) {
    const float f = static_cast<float>(hw[i]);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32_le(bytes, u);
  }
  write_all(path, bytes);
}

Tensor read_tensor_file(const std::filesystem::path& path, const char* expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw IoError("truncated tensor file: " + path.string());
  if (std::memcmp(bytes.data(), expected_magic, 4) != 0)
    throw IoError("bad magic in " + path.string() + " (expected " + expected_magic + ")");
  const std::int64_t h = get_u32_le(bytes.data() + 4);
  const std::int64_t w = get_u32_le(bytes.data() + 8);
  const std::uint32_t dtype = get_u32_le(bytes.data() + 12);
  if (dtype != 1) throw IoError("unsupported dtype tag in " + path.string());
  if (bytes.size() != 16 + static_cast<std::size_t>(h * w) * 4)
    throw IoError("truncated tensor file: " + path.string());
  Tensor t({h, w});
  for (std::int64_t i = 0; i < h * w; ++i) {
    const std::uint32_t u = get_u32_le(bytes.data() + 16 + 4 * i);
    float f;
    std::memcpy(&f, &u, 4);
    t[i] = static_cast<double>(f);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Minimal PNG writer: store-only deflate blocks, hand-rolled CRC32/Adler32.
// Files are larger than zlib-compressed ones but fully standard.

namespace {

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t n = 0; n < 256; ++n) {
      std::uint32_t c = n;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[n] = c;
    }
    return t;
  }();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xff] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

std::uint32_t adler32(const std::uint8_t* data, std::size_t len) {
  std::uint32_t a = 1, b = 0;
  for (std::size_t i = 0; i < len; ++i) {
    a = (a + data[i]) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
  put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), payload.begin(), payload.end());
  out.insert(out.end(), body.begin(), body.end());
  put_u32_be(out, crc32(body.data(), body.size()));
}

void write_png(const std::filesystem::path& path, std::int64_t width, std::int64_t height,
               int color_type, int bytes_per_pixel, const std::vector<std::uint8_t>& pixels) {
  // Raw scanline stream: filter byte 0 per row.
  std::vector<std::uint8_t> raw;
  const std::size_t row_bytes = static_cast<std::size_t>(width) * static_cast<std::size_t>(bytes_per_pixel);
  raw.reserve((row_bytes + 1) * static_cast<std::size_t>(height));
  for (std::int64_t y = 0; y < height; ++y) {
    raw.push_back(0);
    const auto* row = pixels.data() + static_cast<std::size_t>(y) * row_bytes;
    raw.insert(raw.end(), row, row + row_bytes);
  }

  std::vector<std::uint8_t> idat;
  idat.push_back(0x78);
  idat.push_back(0x01);
  std::size_t off = 0;
  do {
    const std::size_t n = std::min<std::size_t>(raw.size() - off, 65535);
    const bool final = off + n == raw.size();
    idat.push_back(final ? 1 : 0);
    idat.push_back(std::uint8_t(n & 0xff));
    idat.push_back(std::uint8_t(n >> 8));
    idat.push_back(std::uint8_t(~n & 0xff));
    idat.push_back(std::uint8_t((~n >> 8) & 0xff));
    idat.insert(idat.end(), raw.begin() + static_cast<std::ptrdiff_t>(off),
                raw.begin() + static_cast<std::ptrdiff_t>(off + n));
    off += n;
  } while (off < raw.size());
  put_u32_be(idat, adler32(raw.data(), raw.size()));

  std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);                            // bit depth
  ihdr.push_back(static_cast<std::uint8_t>(color_type));  // 0 gray, 2 rgb
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(png, "IHDR", ihdr);
  append_chunk(png, "IDAT", idat);
  append_chunk(png, "IEND", {});

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
  if (!out) throw IoError("short write: " + path.string());
}

}  // namespace

void write_png_gray(const std::filesystem::path& path, const Tensor& hw, double lo, double hi) {
  if (hw.ndim() != 2) throw ValidationError("png payload must be (H,W)");
  const std::int64_t h = hw.dim(0), w = hw.dim(1);
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(h * w));
  const double scale = 255.0 / (hi - lo);
  for (std::int64_t i = 0; i < h * w; ++i) {
    const double v = std::clamp((hw[i] - lo) * scale, 0.0, 255.0);
    pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(v));
  }
  write_png(path, w, h, 0, 1, pixels);
}

void write_png_rgb(const std::filesystem::path& path, std::int64_t width, std::int64_t height,
                   const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width * height * 3))
    throw ValidationError("rgb buffer size mismatch");
  write_png(path, width, height, 2, 3, rgb);
}

}  // namespace shearo
