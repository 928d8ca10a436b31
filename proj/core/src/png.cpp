#include "vtb/png.hpp"

#include <zlib.h>

#include <array>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>

namespace vtb {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::uint8_t, 8> kSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_chunk(std::vector<std::uint8_t>& out, const char (&type)[5],
               std::span<const std::uint8_t> data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + type_at, static_cast<uInt>(4 + data.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    const auto* row = img.pixels.data() + y * stride;
    raw.insert(raw.end(), row, row + stride);
  }

  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw PngError("zlib compression failed");
  }
  z.resize(zlen);

  std::vector<std::uint8_t> out(kSignature.begin(), kSignature.end());
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(img.width));
  put_u32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // depth 8, truecolor, deflate, filter 0, no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
  return out;
}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature.data(), 8) != 0) {
    throw PngError("not a PNG file");
  }
  std::size_t pos = 8;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> idat;
  bool seen_end = false;
  while (pos + 12 <= bytes.size()) {
    const std::uint32_t len = get_u32(bytes, pos);
    if (pos + 12 + len > bytes.size()) throw PngError("truncated chunk");
    const std::string type(reinterpret_cast<const char*>(bytes.data() + pos + 4), 4);
    const auto data = bytes.subspan(pos + 8, len);
    const uLong crc = crc32(0L, bytes.data() + pos + 4, len + 4);
    if (static_cast<std::uint32_t>(crc) != get_u32(bytes, pos + 8 + len)) {
      throw PngError("CRC mismatch in " + type + " chunk");
    }
    if (type == "IHDR") {
      if (len != 13) throw PngError("bad IHDR");
      width = static_cast<int>(get_u32(data, 0));
      height = static_cast<int>(get_u32(data, 4));
      if (data[8] != 8 || data[9] != 2 || data[12] != 0) {
        throw PngError("only 8-bit RGB non-interlaced PNGs are supported");
      }
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data.begin(), data.end());
    } else if (type == "IEND") {
      seen_end = true;
      break;
    }
    pos += 12 + len;
  }
  if (!seen_end || width <= 0 || height <= 0) throw PngError("incomplete PNG");

  const std::size_t stride = static_cast<std::size_t>(width) * 3;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size()) {
    throw PngError("corrupt image data");
  }

  RasterImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(stride * height);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
    std::uint8_t* dst = img.pixels.data() + y * stride;
    const std::uint8_t* prev = y > 0 ? img.pixels.data() + (y - 1) * stride : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= 3 ? dst[i - 3] : 0;
      const int b = prev ? prev[i] : 0;
      const int c = (prev && i >= 3) ? prev[i - 3] : 0;
      int pred = 0;
      switch (filter) {
        case 0: pred = 0; break;
        case 1: pred = a; break;
        case 2: pred = b; break;
        case 3: pred = (a + b) / 2; break;
        case 4: pred = paeth(a, b, c); break;
        default: throw PngError("unknown row filter");
      }
      dst[i] = static_cast<std::uint8_t>(src[i] + pred);
    }
  }
  return img;
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace vtb
