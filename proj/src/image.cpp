#include "pecas/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "pecas/errors.hpp"

namespace pecas {

namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

constexpr std::array<std::uint8_t, 8> kPngSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

// ---- PNM -------------------------------------------------------------------

class PnmHeader {
 public:
  explicit PnmHeader(std::span<const std::uint8_t> bytes, const char* format) : bytes_(bytes), format_(format) {}

  std::size_t number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw DecodeError(std::string(format_) + ": malformed or truncated header");
    }
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + static_cast<std::size_t>(bytes_[pos_++] - '0');
      if (v > 1'000'000'000) throw DecodeError(std::string(format_) + ": header value out of range");
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw DecodeError(std::string(format_) + ": missing whitespace before raster");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  const char* format_;
  std::size_t pos_ = 2;
};

Tensor decode_pnm(std::span<const std::uint8_t> bytes, std::size_t channels) {
  const char* format = channels == 1 ? "PGM (P5)" : "PPM (P6)";
  PnmHeader header(bytes, format);
  const std::size_t width = header.number();
  const std::size_t height = header.number();
  const std::size_t maxval = header.number();
  if (width == 0 || height == 0) throw DecodeError(std::string(format) + ": zero image dimension");
  if (maxval == 0 || maxval > 65535) {
    throw DecodeError(std::string(format) + ": unsupported maxval " + std::to_string(maxval));
  }
  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t offset = header.raster_offset();
  const std::size_t needed = width * height * channels * sample_bytes;
  if (bytes.size() - offset < needed) {
    throw DecodeError(std::string(format) + ": truncated raster, expected " + std::to_string(needed) + " bytes");
  }

  const std::uint8_t* raster = bytes.data() + offset;
  auto sample = [&](std::size_t i) -> double {
    const double v = sample_bytes == 1 ? raster[i] : static_cast<double>((raster[2 * i] << 8) | raster[2 * i + 1]);
    return std::min(v, static_cast<double>(maxval)) / static_cast<double>(maxval);
  };

  Tensor out({1, height, width});
  for (std::size_t i = 0; i < width * height; ++i) {
    if (channels == 1) {
      out[i] = sample(i);
    } else {
      out[i] = kLumaR * sample(3 * i) + kLumaG * sample(3 * i + 1) + kLumaB * sample(3 * i + 2);
    }
  }
  return out;
}

// ---- PNG -------------------------------------------------------------------

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

std::vector<std::uint8_t> inflate_all(const std::vector<std::uint8_t>& compressed, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw DecodeError("PNG: zlib initialisation failed");
  zs.next_in = const_cast<Bytef*>(compressed.data());
  zs.avail_in = static_cast<uInt>(compressed.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const std::size_t produced = out.size() - zs.avail_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) {
    throw DecodeError("PNG: corrupt or truncated image data (zlib " + std::to_string(rc) + ")");
  }
  return out;
}

std::uint8_t paeth(std::uint8_t a, std::uint8_t b, std::uint8_t c) {
  const int p = int{a} + int{b} - int{c};
  const int pa = std::abs(p - int{a});
  const int pb = std::abs(p - int{b});
  const int pc = std::abs(p - int{c});
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

void unfilter(std::vector<std::uint8_t>& data, std::size_t height, std::size_t stride, std::size_t bpp) {
  std::vector<std::uint8_t> prev(stride, 0);
  for (std::size_t y = 0; y < height; ++y) {
    std::uint8_t* row = data.data() + y * (stride + 1);
    const std::uint8_t filter = row[0];
    std::uint8_t* px = row + 1;
    for (std::size_t i = 0; i < stride; ++i) {
      const std::uint8_t left = i >= bpp ? px[i - bpp] : 0;
      const std::uint8_t up = prev[i];
      const std::uint8_t up_left = i >= bpp ? prev[i - bpp] : 0;
      switch (filter) {
        case 0: break;
        case 1: px[i] = static_cast<std::uint8_t>(px[i] + left); break;
        case 2: px[i] = static_cast<std::uint8_t>(px[i] + up); break;
        case 3: px[i] = static_cast<std::uint8_t>(px[i] + ((int{left} + int{up}) >> 1)); break;
        case 4: px[i] = static_cast<std::uint8_t>(px[i] + paeth(left, up, up_left)); break;
        default: throw DecodeError("PNG: unknown filter type " + std::to_string(filter));
      }
    }
    std::memcpy(prev.data(), px, stride);
  }
}

Tensor decode_png(std::span<const std::uint8_t> bytes) {
  std::size_t pos = kPngSignature.size();
  std::size_t width = 0, height = 0, channels = 0;
  bool have_header = false, have_end = false;
  std::vector<std::uint8_t> idat;

  while (!have_end) {
    if (bytes.size() - pos < 12) throw DecodeError("PNG: truncated chunk");
    const std::uint32_t length = be32(bytes.data() + pos);
    const std::uint8_t* type = bytes.data() + pos + 4;
    if (length > bytes.size() - pos - 12) throw DecodeError("PNG: truncated chunk");
    const std::uint8_t* body = type + 4;
    const std::uint32_t crc = be32(body + length);
    if (crc32(crc32(0L, Z_NULL, 0), type, length + 4) != crc) throw DecodeError("PNG: chunk CRC mismatch");
    const std::string tag(reinterpret_cast<const char*>(type), 4);

    if (tag == "IHDR") {
      if (length != 13) throw DecodeError("PNG: malformed IHDR");
      width = be32(body);
      height = be32(body + 4);
      const int depth = body[8], color = body[9], interlace = body[12];
      if (depth != 8) throw DecodeError("PNG: unsupported bit depth " + std::to_string(depth));
      if (color == 0) {
        channels = 1;
      } else if (color == 2) {
        channels = 3;
      } else {
        throw DecodeError("PNG: unsupported colour type " + std::to_string(color));
      }
      if (body[10] != 0 || body[11] != 0) throw DecodeError("PNG: unsupported compression/filter method");
      if (interlace != 0) throw DecodeError("PNG: interlaced images are not supported");
      if (width == 0 || height == 0) throw DecodeError("PNG: zero image dimension");
      have_header = true;
    } else if (tag == "IDAT") {
      if (!have_header) throw DecodeError("PNG: IDAT before IHDR");
      idat.insert(idat.end(), body, body + length);
    } else if (tag == "IEND") {
      have_end = true;
    } else if (!(type[0] & 0x20)) {
      throw DecodeError("PNG: unsupported critical chunk " + tag);
    }
    pos += 12 + length;
  }
  if (!have_header) throw DecodeError("PNG: missing IHDR");

  const std::size_t stride = width * channels;
  std::vector<std::uint8_t> raw = inflate_all(idat, height * (stride + 1));
  unfilter(raw, height, stride, channels);

  Tensor out({1, height, width});
  for (std::size_t y = 0; y < height; ++y) {
    const std::uint8_t* px = raw.data() + y * (stride + 1) + 1;
    for (std::size_t x = 0; x < width; ++x) {
      double v;
      if (channels == 1) {
        v = px[x];
      } else {
        v = kLumaR * px[3 * x] + kLumaG * px[3 * x + 1] + kLumaB * px[3 * x + 2];
      }
      out[y * width + x] = v / 255.0;
    }
  }
  return out;
}

double sample_bilinear(const Tensor& image, double y, double x) {
  const std::size_t H = image.dim(1), W = image.dim(2);
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, H - 1);
  const std::size_t x1 = std::min(x0 + 1, W - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  const double* d = image.data().data();
  const double top = d[y0 * W + x0] * (1.0 - fx) + d[y0 * W + x1] * fx;
  const double bottom = d[y1 * W + x0] * (1.0 - fx) + d[y1 * W + x1] * fx;
  return top * (1.0 - fy) + bottom * fy;
}

void require_gray(const Tensor& image, const char* what) {
  if (image.rank() != 3 || image.dim(0) != 1) {
    throw DimensionError(std::string(what) + ": expected a [1,H,W] image, got " + shape_string(image.shape()));
  }
}

}  // namespace

Tensor decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pnm(bytes, 1);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_pnm(bytes, 3);
  if (bytes.size() >= kPngSignature.size() && std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin())) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P') {
    throw DecodeError(std::string("unsupported netpbm variant P") + static_cast<char>(bytes[1]));
  }
  throw DecodeError("unsupported image format (expected PGM P5, PPM P6 or PNG)");
}

Tensor read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_image(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_pgm(const Tensor& image) {
  require_gray(image, "encode_pgm");
  const std::string header =
      "P5\n" + std::to_string(image.dim(2)) + " " + std::to_string(image.dim(1)) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.size());
  for (double v : image.data()) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return out;
}

void write_pgm(const Tensor& image, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Tensor resample_region(const Tensor& image, const BBox& region, std::size_t out_h, std::size_t out_w) {
  require_gray(image, "resample_region");
  const double H = static_cast<double>(image.dim(1));
  const double W = static_cast<double>(image.dim(2));
  if (out_h == 0 || out_w == 0) throw DimensionError("resample_region: empty output size");
  if (!(region.w >= 1.0 && region.h >= 1.0 && region.x >= 0.0 && region.y >= 0.0 && region.right() <= W &&
        region.bottom() <= H)) {
    throw DimensionError("resample_region: region outside the image");
  }
  const double step_y = out_h > 1 ? (region.h - 1.0) / static_cast<double>(out_h - 1) : 0.0;
  const double step_x = out_w > 1 ? (region.w - 1.0) / static_cast<double>(out_w - 1) : 0.0;
  Tensor out({1, out_h, out_w});
  for (std::size_t i = 0; i < out_h; ++i) {
    const double sy = region.y + static_cast<double>(i) * step_y;
    for (std::size_t j = 0; j < out_w; ++j) {
      out[i * out_w + j] = sample_bilinear(image, sy, region.x + static_cast<double>(j) * step_x);
    }
  }
  return out;
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  require_gray(image, "resize_bilinear");
  if (image.dim(1) == out_h && image.dim(2) == out_w) return image;
  return resample_region(
      image, {0.0, 0.0, static_cast<double>(image.dim(2)), static_cast<double>(image.dim(1))}, out_h, out_w);
}

Tensor crop(const Tensor& image, std::size_t x, std::size_t y, std::size_t w, std::size_t h) {
  require_gray(image, "crop");
  const std::size_t W = image.dim(2);
  if (w == 0 || h == 0 || x + w > W || y + h > image.dim(1)) throw DimensionError("crop: rectangle outside image");
  Tensor out({1, h, w});
  for (std::size_t r = 0; r < h; ++r) {
    std::copy_n(image.data().begin() + static_cast<std::ptrdiff_t>((y + r) * W + x), w,
                out.data().begin() + static_cast<std::ptrdiff_t>(r * w));
  }
  return out;
}

}  // namespace pecas
