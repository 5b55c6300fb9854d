#include "bml/io.hpp"

#include <png.h>

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace bml {
namespace {

constexpr std::array<unsigned char, 8> kPngSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::runtime_error io_error(const fs::path& path, const std::string& what) {
  return std::runtime_error(path.string() + ": " + what);
}

std::vector<unsigned char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path, "cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const fs::path& path, const void* data, std::size_t size) {
  if (path.empty()) throw std::runtime_error("empty output path");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error(path, "cannot open for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw io_error(path, "write failed");
}

bool is_pgm_path(const fs::path& path) {
  auto ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".pgm";
}

// --- PGM -------------------------------------------------------------------

struct PgmCursor {
  const std::vector<unsigned char>& bytes;
  std::size_t pos = 0;

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  }

  long next_int(const fs::path& path) {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
      ++digits;
    }
    if (digits == 0) throw io_error(path, "malformed PGM header");
    return value;
  }
};

GrayImage decode_pgm(const std::vector<unsigned char>& bytes, const fs::path& path) {
  PgmCursor cur{bytes, 2};
  const long width = cur.next_int(path);
  const long height = cur.next_int(path);
  const long maxval = cur.next_int(path);
  ++cur.pos;  // single whitespace before raster
  if (width <= 0 || height <= 0) throw io_error(path, "invalid PGM dimensions");
  if (maxval != 255 && maxval != 65535) throw io_error(path, "unsupported PGM bit depth");
  const std::size_t bpp = maxval == 255 ? 1 : 2;
  const std::size_t need = static_cast<std::size_t>(width * height) * bpp;
  if (bytes.size() < cur.pos + need) throw io_error(path, "truncated PGM raster");

  GrayImage out(height, width);
  const unsigned char* raster = bytes.data() + cur.pos;
  const double scale = 1.0 / static_cast<double>(maxval);
  for (Index i = 0; i < out.size(); ++i) {
    const unsigned code = bpp == 1 ? raster[i] : (unsigned(raster[2 * i]) << 8) | raster[2 * i + 1];
    out.data()[i] = code * scale;
  }
  return out;
}

void encode_pgm(const Image<std::uint16_t>& codes, BitDepth depth, const fs::path& path) {
  std::ostringstream header;
  header << "P5\n" << codes.cols() << " " << codes.rows() << "\n"
         << (depth == BitDepth::k8 ? 255 : 65535) << "\n";
  std::string buf = header.str();
  for (Index i = 0; i < codes.size(); ++i) {
    const std::uint16_t c = codes.data()[i];
    if (depth == BitDepth::k16) buf.push_back(static_cast<char>(c >> 8));
    buf.push_back(static_cast<char>(c & 0xff));
  }
  write_all(path, buf.data(), buf.size());
}

// --- PNG -------------------------------------------------------------------

struct PngReadMemory {
  const std::vector<unsigned char>* bytes;
  std::size_t pos;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t len) {
  auto* src = static_cast<PngReadMemory*>(png_get_io_ptr(png));
  if (src->pos + len > src->bytes->size()) png_error(png, "read past end of buffer");
  std::memcpy(out, src->bytes->data() + src->pos, len);
  src->pos += len;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* dst = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
  dst->insert(dst->end(), data, data + len);
}

void png_flush_noop(png_structp) {}

[[noreturn]] void png_throw(png_structp, png_const_charp msg) { throw std::runtime_error(msg); }
void png_warn_silent(png_structp, png_const_charp) {}

GrayImage decode_png(const std::vector<unsigned char>& bytes, const fs::path& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_warn_silent);
  if (!png) throw io_error(path, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Cleanup {
    png_structp& png;
    png_infop& info;
    ~Cleanup() { png_destroy_read_struct(&png, &info, nullptr); }
  } cleanup{png, info};

  PngReadMemory src{&bytes, 0};
  try {
    png_set_read_fn(png, &src, png_read_from_memory);
    png_read_info(png, info);
    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (color_type != PNG_COLOR_TYPE_GRAY) throw std::runtime_error("unsupported PNG channel count (need single-channel gray)");
    if (bit_depth != 8 && bit_depth != 16) throw std::runtime_error("unsupported PNG bit depth");

    const std::size_t stride = png_get_rowbytes(png, info);
    std::vector<unsigned char> raster(stride * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = raster.data() + r * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);

    GrayImage out(height, width);
    const double scale = bit_depth == 8 ? 1.0 / 255.0 : 1.0 / 65535.0;
    for (png_uint_32 r = 0; r < height; ++r) {
      for (png_uint_32 c = 0; c < width; ++c) {
        const unsigned code = bit_depth == 8 ? rows[r][c]
                                             : (unsigned(rows[r][2 * c]) << 8) | rows[r][2 * c + 1];
        out(r, c) = code * scale;
      }
    }
    return out;
  } catch (const std::runtime_error& e) {
    throw io_error(path, e.what());
  }
}

void encode_png(const std::uint8_t* const* planes, int channels, Index width, Index height,
                int bit_depth, const std::uint16_t* gray16, const fs::path& path) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_warn_silent);
  if (!png) throw io_error(path, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Cleanup {
    png_structp& png;
    png_infop& info;
    ~Cleanup() { png_destroy_write_struct(&png, &info); }
  } cleanup{png, info};

  std::vector<unsigned char> encoded;
  const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  std::vector<unsigned char> raster(stride * height);
  for (Index r = 0; r < height; ++r) {
    unsigned char* row = raster.data() + r * stride;
    for (Index c = 0; c < width; ++c) {
      const Index i = r * width + c;
      if (bit_depth == 16) {
        row[2 * c] = static_cast<unsigned char>(gray16[i] >> 8);
        row[2 * c + 1] = static_cast<unsigned char>(gray16[i] & 0xff);
      } else {
        for (int ch = 0; ch < channels; ++ch) row[c * channels + ch] = planes[ch][i];
      }
    }
  }
  std::vector<png_bytep> rows(height);
  for (Index r = 0; r < height; ++r) rows[r] = raster.data() + r * stride;

  try {
    png_set_write_fn(png, &encoded, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
  } catch (const std::runtime_error& e) {
    throw io_error(path, e.what());
  }
  write_all(path, encoded.data(), encoded.size());
}

}  // namespace

Image<std::uint16_t> quantize(const GrayImage& image, BitDepth depth) {
  const double maxcode = depth == BitDepth::k8 ? 255.0 : 65535.0;
  return (image.cwiseMax(0.0).cwiseMin(1.0) * maxcode + 0.5).floor().cast<std::uint16_t>();
}

GrayImage load_image(const fs::path& path) {
  const auto bytes = read_all(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes, path);
  if (bytes.size() >= 8 && std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin()))
    return decode_png(bytes, path);
  throw io_error(path, "unsupported image format (expected binary PGM or PNG)");
}

void save_image(const GrayImage& image, const fs::path& path, BitDepth depth) {
  if (path.empty()) throw std::runtime_error("empty output path");
  if (image.size() == 0) throw std::invalid_argument("cannot save an empty image");
  const Image<std::uint16_t> codes = quantize(image, depth);
  if (is_pgm_path(path)) {
    encode_pgm(codes, depth, path);
    return;
  }
  if (depth == BitDepth::k16) {
    encode_png(nullptr, 1, image.cols(), image.rows(), 16, codes.data(), path);
  } else {
    const Image<std::uint8_t> bytes = codes.cast<std::uint8_t>();
    const std::uint8_t* planes[] = {bytes.data()};
    encode_png(planes, 1, image.cols(), image.rows(), 8, nullptr, path);
  }
}

BinaryMask load_mask(const fs::path& path) { return load_image(path) > 0.0; }

void save_mask(const BinaryMask& mask, const fs::path& path) {
  save_image(mask.cast<double>(), path, BitDepth::k8);
}

void save_rgb_png(const RgbImage& rgb, const fs::path& path) {
  if (path.empty()) throw std::runtime_error("empty output path");
  if (!same_shape(rgb[0], rgb[1]) || !same_shape(rgb[0], rgb[2]))
    throw std::invalid_argument("save_rgb_png: channel shape mismatch");
  const std::uint8_t* planes[] = {rgb[0].data(), rgb[1].data(), rgb[2].data()};
  encode_png(planes, 3, rgb[0].cols(), rgb[0].rows(), 8, nullptr, path);
}

// --- Volumes -----------------------------------------------------------------

namespace {
fs::path sidecar_path(const fs::path& path) { return fs::path(path.string() + ".json"); }
}  // namespace

Volume load_volume(const fs::path& path) {
  const auto header_bytes = read_all(sidecar_path(path));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw io_error(sidecar_path(path), std::string("bad volume header: ") + e.what());
  }
  if (header.value("dtype", std::string()) != "f32le")
    throw io_error(sidecar_path(path), "unsupported volume dtype");
  const auto w = header.at("width").get<Index>();
  const auto h = header.at("height").get<Index>();
  const auto s = header.at("slices").get<Index>();
  if (w <= 0 || h <= 0 || s <= 0) throw io_error(sidecar_path(path), "invalid volume dimensions");

  const auto payload = read_all(path);
  const std::size_t expected = static_cast<std::size_t>(w * h * s);
  if (payload.size() != expected * sizeof(float)) {
    throw io_error(path, "volume payload holds " + std::to_string(payload.size() / sizeof(float)) +
                             " scalars, header declares " + std::to_string(expected));
  }
  Volume vol(w, h, s);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= std::uint32_t(payload[4 * i + b]) << (8 * b);
    vol.data[i] = std::bit_cast<float>(bits);
  }
  return vol;
}

void save_volume(const Volume& volume, const fs::path& path) {
  if (volume.data.size() != static_cast<std::size_t>(volume.width * volume.height * volume.slices))
    throw std::invalid_argument("save_volume: payload size does not match dimensions");
  std::vector<unsigned char> payload(volume.data.size() * 4);
  for (std::size_t i = 0; i < volume.data.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(volume.data[i]);
    for (int b = 0; b < 4; ++b) payload[4 * i + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  write_all(path, payload.data(), payload.size());
  const nlohmann::ordered_json header = {{"width", volume.width},
                                         {"height", volume.height},
                                         {"slices", volume.slices},
                                         {"dtype", "f32le"}};
  const std::string text = header.dump() + "\n";
  write_all(sidecar_path(path), text.data(), text.size());
}

}  // namespace bml
