// Copyright 2026 The fbaug Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Image and mask codecs: 8-bit PNG through libpng, binary PPM (P6) and
// PGM (P5) parsed by hand. Format is sniffed from the magic bytes on read
// and picked from the file extension on write.

#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "fbaug/errors.hpp"
#include "fbaug/image.hpp"

namespace fbaug {

using Bytes = std::vector<std::uint8_t>;

enum class FileFormat { kPng, kPpm, kPgm };

namespace detail {

inline constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G',
                                                  '\r', '\n', 0x1a, '\n'};

inline bool has_png_signature(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 &&
         std::equal(std::begin(kPngSignature), std::end(kPngSignature),
                    bytes.begin());
}

struct DecodedPixels {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3 after alpha is dropped
  Bytes data;
};

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
  bool truncated = false;
  char message[256] = {};
};

extern "C" inline void png_read_from_span(png_structp png, png_bytep out,
                                          png_size_t length) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->bytes.size() - st->pos < length) {
    st->truncated = true;
    png_error(png, "unexpected end of PNG stream");
  }
  std::memcpy(out, st->bytes.data() + st->pos, length);
  st->pos += length;
}

extern "C" inline void png_error_to_state(png_structp png,
                                          png_const_charp msg) {
  auto* st = static_cast<PngReadState*>(png_get_error_ptr(png));
  std::snprintf(st->message, sizeof(st->message), "%s", msg);
  png_longjmp(png, 1);
}

extern "C" inline void png_silent_warning(png_structp, png_const_charp) {}

enum class PngTarget { kColor, kGray };

// Decodes an 8-bit PNG. Color targets accept RGB/RGBA, gray targets accept
// G/GA (low bit depth gray is expanded). Alpha is stripped without
// compositing.
inline DecodedPixels decode_png(std::span<const std::uint8_t> bytes,
                                PngTarget target, const std::string& name) {
  PngReadState st;
  st.bytes = bytes;
  DecodedPixels out;
  std::vector<png_bytep> rows;

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &st,
                                           png_error_to_state,
                                           png_silent_warning);
  if (png == nullptr) throw Error("libpng: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng: cannot allocate info struct");
  }

  // 0 = ok, 1 = truncated, 2 = corrupt, 3 = unsupported
  volatile int failure = 0;
  std::string unsupported;

  if (setjmp(png_jmpbuf(png))) {
    failure = st.truncated ? 1 : 2;
  } else {
    png_set_read_fn(png, &st, png_read_from_span);
    png_read_info(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    const bool gray = color == PNG_COLOR_TYPE_GRAY ||
                      color == PNG_COLOR_TYPE_GRAY_ALPHA;
    const bool rgb = color == PNG_COLOR_TYPE_RGB ||
                     color == PNG_COLOR_TYPE_RGB_ALPHA;
    if (target == PngTarget::kColor && (!rgb || depth != 8)) {
      failure = 3;
      unsupported = "expected 8-bit RGB or RGBA PNG (color type " +
                    std::to_string(color) + ", bit depth " +
                    std::to_string(depth) + ")";
    } else if (target == PngTarget::kGray &&
               (!gray || depth > 8 ||
                (color == PNG_COLOR_TYPE_GRAY_ALPHA && depth != 8))) {
      failure = 3;
      unsupported = "expected 8-bit grayscale PNG (color type " +
                    std::to_string(color) + ", bit depth " +
                    std::to_string(depth) + ")";
    } else {
      if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
      png_set_strip_alpha(png);
      png_set_interlace_handling(png);
      png_read_update_info(png, info);
      out.width = static_cast<int>(png_get_image_width(png, info));
      out.height = static_cast<int>(png_get_image_height(png, info));
      out.channels = png_get_channels(png, info);
      const std::size_t stride = png_get_rowbytes(png, info);
      out.data.resize(stride * out.height);
      rows.resize(out.height);
      for (int y = 0; y < out.height; ++y) {
        rows[y] = out.data.data() + stride * y;
      }
      png_read_image(png, rows.data());
      png_read_end(png, nullptr);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);

  switch (failure) {
    case 1:
      throw TruncatedStreamError(name + ": truncated PNG stream");
    case 2:
      throw TruncatedStreamError(name + ": corrupt PNG stream (" +
                                 st.message + ")");
    case 3:
      throw UnsupportedFormatError(name + ": " + unsupported);
    default:
      break;
  }
  return out;
}

struct PngWriteState {
  Bytes* out;
  char message[256] = {};
};

extern "C" inline void png_write_to_vector(png_structp png, png_bytep data,
                                           png_size_t length) {
  auto* st = static_cast<PngWriteState*>(png_get_io_ptr(png));
  st->out->insert(st->out->end(), data, data + length);
}

extern "C" inline void png_flush_noop(png_structp) {}

extern "C" inline void png_write_error(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngWriteState*>(png_get_error_ptr(png));
  std::snprintf(st->message, sizeof(st->message), "%s", msg);
  png_longjmp(png, 1);
}

inline constexpr int kPngCompressionLevel = 6;

inline Bytes encode_png_raw(int width, int height, int channels,
                            std::span<const std::uint8_t> data) {
  Bytes out;
  PngWriteState st{&out};
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(data.data()) +
              static_cast<std::size_t>(y) * width * channels;
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st,
                                            png_write_error,
                                            png_silent_warning);
  if (png == nullptr) throw Error("libpng: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng: cannot allocate info struct");
  }
  volatile bool failed = false;
  if (setjmp(png_jmpbuf(png))) {
    failed = true;
  } else {
    png_set_write_fn(png, &st, png_write_to_vector, png_flush_noop);
    png_set_compression_level(png, kPngCompressionLevel);
    png_set_IHDR(png, info, width, height, 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  if (failed) throw WriteError(std::string("PNG encode failed: ") + st.message);
  return out;
}

// Netpbm header tokens may be separated by whitespace and '#' comments.
class PnmHeaderReader {
 public:
  PnmHeaderReader(std::span<const std::uint8_t> bytes, std::string name)
      : bytes_(bytes), name_(std::move(name)) {}

  long next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) {
      throw TruncatedStreamError(name_ + ": truncated PNM header");
    }
    if (!std::isdigit(bytes_[pos_])) {
      throw UnsupportedFormatError(name_ + ": malformed PNM header");
    }
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1L << 30)) {
        throw UnsupportedFormatError(name_ + ": PNM dimension too large");
      }
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size()) {
      throw TruncatedStreamError(name_ + ": truncated PNM header");
    }
    if (!std::isspace(bytes_[pos_])) {
      throw UnsupportedFormatError(name_ + ": malformed PNM header");
    }
    return pos_ + 1;
  }

  void skip(std::size_t n) { pos_ += n; }

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
  std::size_t pos_ = 0;
  std::string name_;
};

inline DecodedPixels decode_pnm(std::span<const std::uint8_t> bytes,
                                int channels, const std::string& name) {
  PnmHeaderReader header(bytes, name);
  header.skip(2);
  DecodedPixels out;
  out.channels = channels;
  const long w = header.next_int();
  const long h = header.next_int();
  const long maxval = header.next_int();
  if (w < 1 || h < 1) {
    throw UnsupportedFormatError(name + ": PNM dimensions must be >= 1");
  }
  if (maxval != 255) {
    throw UnsupportedFormatError(name + ": only maxval 255 is supported, got " +
                                 std::to_string(maxval));
  }
  const std::size_t start = header.raster_start();
  const std::size_t need = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() < start || bytes.size() - start < need) {
    throw TruncatedStreamError(name + ": truncated PNM raster (need " +
                               std::to_string(need) + " bytes)");
  }
  out.width = static_cast<int>(w);
  out.height = static_cast<int>(h);
  out.data.assign(bytes.begin() + start, bytes.begin() + start + need);
  return out;
}

inline Bytes encode_pnm(int width, int height, int channels,
                        std::span<const std::uint8_t> data) {
  const std::string header = std::string(channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(width) + " " +
                             std::to_string(height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace detail

inline Bytes read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw MissingFileError("no such file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open: " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in),
               std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WriteError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WriteError("write failed: " + path.string());
}

/// Picks the output container from the extension: .ppm / .pgm are Netpbm,
/// .png is PNG. Anything else is rejected.
inline FileFormat format_for_path(const std::filesystem::path& path) {
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") return FileFormat::kPng;
  if (ext == ".ppm") return FileFormat::kPpm;
  if (ext == ".pgm") return FileFormat::kPgm;
  throw UnsupportedFormatError("unsupported file extension: " + path.string());
}

inline Image decode_image(std::span<const std::uint8_t> bytes,
                          const std::string& name = "<memory>") {
  detail::DecodedPixels px;
  if (detail::has_png_signature(bytes)) {
    px = detail::decode_png(bytes, detail::PngTarget::kColor, name);
  } else if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
    px = detail::decode_pnm(bytes, 3, name);
  } else if (bytes.size() < 2) {
    throw TruncatedStreamError(name + ": empty or truncated file");
  } else {
    throw UnsupportedFormatError(name + ": not a PNG or binary PPM (P6)");
  }
  return Image(px.width, px.height, std::move(px.data));
}

inline Image load_image(const std::filesystem::path& path) {
  return decode_image(read_file(path), path.string());
}

inline Bytes encode_image(const Image& img, FileFormat format) {
  switch (format) {
    case FileFormat::kPng:
      return detail::encode_png_raw(img.width(), img.height(), 3, img.data());
    case FileFormat::kPpm:
      return detail::encode_pnm(img.width(), img.height(), 3, img.data());
    case FileFormat::kPgm:
      break;
  }
  throw UnsupportedFormatError("RGB images cannot be written as PGM");
}

inline void save_image(const Image& img, const std::filesystem::path& path) {
  write_file(path, encode_image(img, format_for_path(path)));
}

/// Grayscale map; each 8-bit sample becomes sample / 255.
inline SaliencyMap decode_saliency(std::span<const std::uint8_t> bytes,
                                   const std::string& name = "<memory>") {
  detail::DecodedPixels px;
  if (detail::has_png_signature(bytes)) {
    px = detail::decode_png(bytes, detail::PngTarget::kGray, name);
  } else if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
    px = detail::decode_pnm(bytes, 1, name);
  } else if (bytes.size() < 2) {
    throw TruncatedStreamError(name + ": empty or truncated file");
  } else {
    throw UnsupportedFormatError(name +
                                 ": not a grayscale PNG or binary PGM (P5)");
  }
  std::vector<float> values(px.data.size());
  std::transform(px.data.begin(), px.data.end(), values.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
  return SaliencyMap(px.width, px.height, std::move(values));
}

inline SaliencyMap load_saliency(const std::filesystem::path& path) {
  return decode_saliency(read_file(path), path.string());
}

/// Writes foreground as 255 and background as 0.
inline Bytes encode_mask(const BinaryMask& mask, FileFormat format) {
  Bytes gray(mask.data().size());
  std::transform(mask.data().begin(), mask.data().end(), gray.begin(),
                 [](std::uint8_t b) -> std::uint8_t { return b ? 255 : 0; });
  switch (format) {
    case FileFormat::kPng:
      return detail::encode_png_raw(mask.width(), mask.height(), 1, gray);
    case FileFormat::kPgm:
      return detail::encode_pnm(mask.width(), mask.height(), 1, gray);
    case FileFormat::kPpm:
      break;
  }
  throw UnsupportedFormatError("masks cannot be written as PPM");
}

inline void save_mask(const BinaryMask& mask,
                      const std::filesystem::path& path) {
  write_file(path, encode_mask(mask, format_for_path(path)));
}

inline BinaryMask load_mask(const std::filesystem::path& path,
                            double theta = kDefaultTheta) {
  return threshold_mask(load_saliency(path), theta);
}

}  // namespace fbaug
