#pragma once

#include <png.h>
#include <jpeglib.h>
#include <unistd.h>

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "tissueseg/image.hpp"

namespace tissueseg {

using Bytes = std::vector<std::uint8_t>;

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IOFailure, "cannot open " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::IOFailure, "read failed for " + path.string());
  return data;
}

/// Writes and fsyncs a sibling temp file, then renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const Bytes& data) {
  auto tmp = path;
  tmp += ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw Error(ErrorKind::IOFailure, "cannot write " + tmp.string());
  const bool ok = std::fwrite(data.data(), 1, data.size(), f) == data.size() &&
                  std::fflush(f) == 0 && ::fsync(::fileno(f)) == 0;
  if (std::fclose(f) != 0 || !ok) {
    std::filesystem::remove(tmp);
    throw Error(ErrorKind::IOFailure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IOFailure, "rename to " + path.string() + ": " + ec.message());
}

namespace detail {

struct PngReadState {
  const Bytes* data;
  std::size_t offset;
};

inline void png_read_bytes(png_structp png, png_bytep out, png_size_t length) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->offset + length > st->data->size()) png_error(png, "truncated PNG");
  std::memcpy(out, st->data->data() + st->offset, length);
  st->offset += length;
}

inline void png_write_bytes(png_structp png, png_bytep in, png_size_t length) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + length);
}

inline void png_flush_noop(png_structp) {}

inline bool is_png(const Bytes& data) {
  return data.size() >= 8 && png_sig_cmp(data.data(), 0, 8) == 0;
}

inline bool is_jpeg(const Bytes& data) {
  return data.size() >= 3 && data[0] == 0xFF && data[1] == 0xD8 && data[2] == 0xFF;
}

// Decodes any PNG into 8-bit samples with `channels` = 1 (gray) or 3 (RGB).
// Alpha is dropped; 16-bit is stripped to 8.
inline std::vector<std::uint8_t> decode_png(const Bytes& data, int channels, int& width,
                                            int& height) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorKind::IOFailure, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorKind::IOFailure, "png_create_info_struct failed");
  }
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  PngReadState state{&data, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::IOFailure, "malformed PNG");
  }
  png_set_read_fn(png, &state, png_read_bytes);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  const bool source_gray = color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
  if (channels == 3 && source_gray) png_set_gray_to_rgb(png);
  if (channels == 1 && !source_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const auto rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<std::size_t>(width) * channels) {
    png_error(png, "unexpected row layout");
  }
  pixels.resize(rowbytes * height);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = pixels.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

inline Bytes encode_png(const std::uint8_t* pixels, int width, int height, int channels) {
  Bytes out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorKind::IOFailure, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorKind::IOFailure, "png_create_info_struct failed");
  }
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::IOFailure, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_write_bytes, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 3);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * width * channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

inline RgbImage decode_jpeg(const Bytes& data) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  std::vector<std::uint8_t> pixels;
  int width = 0, height = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::IOFailure, "malformed JPEG");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data.data(), static_cast<unsigned long>(data.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return RgbImage(width, height, std::move(pixels));
}

}  // namespace detail

/// PNG or JPEG bytes to RGB; the format is sniffed from the signature.
inline RgbImage decode_rgb(const Bytes& data) {
  if (detail::is_png(data)) {
    int w = 0, h = 0;
    auto px = detail::decode_png(data, 3, w, h);
    return RgbImage(w, h, std::move(px));
  }
  if (detail::is_jpeg(data)) return detail::decode_jpeg(data);
  throw Error(ErrorKind::IOFailure, "unsupported image format (expected PNG or JPEG)");
}

inline GrayImage decode_gray_png(const Bytes& data) {
  if (!detail::is_png(data)) throw Error(ErrorKind::IOFailure, "not a PNG stream");
  int w = 0, h = 0;
  auto px = detail::decode_png(data, 1, w, h);
  return GrayImage(w, h, std::move(px));
}

struct MaskDecodeReport {
  /// Pixels whose value was neither 0 nor 255 before binarization.
  std::size_t non_binary_pixels = 0;
};

/// Mask PNG to BinaryMask: values >= 128 are tissue.
inline BinaryMask decode_mask_png(const Bytes& data, MaskDecodeReport* report = nullptr) {
  const auto gray = decode_gray_png(data);
  BinaryMask mask(gray.width(), gray.height());
  std::size_t odd = 0;
  for (std::size_t i = 0; i < gray.pixel_count(); ++i) {
    const auto v = gray[i];
    if (v != 0 && v != 255) ++odd;
    mask[i] = v >= 128 ? 1 : 0;
  }
  if (report) report->non_binary_pixels = odd;
  return mask;
}

inline Bytes encode_png(const RgbImage& img) {
  return detail::encode_png(img.data().data(), img.width(), img.height(), 3);
}

inline Bytes encode_png(const GrayImage& img) {
  return detail::encode_png(img.data().data(), img.width(), img.height(), 1);
}

/// 8-bit grayscale PNG with 0 = background, 255 = tissue.
inline Bytes encode_mask_png(const BinaryMask& mask) {
  std::vector<std::uint8_t> px(mask.pixel_count());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = mask[i] ? 255 : 0;
  return detail::encode_png(px.data(), mask.width(), mask.height(), 1);
}

inline RgbImage read_rgb(const std::filesystem::path& path) { return decode_rgb(read_file(path)); }

inline BinaryMask read_mask(const std::filesystem::path& path,
                            MaskDecodeReport* report = nullptr) {
  return decode_mask_png(read_file(path), report);
}

inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
  write_file_atomic(path, encode_png(img));
}

inline void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  write_file_atomic(path, encode_mask_png(mask));
}

}  // namespace tissueseg
