#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "meshlearn/dataset.hpp"
#include "meshlearn/errors.hpp"
#include "meshlearn/matrix.hpp"

namespace meshlearn {

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4))
    throw FormatError("idx: truncated header in " + path);
  return (std::uint32_t{buf[0]} << 24) | (std::uint32_t{buf[1]} << 16) |
         (std::uint32_t{buf[2]} << 8) | std::uint32_t{buf[3]};
}

}  // namespace detail

// Reader for the big-endian IDX image/label format. Pixels are scaled to
// [0, 1]; each image becomes one flattened feature row.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        int n_classes = 10) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("idx: cannot open " + labels_path);

  const std::uint32_t img_magic = detail::read_be_u32(img, images_path);
  if (img_magic != 0x00000803u)
    throw FormatError("idx: bad image magic in " + images_path);
  const std::uint32_t n_images = detail::read_be_u32(img, images_path);
  const std::uint32_t rows = detail::read_be_u32(img, images_path);
  const std::uint32_t cols = detail::read_be_u32(img, images_path);

  const std::uint32_t lab_magic = detail::read_be_u32(lab, labels_path);
  if (lab_magic != 0x00000801u)
    throw FormatError("idx: bad label magic in " + labels_path);
  const std::uint32_t n_labels = detail::read_be_u32(lab, labels_path);
  if (n_images != n_labels)
    throw FormatError("idx: " + std::to_string(n_images) + " images vs " +
                      std::to_string(n_labels) + " labels");

  const std::size_t dims = static_cast<std::size_t>(rows) * cols;
  Dataset out;
  out.n_classes = n_classes;
  out.features = Matrix(n_images, dims);
  out.labels.resize(n_images);

  std::vector<unsigned char> pixel_row(dims);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    if (!img.read(reinterpret_cast<char*>(pixel_row.data()),
                  static_cast<std::streamsize>(dims)))
      throw FormatError("idx: truncated image data in " + images_path);
    double* dst = out.features.row_ptr(i);
    for (std::size_t d = 0; d < dims; ++d) dst[d] = pixel_row[d] / 255.0;

    unsigned char label;
    if (!lab.read(reinterpret_cast<char*>(&label), 1))
      throw FormatError("idx: truncated label data in " + labels_path);
    if (label >= n_classes)
      throw FormatError("idx: label " + std::to_string(int{label}) + " out of range in " +
                        labels_path);
    out.labels[i] = int{label};
  }
  return out;
}

}  // namespace meshlearn
