#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hashnet/tensor.hpp"

namespace hashnet {

/// One manifest row: a unique image id, the image path (resolved against
/// the manifest's directory when relative) and a class label index.
struct ManifestRecord {
    std::string id;
    std::string path;
    std::size_t label = 0;
};

/// Parsed and validated manifest. Labels are dense: every index in
/// [0, num_classes) occurs at least once.
struct DatasetManifest {
    std::vector<ManifestRecord> records;
    std::size_t num_classes = 0;
    std::vector<std::string> label_names;  // generated "classN" names
};

/// Loads a `id,path,label` CSV (header required). Rejects duplicate ids,
/// non-dense labels and malformed rows, naming the line.
DatasetManifest load_manifest(const std::string& path);

/// One in-memory training image: [3,H,W] tensor with values in [0,1].
struct ImageRecord {
    std::string id;
    std::size_t label = 0;
    Tensor chw;
};

struct Dataset {
    std::size_t num_classes = 0;
    std::vector<std::string> label_names;
    std::vector<ImageRecord> items;
};

/// Decodes a binary PPM (P6) or PGM (P5) file with 8-bit samples into a
/// [3,H,W] tensor scaled by 1/255; PGM grayscale is replicated to all
/// three channels.
Tensor decode_image(const std::string& path);

/// Writes a [3,H,W] tensor with values in [0,1] as an 8-bit binary PPM
/// (samples rounded to the nearest of 256 levels).
void write_ppm(const std::string& path, const Tensor& chw);

/// Corner-aligned bilinear resize of a [C,H,W] tensor: output pixel i maps
/// to source coordinate i*(in-1)/(out-1) (0 when out == 1). Same-size
/// resize returns the input unchanged.
Tensor resize_bilinear(const Tensor& chw, std::size_t out_h, std::size_t out_w);

/// Decodes every manifest record and resizes to height x width. Errors
/// name the offending record.
Dataset load_dataset(const DatasetManifest& manifest, std::size_t height, std::size_t width);

/// Deterministic class-distinguishable images: a class-colored filled
/// circle with jittered position and per-pixel noise on a dark background.
/// Pixel values are quantized to the 8-bit grid, so writing to PPM and
/// reloading reproduces the tensors exactly.
Dataset generate_synthetic(std::size_t classes, std::size_t per_class, std::size_t size,
                           std::uint64_t seed);

/// Writes every item as `<id>.ppm` plus a `manifest.csv` into `dir`
/// (created if missing).
void write_dataset(const Dataset& data, const std::string& dir);

} // namespace hashnet
