#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lssat/image_tensor.hpp"
#include "lssat/model.hpp"
#include "lssat/netpbm.hpp"

namespace lssat {

struct Sample {
  std::string name;
  std::vector<double> pixels;       // channels x H x W, values in [0,1]
  std::vector<std::size_t> label;   // {class} or one bit per attribute
};

struct Dataset {
  std::size_t channels = 3;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t num_classes = 2;
  TaskKind task = TaskKind::kMulticlass;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  // [n,1,C,H,W] stack of the selected samples.
  ImageTensor batch(std::span<const std::size_t> indices) const;
  // Class index per sample, or all attribute bits sample-major.
  std::vector<std::size_t> labels(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> all_indices() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

struct LoadOptions {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t num_classes = 2;  // ignored for attribute CSVs (taken from the header)
};

// Reads `labels_csv` (header "filename,label" or "filename,attr_0,...") and
// the PGM/PPM images it names, relative to `root`. Images are resized
// bilinearly (corner-aligned) to the requested size; gray becomes 3 channels.
Dataset load_dataset(const std::filesystem::path& root, const std::filesystem::path& labels_csv,
                     const LoadOptions& options = {});

// Writes sample_NNNNN.ppm files and labels.csv into `dir`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

Raster sample_raster(const Dataset& dataset, std::size_t index);

// Corner-aligned bilinear resize of a channels x H x W plane stack.
std::vector<double> resize_bilinear(std::span<const double> src, std::size_t channels,
                                    std::size_t src_h, std::size_t src_w, std::size_t dst_h,
                                    std::size_t dst_w);

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;
  bool require_val = false;
  bool require_test = true;
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Seeded shuffle, then contiguous slices of round(train*n), round(val*n)
// and the remainder.
DatasetSplits split(const Dataset& dataset, const SplitSpec& spec);

enum class SynthKind {
  kTextures,  // one texture family per class
  kDeepfake,  // class 0 raw noise texture, class 1 with a locally smoothed region
};

// Balanced synthetic dataset. Every image is normalized to the same global
// mean and standard deviation, so only texture separates the classes.
Dataset generate_synthetic(std::size_t per_class, std::size_t classes, std::size_t size,
                           std::uint64_t seed, SynthKind kind = SynthKind::kTextures);

// Unweighted class-average test accuracy of a classifier that sees only each
// image's mean intensity (best train threshold for two classes, nearest
// class mean otherwise).
double mean_intensity_baseline(const Dataset& train, const Dataset& test);

}  // namespace lssat
