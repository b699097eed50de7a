#include "lssat/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "lssat/error.hpp"
#include "lssat/metrics.hpp"
#include "lssat/rng.hpp"

namespace lssat {

ImageTensor Dataset::batch(std::span<const std::size_t> indices) const {
  const std::size_t plane = channels * height * width;
  std::vector<double> values;
  values.reserve(indices.size() * plane);
  for (auto i : indices) {
    const auto& px = samples.at(i).pixels;
    values.insert(values.end(), px.begin(), px.end());
  }
  return ImageTensor({indices.size(), 1, channels, height, width}, std::move(values));
}

std::vector<std::size_t> Dataset::labels(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> out;
  for (auto i : indices) {
    const auto& l = samples.at(i).label;
    out.insert(out.end(), l.begin(), l.end());
  }
  return out;
}

std::vector<std::size_t> Dataset::all_indices() const {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset d = *this;
  d.samples.clear();
  d.samples.reserve(indices.size());
  for (auto i : indices) d.samples.push_back(samples.at(i));
  return d;
}

std::vector<double> resize_bilinear(std::span<const double> src, std::size_t channels,
                                    std::size_t src_h, std::size_t src_w, std::size_t dst_h,
                                    std::size_t dst_w) {
  if (src.size() != channels * src_h * src_w || src_h == 0 || src_w == 0) {
    throw DataError("resize: source buffer does not match its dimensions");
  }
  std::vector<double> out(channels * dst_h * dst_w);
  auto coord = [](std::size_t i, std::size_t src_n, std::size_t dst_n) {
    if (dst_n <= 1) return 0.0;
    return static_cast<double>(i * (src_n - 1)) / static_cast<double>(dst_n - 1);
  };
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = src.data() + c * src_h * src_w;
    for (std::size_t y = 0; y < dst_h; ++y) {
      const double sy = coord(y, src_h, dst_h);
      const std::size_t y0 = static_cast<std::size_t>(std::floor(sy));
      const std::size_t y1 = std::min(y0 + 1, src_h - 1);
      const double fy = sy - static_cast<double>(y0);
      for (std::size_t x = 0; x < dst_w; ++x) {
        const double sx = coord(x, src_w, dst_w);
        const std::size_t x0 = static_cast<std::size_t>(std::floor(sx));
        const std::size_t x1 = std::min(x0 + 1, src_w - 1);
        const double fx = sx - static_cast<double>(x0);
        double v = plane[y0 * src_w + x0];
        if (fx != 0.0 || fy != 0.0) {
          v = (1 - fy) * ((1 - fx) * plane[y0 * src_w + x0] + fx * plane[y0 * src_w + x1]) +
              fy * ((1 - fx) * plane[y1 * src_w + x0] + fx * plane[y1 * src_w + x1]);
        }
        out[(c * dst_h + y) * dst_w + x] = v;
      }
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
    out.push_back(f);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::size_t parse_label(const std::string& field, const std::string& where) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(field, &pos);
    if (pos != field.size() || v < 0) throw std::invalid_argument(field);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw DataError(where + ": label '" + field + "' is not a non-negative integer");
  }
}

std::vector<double> raster_planes(const Raster& r) {
  // interleaved -> channel-major, gray replicated to 3 channels
  const std::size_t plane = r.height * r.width;
  std::vector<double> out(3 * plane);
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t sc = r.channels == 1 ? 0 : c;
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = r.pixels[i * r.channels + sc] / 255.0;
  }
  return out;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& root, const std::filesystem::path& labels_csv,
                     const LoadOptions& options) {
  std::ifstream in(labels_csv);
  if (!in) throw DataError("cannot open labels file " + labels_csv.string());
  Dataset d;
  d.height = options.height;
  d.width = options.width;
  std::string line;
  if (!std::getline(in, line)) throw DataError(labels_csv.string() + ": empty labels file");
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "filename") {
    throw DataError(labels_csv.string() + ":1: header must start with 'filename'");
  }
  if (header.size() == 2 && header[1] == "label") {
    d.task = TaskKind::kMulticlass;
    d.num_classes = options.num_classes;
  } else {
    for (std::size_t i = 1; i < header.size(); ++i) {
      if (header[i] != "attr_" + std::to_string(i - 1)) {
        throw DataError(labels_csv.string() + ":1: expected column attr_" + std::to_string(i - 1) +
                        ", found '" + header[i] + "'");
      }
    }
    d.task = TaskKind::kMultiAttribute;
    d.num_classes = header.size() - 1;
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = labels_csv.string() + ":" + std::to_string(line_no);
    const auto fields = split_csv(line);
    if (fields.size() != header.size() || fields[0].empty()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    Sample s;
    s.name = fields[0];
    for (std::size_t i = 1; i < fields.size(); ++i) s.label.push_back(parse_label(fields[i], where));
    if (d.task == TaskKind::kMulticlass && s.label[0] >= d.num_classes) {
      throw DataError(where + ": label " + std::to_string(s.label[0]) + " out of range for " +
                      std::to_string(d.num_classes) + " classes");
    }
    if (d.task == TaskKind::kMultiAttribute) {
      for (auto b : s.label) {
        if (b > 1) throw DataError(where + ": attribute values must be 0 or 1");
      }
    }
    const auto ext = std::filesystem::path(s.name).extension().string();
    if (ext != ".ppm" && ext != ".pgm" && ext != ".pnm") {
      throw DataError(where + ": unsupported image format '" + ext + "' (PGM/PPM only)");
    }
    const Raster r = read_netpbm(root / s.name);
    const auto planes = raster_planes(r);
    s.pixels = (r.height == d.height && r.width == d.width)
                   ? planes
                   : resize_bilinear(planes, 3, r.height, r.width, d.height, d.width);
    d.samples.push_back(std::move(s));
  }
  return d;
}

Raster sample_raster(const Dataset& d, std::size_t index) {
  const auto& px = d.samples.at(index).pixels;
  const std::size_t plane = d.height * d.width;
  Raster r{d.height, d.width, 3, std::vector<std::uint8_t>(3 * plane)};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double v = std::clamp(px[c * plane + i], 0.0, 1.0);
      r.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return r;
}

void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "labels.csv");
  if (!csv) throw DataError("cannot write " + (dir / "labels.csv").string());
  csv << "filename";
  if (d.task == TaskKind::kMulticlass) {
    csv << ",label";
  } else {
    for (std::size_t k = 0; k < d.num_classes; ++k) csv << ",attr_" << k;
  }
  csv << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::ostringstream name;
    name << "sample_" << std::setw(5) << std::setfill('0') << i << ".ppm";
    write_netpbm(sample_raster(d, i), dir / name.str());
    csv << name.str();
    for (auto l : d.samples[i].label) csv << ',' << l;
    csv << '\n';
  }
}

DatasetSplits split(const Dataset& dataset, const SplitSpec& spec) {
  if (spec.train < 0 || spec.val < 0 || spec.test < 0 ||
      std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw RangeError("split: fractions must be non-negative and sum to 1");
  }
  const std::size_t n = dataset.size();
  auto order = dataset.all_indices();
  auto engine = make_engine(spec.seed, {stream_id(RngStream::kSplit)});
  std::shuffle(order.begin(), order.end(), engine);
  const auto n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(spec.train * n)));
  const auto n_val = std::min<std::size_t>(n - n_train, static_cast<std::size_t>(std::llround(spec.val * n)));
  std::span<const std::size_t> all(order);
  DatasetSplits out{dataset.subset(all.subspan(0, n_train)),
                    dataset.subset(all.subspan(n_train, n_val)),
                    dataset.subset(all.subspan(n_train + n_val))};
  if (out.train.size() == 0) throw DataError("split: empty train split");
  if (spec.require_val && out.val.size() == 0) throw DataError("split: empty validation split");
  if (spec.require_test && out.test.size() == 0) throw DataError("split: empty test split");
  return out;
}

namespace {

using Plane = std::vector<double>;

Plane box_blur(const Plane& src, std::size_t n, int radius) {
  Plane out(src.size());
  const int size = static_cast<int>(n);
  const double norm = 1.0 / ((2 * radius + 1) * (2 * radius + 1));
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double s = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const int yy = (y + dy + size) % size, xx = (x + dx + size) % size;
          s += src[static_cast<std::size_t>(yy * size + xx)];
        }
      }
      out[static_cast<std::size_t>(y * size + x)] = s * norm;
    }
  }
  return out;
}

Plane gaussian_noise(std::size_t n, std::mt19937_64& engine) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Plane p(n * n);
  for (auto& v : p) v = normal(engine);
  return p;
}

// Histogram matching onto a uniform marginal with mean 0.5 and standard
// deviation 0.15: the pixel at rank r takes quantile (r + 0.5) / n, and tied
// pixels share the mean of their quantiles. Every image ends up with the
// same value distribution, so only the spatial arrangement differs.
void normalize(Plane& p) {
  const std::size_t n = p.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  const double half_range = 0.15 * std::sqrt(3.0);
  auto quantile = [&](std::size_t r) {
    return 0.5 + half_range * (2.0 * (static_cast<double>(r) + 0.5) / static_cast<double>(n) - 1.0);
  };
  Plane out(n);
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    double sum = 0.0;
    while (hi < n && p[order[hi]] == p[order[lo]]) sum += quantile(hi++);
    for (std::size_t r = lo; r < hi; ++r) out[order[r]] = sum / static_cast<double>(hi - lo);
    lo = hi;
  }
  p = std::move(out);
}

Plane texture(std::size_t family, std::size_t n, std::mt19937_64& engine) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Plane p(n * n);
  switch (family) {
    case 0: {  // oriented stripes
      const double theta = u(engine) * std::numbers::pi;
      const double period = 4.0 + 4.0 * u(engine);
      const double phase = u(engine) * 2.0 * std::numbers::pi;
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
          p[y * n + x] = std::sin(2.0 * std::numbers::pi * (x * std::cos(theta) + y * std::sin(theta)) / period + phase);
      break;
    }
    case 1:  // smoothed noise
      p = box_blur(box_blur(gaussian_noise(n, engine), n, 1), n, 1);
      break;
    case 2: {  // checkerboard
      const std::size_t cell = 2 + static_cast<std::size_t>(u(engine) * 3.0);
      const std::size_t ox = static_cast<std::size_t>(u(engine) * cell), oy = static_cast<std::size_t>(u(engine) * cell);
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) p[y * n + x] = (((x + ox) / cell + (y + oy) / cell) % 2) ? 1.0 : -1.0;
      break;
    }
    default: {  // sparse speckle
      for (auto& v : p) v = u(engine) < 0.1 ? 1.0 : 0.0;
      break;
    }
  }
  normalize(p);
  return p;
}

Plane deepfake_texture(bool fake, std::size_t n, std::mt19937_64& engine) {
  Plane p = gaussian_noise(n, engine);
  if (fake) {
    // Smooth a random half-size square region with a 5x5 box filter.
    const std::size_t region = n / 2;
    std::uniform_int_distribution<std::size_t> pos(0, n - region);
    const std::size_t y0 = pos(engine), x0 = pos(engine);
    const Plane blurred = box_blur(p, n, 2);
    for (std::size_t y = y0; y < y0 + region; ++y)
      for (std::size_t x = x0; x < x0 + region; ++x) p[y * n + x] = blurred[y * n + x];
  }
  normalize(p);
  return p;
}

}  // namespace

Dataset generate_synthetic(std::size_t per_class, std::size_t classes, std::size_t size,
                           std::uint64_t seed, SynthKind kind) {
  if (classes < 2 || classes > 4) throw RangeError("synthetic: supports 2 to 4 classes");
  if (kind == SynthKind::kDeepfake && classes != 2) throw RangeError("synthetic: deepfake task has 2 classes");
  if (size < 3) throw RangeError("synthetic: image size must be at least 3");
  Dataset d;
  d.height = d.width = size;
  d.num_classes = classes;
  d.task = TaskKind::kMulticlass;
  const std::size_t plane = size * size;
  // Interleave classes so any prefix is balanced.
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      auto engine = make_engine(seed, {stream_id(RngStream::kSynth), static_cast<std::uint64_t>(kind), c, i});
      const Plane p = kind == SynthKind::kTextures ? texture(c, size, engine) : deepfake_texture(c == 1, size, engine);
      Sample s;
      s.name = "synth_" + std::to_string(c) + "_" + std::to_string(i);
      s.pixels.resize(3 * plane);
      for (std::size_t ch = 0; ch < 3; ++ch) std::copy(p.begin(), p.end(), s.pixels.begin() + static_cast<std::ptrdiff_t>(ch * plane));
      s.label = {c};
      d.samples.push_back(std::move(s));
    }
  }
  return d;
}

double mean_intensity_baseline(const Dataset& train, const Dataset& test) {
  if (train.task != TaskKind::kMulticlass || train.size() == 0 || test.size() == 0) {
    throw DataError("mean-intensity baseline: needs non-empty multiclass train and test sets");
  }
  auto feature = [](const Sample& s) {
    return std::accumulate(s.pixels.begin(), s.pixels.end(), 0.0) / static_cast<double>(s.pixels.size());
  };
  const std::size_t k = train.num_classes;
  std::vector<std::size_t> preds, labels;
  if (k == 2) {
    // Best threshold and polarity on train.
    std::vector<std::pair<double, std::size_t>> pts;
    for (const auto& s : train.samples) pts.emplace_back(feature(s), s.label[0]);
    std::sort(pts.begin(), pts.end());
    double best_acc = -1.0, best_thr = 0.0;
    bool best_above_is_one = true;
    for (std::size_t cut = 0; cut <= pts.size(); ++cut) {
      const double thr = cut == 0 ? pts.front().first - 1.0
                         : cut == pts.size() ? pts.back().first + 1.0
                                             : 0.5 * (pts[cut - 1].first + pts[cut].first);
      for (bool above_is_one : {true, false}) {
        std::vector<std::size_t> p, l;
        for (const auto& [f, y] : pts) {
          p.push_back(((f > thr) == above_is_one) ? 1 : 0);
          l.push_back(y);
        }
        const double acc = accuracy(p, l).average;
        if (acc > best_acc) best_acc = acc, best_thr = thr, best_above_is_one = above_is_one;
      }
    }
    for (const auto& s : test.samples) {
      preds.push_back(((feature(s) > best_thr) == best_above_is_one) ? 1 : 0);
      labels.push_back(s.label[0]);
    }
  } else {
    std::vector<double> sum(k, 0.0), count(k, 0.0);
    for (const auto& s : train.samples) sum[s.label[0]] += feature(s), count[s.label[0]] += 1.0;
    for (const auto& s : test.samples) {
      const double f = feature(s);
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t c = 0; c < k; ++c) {
        if (count[c] == 0) continue;
        const double dist = std::abs(f - sum[c] / count[c]);
        if (dist < best_d) best_d = dist, best = c;
      }
      preds.push_back(best);
      labels.push_back(s.label[0]);
    }
  }
  return accuracy(preds, labels).average;
}

}  // namespace lssat
