#include "secci/imaging.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "secci/rng.hpp"
#include "io_bytes.hpp"

namespace secci {
namespace {

constexpr char kMagic[5] = {'S', 'E', 'C', 'C', 'I'};
constexpr std::uint16_t kFormatVersion = 1;

float normalize_to_unit(double v, double lo, double hi) {
  const double t = (v - lo) / (hi - lo);
  return static_cast<float>(std::clamp(t, 0.0, 1.0));
}

}  // namespace

NormalizationSpec compute_amp_range(std::span<const FeatureVector> features) {
  NormalizationSpec norm;
  if (features.empty()) return norm;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& f : features) {
    for (double a : f.amp_avg) {
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  }
  if (!(hi > lo)) hi = lo + 1.0;
  norm.amp_lo = lo;
  norm.amp_hi = hi;
  return norm;
}

std::vector<CsiImage> build_images(std::span<const FeatureVector> features,
                                   int window,
                                   const NormalizationSpec& norm) {
  if (window < 1) throw ConfigError("image window must be at least 1 packet");
  if (!(norm.amp_lo < norm.amp_hi))
    throw ConfigError("amplitude normalization range must have lo < hi");

  const std::size_t n_images = features.size() / static_cast<std::size_t>(window);
  std::vector<CsiImage> images(n_images);
  for (std::size_t i = 0; i < n_images; ++i) {
    CsiImage& img = images[i];
    img.rows = window;
    img.pixels.assign(static_cast<std::size_t>(CsiImage::kChannels) * window *
                          CsiImage::kCols,
                      0.0f);
    for (int r = 0; r < window; ++r) {
      const FeatureVector& f = features[i * window + r];
      for (int c = 0; c < CsiImage::kCols; ++c) {
        img.at(0, r, c) = normalize_to_unit(f.amp_avg[c], norm.amp_lo, norm.amp_hi);
        img.at(1, r, c) = normalize_to_unit(f.aoa[c], 0.0, M_PI);
        img.at(2, r, c) = normalize_to_unit(f.phase_diff[c], -M_PI, M_PI);
      }
    }
  }
  return images;
}

void save_dataset(const Dataset& d, const std::string& path) {
  int rows = 0;
  for (const auto& li : d.images) {
    if (rows == 0) rows = li.image.rows;
    if (li.image.rows != rows)
      throw StructuralError("dataset images disagree on row count");
    const std::size_t expected = static_cast<std::size_t>(CsiImage::kChannels) *
                                 li.image.rows * CsiImage::kCols;
    if (li.image.pixels.size() != expected)
      throw StructuralError("image pixel buffer does not match its shape");
  }

  nlohmann::json header;
  header["channels"] = CsiImage::kChannels;
  header["image_cols"] = CsiImage::kCols;
  header["image_rows"] = rows;
  header["n_images"] = d.images.size();
  header["normalization"] = {{"amp_lo", d.normalization.amp_lo},
                             {"amp_hi", d.normalization.amp_hi}};
  header["geometry"] = {{"spacing_m", d.geometry.spacing_m},
                        {"carrier_hz", d.geometry.carrier_hz}};
  header["provenance"] = {{"source", d.provenance.source},
                          {"seed", d.provenance.seed}};
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& s : d.sites)
    sites.push_back({s.id, s.coords[0], s.coords[1]});
  header["sites"] = sites;
  const std::string header_str = header.dump();

  detail::ByteWriter w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u16(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(header_str.size()));
  w.bytes(header_str.data(), header_str.size());
  for (const auto& li : d.images) {
    w.u32(li.site_id);
    w.f64(li.coords[0]);
    w.f64(li.coords[1]);
    for (float v : li.image.pixels) w.f32(v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open dataset file for writing: " + path);
  out.write(reinterpret_cast<const char*>(w.data().data()),
            static_cast<std::streamsize>(w.data().size()));
  if (!out) throw Error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  detail::ByteReader r(bytes);

  const auto magic = r.raw(sizeof(kMagic), "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError(FormatError::Kind::bad_magic,
                      "not a dataset file (bad magic)");
  const std::uint16_t version = r.u16("version");
  if (version != kFormatVersion)
    throw FormatError(FormatError::Kind::version_mismatch,
                      "unsupported dataset format version " +
                          std::to_string(version));

  const std::uint32_t header_len = r.u32("header length");
  const auto header_bytes = r.raw(header_len, "header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::field_invalid,
                      std::string("header is not valid JSON: ") + e.what());
  }

  Dataset d;
  int rows = 0;
  std::uint64_t n_images = 0;
  try {
    const int channels = header.at("channels").get<int>();
    const int cols = header.at("image_cols").get<int>();
    rows = header.at("image_rows").get<int>();
    if (channels != CsiImage::kChannels || cols != CsiImage::kCols || rows < 0)
      throw FormatError(FormatError::Kind::shape_mismatch,
                        "header declares an unsupported image shape");
    n_images = header.at("n_images").get<std::uint64_t>();
    d.normalization.amp_lo = header.at("normalization").at("amp_lo").get<double>();
    d.normalization.amp_hi = header.at("normalization").at("amp_hi").get<double>();
    d.geometry.spacing_m = header.at("geometry").at("spacing_m").get<double>();
    d.geometry.carrier_hz = header.at("geometry").at("carrier_hz").get<double>();
    d.provenance.source = header.at("provenance").at("source").get<std::string>();
    d.provenance.seed = header.at("provenance").at("seed").get<std::uint64_t>();
    for (const auto& s : header.at("sites")) {
      SiteInfo info;
      info.id = s.at(0).get<std::uint32_t>();
      info.coords = {s.at(1).get<double>(), s.at(2).get<double>()};
      d.sites.push_back(info);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::field_invalid,
                      std::string("header field missing or mistyped: ") + e.what());
  }

  const std::size_t pixels_per_image =
      static_cast<std::size_t>(CsiImage::kChannels) * rows * CsiImage::kCols;
  d.images.reserve(n_images);
  for (std::uint64_t i = 0; i < n_images; ++i) {
    LabeledImage li;
    li.site_id = r.u32("image record");
    li.coords[0] = r.f64("image record");
    li.coords[1] = r.f64("image record");
    li.image.rows = rows;
    li.image.pixels.resize(pixels_per_image);
    const auto raw = r.raw(pixels_per_image * 4, "pixel data");
    for (std::size_t k = 0; k < pixels_per_image; ++k) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b)
        u |= static_cast<std::uint32_t>(raw[k * 4 + b]) << (8 * b);
      const float v = std::bit_cast<float>(u);
      if (!(v >= 0.0f && v <= 1.0f))
        throw FormatError(FormatError::Kind::field_invalid,
                          "pixel value outside [0, 1]");
      li.image.pixels[k] = v;
    }
    const bool known_site =
        std::any_of(d.sites.begin(), d.sites.end(),
                    [&](const SiteInfo& s) { return s.id == li.site_id; });
    if (!known_site)
      throw FormatError(FormatError::Kind::field_invalid,
                        "image references a site id missing from the header");
    d.images.push_back(std::move(li));
  }
  if (r.remaining() != 0)
    throw FormatError(FormatError::Kind::field_invalid,
                      "trailing bytes after the last image record");
  return d;
}

namespace {

// Fisher-Yates with the portable generator so splits reproduce everywhere.
void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
}

Dataset take_images(const Dataset& d, const std::vector<bool>& keep) {
  Dataset out;
  out.sites = d.sites;
  out.normalization = d.normalization;
  out.geometry = d.geometry;
  out.provenance = d.provenance;
  for (std::size_t i = 0; i < d.images.size(); ++i)
    if (keep[i]) out.images.push_back(d.images[i]);
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double fraction,
                                             std::uint64_t seed,
                                             SplitMode mode) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ConfigError("split fraction must lie strictly between 0 and 1");

  std::vector<bool> first(d.images.size(), false);

  if (mode == SplitMode::images) {
    // Stratified: shuffle each site's images with a site-derived child
    // generator so the split is independent of site iteration order.
    std::map<std::uint32_t, std::vector<std::size_t>> by_site;
    for (std::size_t i = 0; i < d.images.size(); ++i)
      by_site[d.images[i].site_id].push_back(i);
    for (auto& [site_id, idx] : by_site) {
      Rng rng(Rng::mix(seed, site_id));
      shuffle_indices(idx, rng);
      const auto n_first = static_cast<std::size_t>(
          std::llround(static_cast<double>(idx.size()) * fraction));
      for (std::size_t k = 0; k < n_first && k < idx.size(); ++k)
        first[idx[k]] = true;
    }
  } else {
    std::vector<std::size_t> site_order(d.sites.size());
    for (std::size_t i = 0; i < site_order.size(); ++i) site_order[i] = i;
    Rng rng(seed);
    shuffle_indices(site_order, rng);
    const auto n_first = static_cast<std::size_t>(
        std::llround(static_cast<double>(d.sites.size()) * fraction));
    std::vector<bool> site_first(d.sites.size(), false);
    for (std::size_t k = 0; k < n_first && k < site_order.size(); ++k)
      site_first[site_order[k]] = true;

    std::map<std::uint32_t, bool> id_first;
    for (std::size_t i = 0; i < d.sites.size(); ++i)
      id_first[d.sites[i].id] = site_first[i];
    for (std::size_t i = 0; i < d.images.size(); ++i)
      first[i] = id_first.at(d.images[i].site_id);

    Dataset a = take_images(d, first);
    std::vector<bool> second(first.size());
    for (std::size_t i = 0; i < first.size(); ++i) second[i] = !first[i];
    Dataset b = take_images(d, second);
    // Each side keeps only its own sites so the site sets are disjoint.
    auto filter_sites = [&](Dataset& ds, bool want_first) {
      std::vector<SiteInfo> kept;
      for (std::size_t i = 0; i < d.sites.size(); ++i)
        if (site_first[i] == want_first) kept.push_back(d.sites[i]);
      ds.sites = std::move(kept);
    };
    filter_sites(a, true);
    filter_sites(b, false);
    if (a.images.empty() || b.images.empty())
      throw ConfigError("split fraction yields an empty side");
    return {std::move(a), std::move(b)};
  }

  Dataset a = take_images(d, first);
  std::vector<bool> second(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) second[i] = !first[i];
  Dataset b = take_images(d, second);
  if (a.images.empty() || b.images.empty())
    throw ConfigError("split fraction yields an empty side");
  return {std::move(a), std::move(b)};
}

}  // namespace secci
