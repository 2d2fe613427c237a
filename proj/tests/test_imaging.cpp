#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <vector>

#include "secci/imaging.hpp"
#include "secci/rng.hpp"

using namespace secci;

namespace {

std::vector<FeatureVector> random_features(std::size_t n, Rng& rng) {
  std::vector<FeatureVector> out(n);
  for (auto& f : out) {
    for (int i = 0; i < kFeaturesPerChannel; ++i) {
      f.amp_avg[i] = rng.uniform(0.0, 8.0);
      f.aoa[i] = rng.uniform(0.0, M_PI);
      f.phase_diff[i] = rng.uniform(-M_PI, M_PI);
    }
  }
  return out;
}

Dataset random_dataset(int n_sites, int images_per_site, Rng& rng,
                       int rows = 6) {
  Dataset d;
  d.normalization = {0.0, 8.0};
  d.provenance = {"simulator", 42};
  for (int s = 0; s < n_sites; ++s) {
    d.sites.push_back({static_cast<std::uint32_t>(s),
                       {1.5 * s, 0.25 * s * s}});
    for (int i = 0; i < images_per_site; ++i) {
      LabeledImage li;
      li.site_id = static_cast<std::uint32_t>(s);
      li.coords = d.sites.back().coords;
      li.image.rows = rows;
      li.image.pixels.resize(3u * rows * CsiImage::kCols);
      for (auto& v : li.image.pixels)
        v = static_cast<float>(rng.uniform());
      d.images.push_back(std::move(li));
    }
  }
  return d;
}

}  // namespace

TEST_CASE("build_images windows features and drops the remainder") {
  Rng rng(31);
  const NormalizationSpec norm{0.0, 8.0};

  auto f = random_features(2970, rng);
  auto images = build_images(f, 90, norm);
  CHECK(images.size() == 33);
  for (const auto& img : images) {
    CHECK(img.rows == 90);
    CHECK(img.pixels.size() == 3u * 90 * 90);
  }

  f = random_features(100, rng);
  images = build_images(f, 90, norm);
  CHECK(images.size() == 1);

  f = random_features(89, rng);
  CHECK(build_images(f, 90, norm).empty());

  CHECK(build_images({}, 90, norm).empty());
}

TEST_CASE("normalization maps channel endpoints to 0 and 1") {
  std::vector<FeatureVector> f(1);
  f[0].amp_avg[0] = 2.0;   // = lo
  f[0].amp_avg[1] = 6.0;   // = hi
  f[0].amp_avg[2] = 99.0;  // above hi: clipped
  f[0].aoa[0] = M_PI;
  f[0].aoa[1] = 0.0;
  f[0].phase_diff[0] = M_PI;
  f[0].phase_diff[1] = -M_PI + 1e-9;

  const auto images = build_images(f, 1, NormalizationSpec{2.0, 6.0});
  REQUIRE(images.size() == 1);
  const CsiImage& img = images[0];
  CHECK(img.at(0, 0, 0) == 0.0f);
  CHECK(img.at(0, 0, 1) == 1.0f);
  CHECK(img.at(0, 0, 2) == 1.0f);
  CHECK(img.at(1, 0, 0) == 1.0f);
  CHECK(img.at(1, 0, 1) == 0.0f);
  CHECK(img.at(2, 0, 0) == 1.0f);
  CHECK(img.at(2, 0, 1) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("normalization is monotone per channel") {
  Rng rng(32);
  const NormalizationSpec norm{1.0, 5.0};
  std::vector<FeatureVector> f(2);
  for (int i = 0; i < kFeaturesPerChannel; ++i) {
    const double a = rng.uniform(1.0, 5.0), b = rng.uniform(1.0, 5.0);
    f[0].amp_avg[i] = std::min(a, b);
    f[1].amp_avg[i] = std::max(a, b);
  }
  const auto images = build_images(f, 1, norm);
  REQUIRE(images.size() == 2);
  for (int i = 0; i < kFeaturesPerChannel; ++i)
    REQUIRE(images[0].at(0, 0, i) <= images[1].at(0, 0, i));
}

TEST_CASE("compute_amp_range spans the data and survives constant input") {
  Rng rng(33);
  auto f = random_features(50, rng);
  const auto norm = compute_amp_range(f);
  for (const auto& fv : f)
    for (double a : fv.amp_avg) {
      REQUIRE(a >= norm.amp_lo);
      REQUIRE(a <= norm.amp_hi);
    }

  std::vector<FeatureVector> constant(3);
  for (auto& fv : constant) fv.amp_avg.fill(2.5);
  const auto degenerate = compute_amp_range(constant);
  CHECK(degenerate.amp_lo < degenerate.amp_hi);
  CHECK(degenerate.amp_lo == 2.5);
}

TEST_CASE("dataset files round-trip bit-exactly") {
  Rng rng(34);
  const Dataset d = random_dataset(2, 2, rng);
  const std::string path = "dataset_roundtrip_tmp.secci";
  save_dataset(d, path);
  const Dataset back = load_dataset(path);
  CHECK(back == d);
  // Save again: byte-identical files.
  const std::string path2 = "dataset_roundtrip_tmp2.secci";
  save_dataset(back, path2);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)),
                       std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(b)),
                       std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("empty dataset round-trips") {
  const Dataset d;
  const std::string path = "dataset_empty_tmp.secci";
  save_dataset(d, path);
  const Dataset back = load_dataset(path);
  CHECK(back == d);
  std::remove(path.c_str());
}

TEST_CASE("randomized datasets round-trip (property)") {
  Rng rng(35);
  for (int trial = 0; trial < 10; ++trial) {
    const int sites = static_cast<int>(rng.uniform_int(1, 4));
    const int per_site = static_cast<int>(rng.uniform_int(1, 3));
    const int rows = static_cast<int>(rng.uniform_int(1, 8));
    const Dataset d = random_dataset(sites, per_site, rng, rows);
    const std::string path = "dataset_prop_tmp.secci";
    save_dataset(d, path);
    REQUIRE(load_dataset(path) == d);
    std::remove(path.c_str());
  }
}

TEST_CASE("load_dataset reports distinct failure kinds") {
  Rng rng(36);
  const Dataset d = random_dataset(1, 1, rng);
  const std::string path = "dataset_err_tmp.secci";
  save_dataset(d, path);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  in.close();

  auto write_and_expect = [&](const std::string& contents,
                              FormatError::Kind kind) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.close();
    try {
      load_dataset(path);
      FAIL("expected FormatError");
    } catch (const FormatError& err) {
      CHECK(err.kind() == kind);
    }
  };

  SUBCASE("bad magic") {
    std::string corrupt = bytes;
    corrupt[0] = 'X';
    write_and_expect(corrupt, FormatError::Kind::bad_magic);
  }
  SUBCASE("version mismatch") {
    std::string corrupt = bytes;
    corrupt[5] = 0x7F;
    write_and_expect(corrupt, FormatError::Kind::version_mismatch);
  }
  SUBCASE("truncated") {
    write_and_expect(bytes.substr(0, bytes.size() - 7),
                     FormatError::Kind::truncated);
    write_and_expect(bytes.substr(0, 3), FormatError::Kind::truncated);
  }
  SUBCASE("header not JSON") {
    // Keep magic+version, corrupt the first header byte.
    std::string corrupt = bytes;
    corrupt[11] = '#';
    write_and_expect(corrupt, FormatError::Kind::field_invalid);
  }
  std::remove(path.c_str());
}

TEST_CASE("image-level split is stratified and deterministic") {
  Rng rng(37);
  const Dataset d = random_dataset(3, 33, rng);
  auto [train, test] = split_train_test(d, 0.5, 7, SplitMode::images);
  CHECK(train.images.size() + test.images.size() == d.images.size());

  // Per site: 33 images split 17/16 or 16/17.
  for (std::uint32_t s = 0; s < 3; ++s) {
    const auto count = [&](const Dataset& ds) {
      std::size_t n = 0;
      for (const auto& li : ds.images)
        if (li.site_id == s) ++n;
      return n;
    };
    const auto tr = count(train);
    CHECK(tr >= 16);
    CHECK(tr <= 17);
    CHECK(tr + count(test) == 33);
  }

  auto [train2, test2] = split_train_test(d, 0.5, 7, SplitMode::images);
  CHECK(train2 == train);
  CHECK(test2 == test);
  auto [train3, test3] = split_train_test(d, 0.5, 8, SplitMode::images);
  CHECK(train3.images.size() == train.images.size());
  bool same = train3 == train;
  CHECK_FALSE(same);
}

TEST_CASE("site-level split separates coordinates") {
  Rng rng(38);
  const Dataset d = random_dataset(26, 2, rng);
  auto [train, test] = split_train_test(d, 0.5, 11, SplitMode::sites);
  CHECK(train.sites.size() == 13);
  CHECK(test.sites.size() == 13);
  std::set<std::uint32_t> train_ids, test_ids;
  for (const auto& s : train.sites) train_ids.insert(s.id);
  for (const auto& s : test.sites) test_ids.insert(s.id);
  for (auto id : train_ids) CHECK(test_ids.count(id) == 0);
  for (const auto& li : train.images) CHECK(train_ids.count(li.site_id) == 1);
  for (const auto& li : test.images) CHECK(test_ids.count(li.site_id) == 1);
}

TEST_CASE("split rejects bad fractions and empty sides") {
  Rng rng(39);
  const Dataset d = random_dataset(2, 2, rng);
  CHECK_THROWS_AS(split_train_test(d, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split_train_test(d, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(split_train_test(d, -0.2, 1), ConfigError);
  // 2 images per site at fraction 0.01: the first side gets nothing.
  CHECK_THROWS_AS(split_train_test(d, 0.01, 1, SplitMode::images), ConfigError);
}
