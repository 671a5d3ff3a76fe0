#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "tissueseg/evaluation.hpp"
#include "tissueseg/preprocess.hpp"

namespace tissueseg {
namespace {

RgbImage random_rgb(std::mt19937_64& rng, int w, int h) {
  RgbImage img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng() % 256);
  return img;
}

TEST(FitWithin, Examples) {
  EXPECT_EQ(fit_within(RgbImage(2048, 1024)).width(), 1024);
  EXPECT_EQ(fit_within(RgbImage(2048, 1024)).height(), 512);
  const RgbImage small(800, 600, 7);
  EXPECT_EQ(fit_within(small), small);
  const auto odd = fit_within(BinaryMask(3000, 1500));
  EXPECT_EQ(odd.width(), 1024);
  EXPECT_EQ(odd.height(), 512);
}

TEST(FitWithin, KeepsConstantColourAndBinaryMasks) {
  const auto img = fit_within(RgbImage(300, 200, 123), 100);
  EXPECT_EQ(img, RgbImage(100, 67, 123));
  std::mt19937_64 rng(4);
  const auto m = fit_within(oracle::random_mask(rng, 301, 77), 64);
  EXPECT_EQ(m.width(), 64);
  EXPECT_EQ(m.height(), 16);
  EXPECT_TRUE(is_binary(m));
}

TEST(FitWithin, HalvingAveragesPixelPairs) {
  RgbImage img(4, 2, 0);
  for (int y = 0; y < 2; ++y) {
    img.at(0, y, 0) = 0;
    img.at(1, y, 0) = 100;
    img.at(2, y, 0) = 200;
    img.at(3, y, 0) = 250;
  }
  const auto out = fit_within(img, 2);
  EXPECT_EQ(out.at(0, 0, 0), 50);
  EXPECT_EQ(out.at(1, 0, 0), 225);
}

TEST(PadToSquare, Examples) {
  const auto padded = pad_to_square(BinaryMask(1024, 512, 1));
  EXPECT_EQ(padded.image.width(), 1024);
  EXPECT_EQ(padded.image.height(), 1024);
  EXPECT_EQ(padded.record.pad_bottom, 512);
  EXPECT_EQ(padded.record.pad_right, 0);
  for (int y = 512; y < 1024; ++y) {
    for (int x = 0; x < 1024; x += 97) ASSERT_EQ(padded.image.at(x, y), 0);
  }
  EXPECT_EQ(count_foreground(padded.image), 1024u * 512u);

  const BinaryMask full(1024, 1024, 1);
  const auto same = pad_to_square(full);
  EXPECT_EQ(same.image, full);
  EXPECT_EQ(same.record.pad_right, 0);
  EXPECT_EQ(same.record.pad_bottom, 0);
}

TEST(PadToSquare, ThumbnailsPadWhite) {
  const auto padded = pad_to_square(RgbImage(10, 6, 0), 12);
  EXPECT_EQ(padded.image.at(11, 0, 1), 255);
  EXPECT_EQ(padded.image.at(0, 11, 2), 255);
  EXPECT_EQ(padded.image.at(9, 5, 0), 0);
  EXPECT_THROW(pad_to_square(RgbImage(13, 2), 12), Error);
}

TEST(PadToSquare, UnpadRoundTrip) {
  std::mt19937_64 rng(12);
  const auto img = random_rgb(rng, 37, 21);
  const auto padded = pad_to_square(img, 40);
  EXPECT_EQ(unpad(padded.image, padded.record), img);
}

TEST(NormalizeThumbnail, RecordInvariants) {
  for (auto [w, h] : std::vector<std::pair<int, int>>{{3000, 1500}, {700, 1900}, {512, 512}, {1024, 1}}) {
    const auto n = normalize_thumbnail(BinaryMask(w, h, 1));
    const auto& r = n.record;
    EXPECT_EQ(r.scaled_width + r.pad_right, kThumbnailSize);
    EXPECT_EQ(r.scaled_height + r.pad_bottom, kThumbnailSize);
    EXPECT_EQ(r.original_width, w);
    EXPECT_EQ(r.original_height, h);
    EXPECT_NEAR(r.scale, static_cast<double>(r.scaled_height) / h, 1.0 / h + 1e-12);
    EXPECT_EQ(count_foreground(n.image), static_cast<std::size_t>(r.scaled_width) * r.scaled_height);
  }
}

TEST(RefineDilate, Examples) {
  BinaryMask m(5, 5, 0);
  m.at(2, 2) = 1;
  EXPECT_EQ(count_foreground(refine_dilate(m)), 9u);
  EXPECT_EQ(refine_dilate(BinaryMask(5, 5, 0)), BinaryMask(5, 5, 0));
}

TEST(ProjectToMagnification, Examples) {
  std::mt19937_64 rng(1);
  const auto m = oracle::random_mask(rng, 9, 7);
  EXPECT_EQ(project_to_magnification(m, 1), m);
  const BinaryMask checker(2, 2, std::vector<std::uint8_t>{1, 0, 0, 1});
  const auto big = project_to_magnification(checker, 2);
  const BinaryMask expected(4, 4, std::vector<std::uint8_t>{1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1});
  EXPECT_EQ(big, expected);
  EXPECT_THROW(project_to_magnification(m, 0), Error);
}

TEST(Augment, IdentitySpec) {
  std::mt19937_64 rng(2);
  const auto img = random_rgb(rng, 16, 16);
  const auto mask = oracle::random_mask(rng, 16, 16);
  const auto [i2, m2] = augment_pair(img, mask, AugmentSpec{});
  EXPECT_EQ(i2, img);
  EXPECT_EQ(m2, mask);
}

TEST(Augment, FlipIsInvolution) {
  std::mt19937_64 rng(3);
  const auto img = random_rgb(rng, 13, 9);
  const auto mask = oracle::random_mask(rng, 13, 9);
  for (const AugmentSpec spec : {AugmentSpec{0, true, false}, AugmentSpec{0, false, true},
                                 AugmentSpec{0, true, true}}) {
    const auto once = augment_pair(img, mask, spec);
    const auto twice = augment_pair(once.first, once.second, spec);
    EXPECT_EQ(twice.first, img);
    EXPECT_EQ(twice.second, mask);
    EXPECT_NE(once.second, mask);
  }
}

TEST(Augment, QuarterTurnIsCounterClockwisePermutation) {
  std::mt19937_64 rng(5);
  const int n = 11;
  const auto img = random_rgb(rng, n, n);
  const auto mask = oracle::random_mask(rng, n, n);
  const auto [ri, rm] = augment_pair(img, mask, AugmentSpec{90, false, false});
  // Counter-clockwise on screen: the top-right corner moves to the top-left.
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      ASSERT_EQ(rm.at(y, n - 1 - x), mask.at(x, y));
      for (int c = 0; c < 3; ++c) ASSERT_EQ(ri.at(y, n - 1 - x, c), img.at(x, y, c));
    }
  }
  EXPECT_EQ(count_foreground(rm), count_foreground(mask));
}

TEST(Augment, QuarterTurnsCompose) {
  std::mt19937_64 rng(6);
  const auto mask = oracle::random_mask(rng, 12, 12);
  auto r = mask;
  for (int i = 0; i < 4; ++i) r = augment_mask(r, AugmentSpec{90, false, false});
  EXPECT_EQ(r, mask);
  EXPECT_EQ(augment_mask(augment_mask(mask, {90, false, false}), {90, false, false}),
            augment_mask(mask, {180, false, false}));
  EXPECT_EQ(augment_mask(mask, {-90, false, false}), augment_mask(mask, {270 - 360, false, false}));
  EXPECT_EQ(augment_mask(mask, {180, false, false}), augment_mask(mask, {-180, false, false}));
  // 180 degrees equals both flips.
  EXPECT_EQ(augment_mask(mask, {180, false, false}), augment_mask(mask, {0, true, true}));
}

TEST(Augment, GeneralAngleMatchesQuarterTurnNearby) {
  std::mt19937_64 rng(7);
  const auto img = random_rgb(rng, 21, 21);
  // A tiny angle should behave like the identity in the interior.
  const auto out = rotate(img, 1e-7);
  EXPECT_EQ(out, img);
  // A general angle leaves the centre pixel fixed.
  const auto turned = rotate(img, 33.0);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(turned.at(10, 10, c), img.at(10, 10, c));
  // Corners come from outside the source and are white.
  EXPECT_EQ(turned.at(0, 0, 0), 255);
}

TEST(Augment, ConfusionInvariantUnderAxisAlignedTransforms) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pred = oracle::random_mask(rng, 24, 24);
    const auto gt = oracle::random_mask(rng, 24, 24);
    const double angle = 90.0 * static_cast<double>(static_cast<int>(rng() % 4) - 1);
    const AugmentSpec spec{angle, (rng() & 1) != 0, (rng() & 2) != 0};
    const auto before = confusion(pred, gt);
    const auto after = confusion(augment_mask(pred, spec), augment_mask(gt, spec));
    ASSERT_EQ(before, after) << "angle " << angle;
  }
}

TEST(Augment, Errors) {
  EXPECT_THROW(augment_pair(RgbImage(4, 4), BinaryMask(4, 5), AugmentSpec{}), Error);
  EXPECT_THROW(augment_mask(BinaryMask(4, 4), AugmentSpec{181, false, false}), Error);
  EXPECT_THROW(augment_mask(BinaryMask(4, 4), AugmentSpec{std::nan(""), false, false}), Error);
}

TEST(Augment, RandomSpecIsReproducible) {
  std::mt19937_64 a(99), b(99);
  for (int i = 0; i < 50; ++i) {
    const auto x = random_augment_spec(a), y = random_augment_spec(b);
    EXPECT_EQ(x.rotation_degrees, y.rotation_degrees);
    EXPECT_EQ(x.hflip, y.hflip);
    EXPECT_EQ(x.vflip, y.vflip);
    EXPECT_GE(x.rotation_degrees, -180.0);
    EXPECT_LE(x.rotation_degrees, 180.0);
  }
  // First draw from seed 99, frozen: the raw engine output makes it platform independent.
  std::mt19937_64 c(99);
  const auto first = random_augment_spec(c);
  std::mt19937_64 d(99);
  const double expected = -180.0 + 360.0 * static_cast<double>(d() >> 11) * 0x1.0p-53;
  EXPECT_DOUBLE_EQ(first.rotation_degrees, expected);
}

}  // namespace
}  // namespace tissueseg
