// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>

#include <gtest/gtest.h>

#include "support.hpp"

namespace csilab {
namespace {

TEST(Encoding, Base64KnownVectors) {
  const auto enc = [](std::string_view s) {
    return base64_encode(std::span(reinterpret_cast<const unsigned char*>(s.data()), s.size()));
  };
  EXPECT_EQ(enc(""), "");
  EXPECT_EQ(enc("f"), "Zg==");
  EXPECT_EQ(enc("fo"), "Zm8=");
  EXPECT_EQ(enc("foobar"), "Zm9vYmFy");
  const auto dec = base64_decode("Zm9vYg==");
  EXPECT_EQ(std::string(dec.begin(), dec.end()), "foob");
  EXPECT_THROW(base64_decode("abc"), FormatError);
  EXPECT_THROW(base64_decode("ab!d"), FormatError);
}

TEST(Encoding, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Encoding, LittleEndianFloatLayout) {
  const std::vector<float> one{1.0f};
  // 1.0f is 0x3f800000, little-endian bytes 00 00 80 3f.
  EXPECT_EQ(pack_le<float>(one), "AACAPw==");
  EXPECT_EQ(unpack_le<float>("AACAPw==", 1), one);
  EXPECT_THROW(unpack_le<float>("AACAPw==", 2), FormatError);
}

TEST(Latent, ShapeValidation) {
  EXPECT_THROW(LatentTensor(Shape{0, 4, 4}), ShapeError);
  EXPECT_THROW(LatentTensor(Shape{1, 2, 2}, std::vector<float>(3)), ShapeError);
  EXPECT_THROW(LatentTensor(Shape{1, 1, 1}, std::vector<float>{std::nanf("")}), NumericError);
  const LatentTensor t(Shape{2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.index(1, 2, 3), 23u);
}

TEST(Latent, LatRoundTripIsBitExact) {
  const auto a = sample_latent(42, Shape{4, 32, 32});
  const auto b = from_lat_string(to_lat_string(a));
  EXPECT_EQ(a, b);
  EXPECT_EQ(to_lat_string(a), to_lat_string(b));

  const auto dir = testing::scratch_dir("lat");
  write_lat(dir / "a.lat", a);
  EXPECT_EQ(read_lat(dir / "a.lat"), a);
}

TEST(Latent, LatRejectsCorruptInput) {
  const std::string good = to_lat_string(sample_latent(1, Shape{1, 2, 2}));
  EXPECT_THROW(from_lat_string("no newline"), FormatError);
  EXPECT_THROW(from_lat_string("{not json\nAAAA\n"), FormatError);
  EXPECT_THROW(from_lat_string(R"({"format":"other","version":1,"shape":[1,2,2],"dtype":"f32le"})" "\nAAAA\n"),
               FormatError);
  EXPECT_THROW(
      from_lat_string(R"({"format":"csilab-latent","version":1,"shape":[1,2],"dtype":"f32le"})" "\nAAAA\n"),
      FormatError);
  EXPECT_THROW(
      from_lat_string(R"({"format":"csilab-latent","version":1,"shape":[1,2,3],"dtype":"f32le"})" +
                      good.substr(good.find('\n'))),
      FormatError);
  EXPECT_THROW(read_lat("/nonexistent/x.lat"), IoError);
}

TEST(Latent, CosineAndCombination) {
  const auto a = sample_latent(3, Shape{1, 8, 8});
  EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-12);
  EXPECT_NEAR(cosine_similarity(a, linear_combination(-2.0, a, 0.0, a)), -1.0, 1e-12);
  EXPECT_NEAR(l2_norm(linear_combination(1.0, a, -1.0, a)), 0.0, 0.0);
}

}  // namespace
}  // namespace csilab
