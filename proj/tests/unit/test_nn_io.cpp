#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "morse/nn_io.hpp"
#include "morse/synth.hpp"

using namespace morse;
using namespace morse::nn;

namespace {

Model sample_model(Variant v, std::uint64_t seed) {
  const auto d = synth::gen_dataset({.n_subjects = 1, .per_class = 2, .master_seed = seed});
  Model m(make_spec(v), compute_norm_stats(d), seed);
  m.network().init_he_uniform(seed);
  // Non-zero biases so their layout is exercised too.
  Rng rng(seed);
  for (std::size_t l = 0; l < m.network().spec().layers.size(); ++l)
    for (double& b : m.network().params().biases(l)) b = 0.1 * rng.normal();
  return m;
}

std::string serialize(const Model& m) {
  std::ostringstream os;
  write_model(os, m);
  return os.str();
}

}  // namespace

TEST(ModelFile, RoundTripPreservesPredictions) {
  const auto d = synth::gen_dataset({.n_subjects = 2, .per_class = 4, .master_seed = 3});
  for (Variant v : {Variant::CnnMax, Variant::CnnLp}) {
    const Model m = sample_model(v, 5);
    std::istringstream is(serialize(m));
    const Model r = read_model(is);
    EXPECT_EQ(r.param_count(), m.param_count());
    EXPECT_EQ(r.init_seed(), 5u);
    EXPECT_EQ(r.network().spec().variant, v);
    for (std::size_t c = 0; c < kChannels; ++c) {
      EXPECT_EQ(r.norm().mean[c], m.norm().mean[c]);
      EXPECT_EQ(r.norm().std[c], m.norm().std[c]);
    }
    auto mv = m.network().params().values(), rv = r.network().params().values();
    for (std::size_t i = 0; i < mv.size(); ++i) ASSERT_EQ(rv[i], static_cast<double>(static_cast<float>(mv[i])));
    for (const auto& s : d.samples) {
      const auto a = m.probabilities(s.window), b = r.probabilities(s.window);
      for (std::size_t k = 0; k < kNumClasses; ++k) EXPECT_NEAR(a[k], b[k], 1e-6);
      EXPECT_EQ(decide(a).label, decide(b).label);
    }
  }
}

TEST(ModelFile, RoundedModelIsExact) {
  Model m = sample_model(Variant::CnnLp, 8);
  m.round_to_storage_precision();
  m.training_summary()["note"] = "kept";
  morse::test::TempDir dir("model");
  save_model(dir / "m.mrse", m);
  EXPECT_TRUE(is_model_file(dir / "m.mrse"));
  const Model r = load_model(dir / "m.mrse");
  const auto d = synth::gen_dataset({.n_subjects = 1, .per_class = 3});
  for (const auto& s : d.samples) EXPECT_EQ(m.probabilities(s.window), r.probabilities(s.window));
  EXPECT_EQ(r.training_summary()["note"], "kept");
  // Writing the loaded model again reproduces the file byte for byte.
  EXPECT_EQ(serialize(r), serialize(m));
}

TEST(ModelFile, HeaderLayout) {
  const std::string bytes = serialize(sample_model(Variant::CnnMax, 1));
  ASSERT_GT(bytes.size(), 10u);
  EXPECT_EQ(bytes.substr(0, 6), "MRSE1\n");
  const auto len = static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[6])) |
                   static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[7])) << 8 |
                   static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[8])) << 16 |
                   static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[9])) << 24;
  const auto header = nlohmann::json::parse(bytes.substr(10, len));
  EXPECT_EQ(header["format_version"], 1);
  EXPECT_EQ(header["variant"], "cnn-max");
  EXPECT_EQ(header["param_count"], 54254);
  EXPECT_EQ(header["layers"].size(), 14u);
  EXPECT_EQ(header["label_map"].size(), 6u);
  EXPECT_EQ(bytes.size(), 10u + len + 4u * 54254u);
}

TEST(ModelFile, Corruption) {
  const std::string good = serialize(sample_model(Variant::CnnMax, 2));
  auto read = [](std::string b) {
    std::istringstream is(b);
    return read_model(is);
  };
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_MORSE_ERROR(read(bad), "BadMagic");
  EXPECT_MORSE_ERROR(read(""), "BadMagic");
  EXPECT_MORSE_ERROR(read(good.substr(0, good.size() - 3)), "ParseError");
  EXPECT_MORSE_ERROR(read(good + "x"), "SchemaMismatch");

  std::string versioned = good;
  const auto pos = versioned.find("\"format_version\":1");
  ASSERT_NE(pos, std::string::npos);
  versioned[pos + 17] = '7';
  EXPECT_MORSE_ERROR(read(versioned), "UnsupportedVersion");

  std::string garbled = good;
  garbled[11] = '!';
  EXPECT_MORSE_ERROR(read(garbled), "ParseError");

  EXPECT_MORSE_ERROR(load_model("/nonexistent/m.mrse"), "IoError");
}

TEST(ModelFile, LayerJsonRoundTrip) {
  const auto spec = make_spec(Variant::CnnLp, GlobalPoolMode::Max);
  const auto shapes = shape_chain(spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto j = layer_to_json(spec.layers[i], shapes[i]);
    const auto back = layer_from_json(j);
    EXPECT_EQ(layer_to_json(back, shapes[i]), j);
  }
}
