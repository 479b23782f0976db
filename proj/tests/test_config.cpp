#include <gtest/gtest.h>

#include "laft/config.hpp"

using namespace laft;

TEST(Config, PresetsCarryPublishedAndDeskValues) {
  const RunConfig paper = preset_config("paper");
  EXPECT_EQ(paper.model.decoder.window, 80);
  EXPECT_EQ(paper.decode.beam, 5);
  EXPECT_EQ(paper.train.batch_size, 16);
  EXPECT_EQ(paper.train.lr, 1e-4);
  EXPECT_EQ(paper.model.decoder.dim, 128);
  EXPECT_EQ(paper.model.encoder.channels, (std::array<Index, 4>{64, 128, 256, 512}));
  const RunConfig desk = preset_config("desk");
  EXPECT_EQ(desk.model.decoder.dim, 128);
  EXPECT_LT(desk.model.encoder.channels[3], 512);
  EXPECT_THROW(preset_config("laptop"), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  RunConfig c = preset_config("desk");
  c.seed = 77;
  c.train.label_smoothing = 0.2;
  c.model.decoder.window_enabled = false;
  c.train.augment.enabled = true;
  const RunConfig back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, OverlayIsStrict) {
  const RunConfig base = preset_config("desk");
  const RunConfig c = apply_json(base, nlohmann::json::parse(R"({"train": {"epochs": 3}, "decode": {"beam": 2}})"));
  EXPECT_EQ(c.train.epochs, 3);
  EXPECT_EQ(c.decode.beam, 2);
  EXPECT_EQ(c.train.lr, base.train.lr);
  EXPECT_THROW(apply_json(base, nlohmann::json::parse(R"({"trian": {}})")), ConfigError);
  EXPECT_THROW(apply_json(base, nlohmann::json::parse(R"({"train": {"epochs": "ten"}})")), ConfigError);
  EXPECT_THROW(apply_json(base, nlohmann::json::parse(R"({"train": {"label_smoothing": 1.0}})")), ConfigError);
  EXPECT_THROW(apply_json(base, nlohmann::json::parse(R"({"train": {"batch_size": 0}})")), ConfigError);
  EXPECT_THROW(apply_json(base, nlohmann::json::parse(R"({"model": {"input": "wav"}})")), ConfigError);
}
