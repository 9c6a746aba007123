#include <gtest/gtest.h>

#include "imia/serialization.hpp"

namespace imia {
namespace {

TEST(ConfigJson, RoundTrips) {
  ImitativeConfig c;
  c.n_models = 6;
  c.weight_strategy = WeightStrategy::kLog;
  c.train.learning_rate = 0.05;
  const ImitativeConfig r = imitative_config_from_json(imitative_config_to_json(c));
  EXPECT_EQ(imitative_config_to_json(r), imitative_config_to_json(c));

  GameConfig g;
  g.num_members = 12;
  g.setting = Setting::kAdaptive;
  EXPECT_EQ(game_config_to_json(game_config_from_json(game_config_to_json(g))), game_config_to_json(g));
}

TEST(ConfigJson, UnknownKeyNamed) {
  json j = imitative_config_to_json(ImitativeConfig{});
  j["train"]["learnig_rate"] = 0.1;
  try {
    imitative_config_from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("attack.train.learnig_rate"), std::string::npos);
  }
}

TEST(ConfigJson, TypeAndValueErrorsNamed) {
  json j = json::object();
  j["n_models"] = "ten";
  EXPECT_THROW(imitative_config_from_json(j), ConfigError);
  j = json::object();
  j["weight_strategy"] = "cubic";
  try {
    imitative_config_from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("attack.weight_strategy"), std::string::npos);
  }
  j = json::object();
  j["imitate_fraction"] = 1.5;
  EXPECT_THROW(imitative_config_from_json(j), ConfigError);
}

}  // namespace
}  // namespace imia
