// Copyright 2026 The rccpath Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <functional>
#include <string>

#include "json.hpp"
#include "rccpath/config.h"
#include "rccpath/error.h"
#include "rccpath/image_io.h"
#include "support/test_support.h"

namespace rccpath {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

Error error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no rccpath::Error raised";
  return Error(ErrorCode::kInvalidInput, "none");
}

struct Fixture {
  TempDir dir;
  Fixture() { write_text_file(dir / "tumor.json", "{}"); }
  PipelineConfig toml(const std::string& body) {
    return parse_config("[paths]\ntumor_model = \"tumor.json\"\n" + body, "toml", dir.path(), "cfg.toml");
  }
};

TEST(Config, MinimalConfigGetsDefaults) {
  Fixture f;
  const PipelineConfig c = f.toml("");
  EXPECT_EQ(c.triage.low, 0.2);
  EXPECT_EQ(c.triage.high, 0.8);
  EXPECT_EQ(c.triage.decision_threshold, 0.5);
  EXPECT_EQ(c.triage.magnification_factor, 2);
  EXPECT_EQ(c.detection.patch_size, 512);
  EXPECT_EQ(c.subtype.patch_size, 1000);
  EXPECT_EQ(c.grade.region.patch_size, 1000);
  EXPECT_EQ(c.grade.g4_threshold, 0.5);
  EXPECT_EQ(c.grade.g4_override, 0.05);
  EXPECT_EQ(c.render.alpha, 0.4);
  EXPECT_EQ(c.run.workers, 1);
  EXPECT_EQ(c.paths.tumor_model, f.dir / "tumor.json");
  EXPECT_EQ(c.paths.output, f.dir / "out");
  EXPECT_TRUE(c.paths.subtype_model.empty());
}

TEST(Config, OrderingViolationNamesField) {
  Fixture f;
  const Error e = error_of([&] { f.toml("[triage]\nlow = 0.9\nhigh = 0.8\n"); });
  EXPECT_EQ(e.code(), ErrorCode::kConfigError);
  EXPECT_NE(e.detail().find("triage.low"), std::string::npos) << e.detail();
}

TEST(Config, UnknownKeysRejectedWithLine) {
  Fixture f;
  const Error top = error_of([&] { f.toml("foo = 1\n"); });
  EXPECT_EQ(top.code(), ErrorCode::kConfigError);
  EXPECT_NE(top.detail().find("foo"), std::string::npos);

  const Error nested = error_of([&] { f.toml("[triage]\nlow = 0.1\nfoo = 2\n"); });
  EXPECT_NE(nested.detail().find("cfg.toml:5"), std::string::npos) << nested.detail();
  EXPECT_NE(nested.detail().find("triage.foo"), std::string::npos);

  EXPECT_EQ(error_of([&] { f.toml("[mystery]\n"); }).code(), ErrorCode::kConfigError);
}

TEST(Config, ParseErrorsCarryLine) {
  Fixture f;
  const Error e = error_of([&] { f.toml("[run]\nworkers = = 2\n"); });
  EXPECT_EQ(e.code(), ErrorCode::kConfigError);
  EXPECT_NE(e.detail().find("cfg.toml:4"), std::string::npos) << e.detail();

  const Error type = error_of([&] { f.toml("[run]\nworkers = \"two\"\n"); });
  EXPECT_NE(type.detail().find("run.workers"), std::string::npos) << type.detail();
}

TEST(Config, PathsMustExist) {
  Fixture f;
  EXPECT_EQ(error_of([&] { parse_config("", "toml", f.dir.path()); }).code(), ErrorCode::kConfigError);
  const Error missing = error_of([&] { f.toml("subtype_model = \"nope.json\"\n"); });
  EXPECT_NE(missing.detail().find("paths.subtype_model"), std::string::npos);
  write_text_file(f.dir / "g4.json", "{}");
  const Error pair = error_of([&] { f.toml("g4_model = \"g4.json\"\n"); });
  EXPECT_NE(pair.detail().find("paths.g4_model"), std::string::npos);
}

TEST(Config, JsonAndTomlAgree) {
  Fixture f;
  const PipelineConfig t = f.toml("[triage]\nlow = 0.25\nneighbor = false\n[run]\nworkers = 4\nseed = 9\n");
  write_text_file(f.dir / "cfg.json",
                  R"({"paths":{"tumor_model":"tumor.json"},"triage":{"low":0.25,"neighbor":false},)"
                  R"("run":{"workers":4,"seed":9}})");
  const PipelineConfig j = load_config(f.dir / "cfg.json");
  EXPECT_EQ(config_to_json(t), config_to_json(j));
  EXPECT_EQ(t.digest(), j.digest());
  EXPECT_FALSE(j.triage.use_neighbor);
  EXPECT_EQ(j.run.seed, 9u);
}

TEST(Config, DigestIgnoresPathsAndWorkers) {
  Fixture f;
  const std::string base = f.toml("").digest();
  EXPECT_EQ(base.size(), 64u);
  EXPECT_EQ(f.toml("[run]\nworkers = 8\n").digest(), base);
  EXPECT_EQ(f.toml("output = \"elsewhere\"\n").digest(), base);
  EXPECT_NE(f.toml("[triage]\nhigh = 0.85\n").digest(), base);
}

TEST(Config, LoadConfigFromFile) {
  Fixture f;
  write_text_file(f.dir / "pipeline.toml", "[paths]\ntumor_model = \"tumor.json\"\n[render]\nalpha = 0.25\n");
  const PipelineConfig c = load_config(f.dir / "pipeline.toml");
  EXPECT_EQ(c.render.alpha, 0.25);
  EXPECT_EQ(c.base_dir, fs::absolute(f.dir.path()));
  EXPECT_EQ(error_of([&] { load_config(f.dir / "absent.toml"); }).code(), ErrorCode::kConfigError);
}

TEST(Manifest, SingleCaseAndList) {
  TempDir dir;
  const auto one = parse_manifests(
      R"({"case_id":"c1","source":"local","labels":{"subtype":"pRCC","isup_grade":2},)"
      R"("slides":[{"slide_id":"s1","image":"s1.png","mpp":0.25,"magnification":40}]})",
      dir.path());
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].case_id, "c1");
  EXPECT_EQ(one[0].source, "local");
  EXPECT_EQ(one[0].labels.subtype, "pRCC");
  EXPECT_EQ(one[0].labels.isup_grade, 2);
  EXPECT_EQ(one[0].slides[0].image, dir / "s1.png");
  EXPECT_EQ(one[0].slides[0].mpp, 0.25);

  const auto many = parse_manifests(
      R"({"cases":[{"case_id":"a","slides":[{"slide_id":"x","image":"/abs/x.png"}]},)"
      R"({"case_id":"b","labels":{"subtype":null},"slides":[{"slide_id":"y","image":"y"}]}]})",
      dir.path());
  ASSERT_EQ(many.size(), 2u);
  EXPECT_EQ(many[0].slides[0].image, fs::path("/abs/x.png"));
  EXPECT_FALSE(many[0].slides[0].mpp);
  EXPECT_TRUE(many[1].labels.empty());
}

TEST(Manifest, Rejections) {
  TempDir dir;
  auto code = [&](const std::string& text) { return error_of([&] { parse_manifests(text, dir.path()); }).code(); };
  EXPECT_EQ(code("not json"), ErrorCode::kConfigError);
  EXPECT_EQ(code(R"({"case_id":"c","slides":[]})"), ErrorCode::kConfigError);
  EXPECT_EQ(code(R"({"case_id":"../c","slides":[{"slide_id":"s","image":"i"}]})"), ErrorCode::kConfigError);
  EXPECT_EQ(code(R"({"case_id":"c","slides":[{"slide_id":"s","image":"i"},{"slide_id":"s","image":"j"}]})"),
            ErrorCode::kConfigError);
  EXPECT_EQ(code(R"({"case_id":"c","labels":{"subtype":"oncocytoma"},"slides":[{"slide_id":"s","image":"i"}]})"),
            ErrorCode::kConfigError);
  EXPECT_EQ(code(R"({"case_id":"c","labels":{"isup_grade":5},"slides":[{"slide_id":"s","image":"i"}]})"),
            ErrorCode::kConfigError);
  EXPECT_EQ(code(R"({"case_id":"c","slides":[{"slide_id":"s","image":"i","foo":1}]})"), ErrorCode::kConfigError);
  EXPECT_EQ(code(R"({"case_id":"c","slides":[{"slide_id":"s","image":"i","mpp":-1}]})"), ErrorCode::kConfigError);
  EXPECT_EQ(code(R"({"cases":[{"case_id":"c","slides":[{"slide_id":"s","image":"i"}]},)"
                 R"({"case_id":"c","slides":[{"slide_id":"t","image":"i"}]}]})"),
            ErrorCode::kConfigError);
}

}  // namespace
}  // namespace rccpath
