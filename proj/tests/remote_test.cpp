// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#include <thread>
#include <vector>

#include <gtest/gtest.h>

// Eigen users first: <resolv.h>, reached through httplib, defines a _res macro.
#include "support.hpp"

#include "csilab/remote.hpp"
#include "fake_service.hpp"

namespace csilab {
namespace {

RemoteConfig config_for(const testing::FakeService& svc, const std::string& cache) {
  RemoteConfig c;
  c.base_url = svc.base_url();
  c.cache_dir = testing::scratch_dir(cache).string();
  c.api_key_env = "CSILAB_TEST_UNSET_KEY";
  c.timeout_seconds = 5;
  return c;
}

AttackIntent blue() {
  AttackIntent i;
  i.target_attribute = "blue";
  i.replaced_attribute = "red";
  return i;
}

TEST(CandidateLines, StripsMarkersAndQuotes) {
  const auto out = parse_candidate_lines("1. a blue fox\n2) 'a blue cat'\n\n- a blue dog\n* a blue fox\n\xE2\x80\xA2 owl\n");
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0].raw, "a blue fox");
  EXPECT_EQ(out[1].raw, "a blue cat");
  EXPECT_EQ(out[2].raw, "a blue dog");
  EXPECT_EQ(out[3].raw, "owl");
  EXPECT_THROW(parse_candidate_lines("\n  \n"), ParseError);
}

TEST(RemoteClient, SplitsUrls) {
  EXPECT_EQ(RemoteClient::split_url("https://api.example.com/v1/"),
            (std::pair<std::string, std::string>{"https://api.example.com", "/v1"}));
  EXPECT_EQ(RemoteClient::split_url("http://h:8080"), (std::pair<std::string, std::string>{"http://h:8080", ""}));
  EXPECT_THROW(RemoteClient::split_url("no-scheme"), ConfigError);
}

TEST(RemoteProposer, SendsMetaPromptAndParsesReply) {
  testing::FakeService svc;
  auto client = std::make_shared<RemoteClient>(config_for(svc, "remote_propose"));
  RemoteProposer prop(client);
  const auto out = prop.propose(Prompt::parse("a red fox running"), AnchorSet{"fox"}, blue(), 2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].text(), "a blue fox sprinting");
  const auto body = nlohmann::json::parse(svc.last_body());
  EXPECT_EQ(body.at("model"), "gpt-4o-mini");
  EXPECT_EQ(body.at("messages").at(0).at("content"),
            render_meta_prompt(bundled_meta_prompt(), AnchorSet{"fox"}, blue()));
  EXPECT_NE(body.at("messages").at(1).at("content").get<std::string>().find("a red fox running"), std::string::npos);
}

TEST(RemoteCaptioner, ParsesCaption) {
  testing::FakeService svc;
  auto client = std::make_shared<RemoteClient>(config_for(svc, "remote_caption"));
  RemoteCaptioner cap(client);
  EXPECT_EQ(cap.caption(sample_latent(1, Shape{1, 4, 4})).text(), "a red fox running");
}

TEST(RemoteCache, ReplayIsByteIdenticalWithoutServer) {
  RemoteConfig cfg;
  std::string first;
  std::vector<Prompt> live;
  {
    testing::FakeService svc;
    cfg = config_for(svc, "remote_replay");
    auto client = std::make_shared<RemoteClient>(cfg);
    const std::string body = RemoteProposer(client).request_body(Prompt::parse("a red fox"), AnchorSet{"fox"}, blue(), 3);
    first = client->post(cfg.base_url, "/chat/completions", body);
    live = RemoteProposer(client).propose(Prompt::parse("a red fox"), AnchorSet{"fox"}, blue(), 3);
    EXPECT_EQ(svc.requests.load(), 1);
  }
  cfg.offline = true;
  auto client = std::make_shared<RemoteClient>(cfg);
  const std::string body = RemoteProposer(client).request_body(Prompt::parse("a red fox"), AnchorSet{"fox"}, blue(), 3);
  EXPECT_EQ(client->post(cfg.base_url, "/chat/completions", body), first);
  EXPECT_EQ(RemoteProposer(client).propose(Prompt::parse("a red fox"), AnchorSet{"fox"}, blue(), 3), live);
  EXPECT_THROW(RemoteProposer(client).propose(Prompt::parse("a green fox"), AnchorSet{"fox"}, blue(), 3),
               TransportError);
}

TEST(RemoteClient, HttpErrorsAndMalformedReplies) {
  testing::FakeService svc;
  auto client = std::make_shared<RemoteClient>(config_for(svc, "remote_errors"));
  svc.status = 500;
  EXPECT_THROW(RemoteCaptioner(client).caption(sample_latent(1, Shape{1, 4, 4})), TransportError);
  svc.status = 200;
  svc.completion = "   \n";
  EXPECT_THROW(RemoteProposer(client).propose(Prompt::parse("a red fox"), AnchorSet{"fox"}, blue(), 3), ParseError);
  // Only the 200 reply is cached, even though it failed to parse.
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(client->cache().dir()),
                          std::filesystem::directory_iterator()),
            1);
}

TEST(RemoteClient, UnreachableHostIsTransportError) {
  RemoteConfig cfg;
  cfg.base_url = "http://127.0.0.1:9/v1";
  cfg.cache_dir = testing::scratch_dir("remote_down").string();
  cfg.timeout_seconds = 2;
  RemoteClient client(cfg);
  EXPECT_THROW(client.post(cfg.base_url, "/caption", "{}"), TransportError);
}

TEST(RemoteClient, RespectsInFlightLimit) {
  testing::FakeService svc;
  svc.delay_ms = 60;
  RemoteConfig cfg = config_for(svc, "remote_limit");
  cfg.max_in_flight = 2;
  auto client = std::make_shared<RemoteClient>(cfg);
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) {
    threads.emplace_back([&, i] { client->post(cfg.base_url, "/caption", "{\"n\":" + std::to_string(i) + "}"); });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(svc.requests.load(), 6);
  EXPECT_LE(svc.peak_in_flight.load(), 2);
}

TEST(RemoteConfig, Validation) {
  RemoteConfig c;
  c.max_in_flight = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RemoteConfig{};
  c.cache_dir.clear();
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace csilab
