/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#include <memory>
#include <string>

#include <gtest/gtest.h>
#include <httplib.h>

#include "gridcep/service.hpp"

using namespace gridcep;
using nlohmann::json;

namespace {

class ServiceTest : public testing::Test {
  protected:
    void SetUp() override {
        service::ServiceOptions opts;
        opts.scenario = GRIDCEP_FIXTURES "/scenarios/mhp_small.json";
        opts.patterns = {GRIDCEP_FIXTURES "/patterns/campus.patterns"};
        opts.rules = GRIDCEP_FIXTURES "/rules/escalation.json";
        opts.speed = 0;
        svc_ = std::make_unique<service::Service>(opts);
        port_ = svc_->start_background();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
        client_->set_read_timeout(10, 0);
    }

    void TearDown() override {
        client_.reset();
        svc_->stop();
    }

    json get(const std::string& path, int expect = 200) {
        auto res = client_->Get(path);
        EXPECT_TRUE(res) << path;
        if (!res) return {};
        EXPECT_EQ(res->status, expect) << path << " " << res->body;
        return json::parse(res->body);
    }

    json post(const std::string& path, const json& body = json::object(), int expect = 200) {
        auto res = client_->Post(path, body.dump(), "application/json");
        EXPECT_TRUE(res) << path;
        if (!res) return {};
        EXPECT_EQ(res->status, expect) << path << " " << res->body;
        return json::parse(res->body);
    }

    // Reads SSE frames until `count` ids arrive; returns the ids.
    std::vector<std::uint64_t> sse_ids(const std::string& path, std::size_t count, const httplib::Headers& headers = {}) {
        std::vector<std::uint64_t> ids;
        std::string buffer;
        httplib::Client sse("127.0.0.1", port_);
        sse.set_read_timeout(10, 0);
        sse.Get(path, headers, [&](const char* data, std::size_t len) {
            buffer.append(data, len);
            std::size_t pos;
            while (ids.size() < count && (pos = buffer.find("\n\n")) != std::string::npos) {
                auto frame = buffer.substr(0, pos);
                buffer.erase(0, pos + 2);
                if (frame.rfind("id: ", 0) == 0) ids.push_back(std::stoull(frame.substr(4, frame.find('\n') - 4)));
            }
            return ids.size() < count;
        });
        return ids;
    }

    std::unique_ptr<service::Service> svc_;
    std::unique_ptr<httplib::Client> client_;
    int port_ = 0;
};

}  // namespace

TEST_F(ServiceTest, ListsPatternsWithTaxonomy) {
    auto ps = get("/patterns");
    ASSERT_EQ(ps.size(), 6u);
    EXPECT_EQ(ps[0]["id"], "p1");
    EXPECT_EQ(ps[0]["status"], "active");
    EXPECT_EQ(ps[0]["tags"]["end_use"], "monitoring");
    EXPECT_EQ(ps[0]["tags"]["representation"], "semantic");
    EXPECT_EQ(ps[1]["id"], "p2");
    EXPECT_EQ(ps[1]["status"], "inactive");
    EXPECT_EQ(ps[4]["tags"]["lifecycle"], "scheduled");
    EXPECT_EQ(ps[4]["tags"]["schedule"], "daily 08:00-18:00");
}

TEST_F(ServiceTest, StartsPausedAndSteps) {
    auto s = get("/sim");
    EXPECT_TRUE(s["paused"].get<bool>());
    EXPECT_EQ(s["clock"], 0);
    auto stepped = post("/sim/step", {{"ticks", 30}});
    EXPECT_EQ(stepped["clock"], 1800);
    EXPECT_GE(stepped["seq"].get<int>(), 1);
    EXPECT_TRUE(stepped["buildings"].contains("bd:MHP"));
    EXPECT_EQ(get("/sim")["clock"], 1800);
}

TEST_F(ServiceTest, ActivationIsAcknowledgedWithSequence) {
    auto a = post("/patterns/p2/activate");
    EXPECT_EQ(a["status"], "active");
    auto b = post("/patterns/p2/deactivate");
    EXPECT_EQ(b["status"], "inactive");
    EXPECT_GT(b["seq"].get<int>(), a["seq"].get<int>());
    auto missing = post("/patterns/nope/activate", json::object(), 404);
    EXPECT_EQ(missing["error"], "UnknownPattern");
    EXPECT_EQ(missing["subject"], "nope");
}

TEST_F(ServiceTest, ManualGtrIsAppliedAndLogged) {
    post("/sim/step", {{"ticks", 5}});
    auto entry = post("/actions", {{"kind", "GTR"}, {"target", "bd:MHP"}, {"delta", 4}, {"duration", 3600}});
    EXPECT_EQ(entry["outcome"], "applied");
    EXPECT_EQ(entry["time"], 300);
    EXPECT_EQ(entry["rule_id"], "manual");
    auto s = get("/sim");
    EXPECT_EQ(s["buildings"]["bd:MHP"]["gtr"]["delta"], 4.0);
    EXPECT_EQ(s["buildings"]["bd:MHP"]["gtr"]["expires"], 3900);
    auto bad = post("/actions", {{"kind", "GTR"}, {"target", "bd:XYZ"}, {"delta", 4}, {"duration", 600}}, 404);
    EXPECT_EQ(bad["error"], "UnknownTarget");
    EXPECT_EQ(bad["outcome"], "target-error");
}

TEST_F(ServiceTest, RegistersPatternsAndRejectsBadOnes) {
    json body = {{"id", "p7"}, {"end_use", "monitoring"}, {"lifecycle", "on_demand"},
                 {"text", "SELECT(?m) FROM(?m,meterstream) WHERE {?m evt:hasSource ?s}"}};
    auto p = post("/patterns", body);
    EXPECT_EQ(p["id"], "p7");
    EXPECT_EQ(p["status"], "inactive");
    post("/patterns", body);  // same text again is a no-op
    body["text"] = "SELECT(?m) FROM(?m,meterstream) WHERE {?m evt:hasSource ?src}";
    EXPECT_EQ(post("/patterns", body, 409)["error"], "DuplicateId");
    body["replace"] = true;
    EXPECT_EQ(post("/patterns", body)["id"], "p7");
    auto bad = post("/patterns", {{"id", "p8"}, {"text", "SELECT(?x FROM("}}, 400);
    EXPECT_EQ(bad["error"], "SyntaxError");
    auto stream = post("/patterns", {{"id", "p9"}, {"end_use", "monitoring"}, {"text", "SELECT(?x) FROM(?x,bogus)"}}, 400);
    EXPECT_EQ(stream["error"], "UnknownStream");
    EXPECT_EQ(get("/patterns").size(), 7u);
}

TEST_F(ServiceTest, RulesRoundTripAndDuplicatesConflict) {
    auto rules = get("/rules");
    ASSERT_EQ(rules.size(), 5u);
    EXPECT_EQ(rules[3]["action"]["target"], "org:EEDepartment");
    auto dup = post("/rules", rules[0], 409);
    EXPECT_EQ(dup["error"], "DuplicateRule");
    json fresh = {{"rule_id", "r9"}, {"trigger", "p4"}, {"cooldown", 60},
                  {"action", {{"kind", "Notify"}, {"audience", "org:Facilities"}, {"message", "empty room cooled"}}}};
    EXPECT_EQ(post("/rules", fresh)["rule_id"], "r9");
    EXPECT_EQ(post("/rules", {{"rule_id", "r10"}, {"trigger", "zz"}, {"action", {{"kind", "Notify"}}}}, 404)["error"],
              "UnknownPattern");
}

TEST_F(ServiceTest, BadArgumentsAreClientErrors) {
    EXPECT_EQ(post("/sim/speed", {{"factor", -1}}, 400)["error"], "InvalidArgument");
    EXPECT_EQ(post("/sim/step", {{"ticks", -1}}, 400)["error"], "InvalidArgument");
    EXPECT_EQ(post("/actions", {{"kind", "Explode"}}, 400)["error"], "ConfigError");
    auto res = client_->Post("/sim/step", "{not json", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
    EXPECT_EQ(post("/sim/speed", {{"factor", 120}})["speed"], 120.0);
}

TEST_F(ServiceTest, DetectionsAreQueryableSinceAnId) {
    post("/sim/step", {{"ticks", 60 * 24}});
    auto all = get("/detections");
    ASSERT_GT(all.size(), 2u);
    EXPECT_EQ(all[0]["id"], 0);
    auto tail = get("/detections?since=2");
    EXPECT_EQ(tail.size(), all.size() - 2);
    EXPECT_EQ(tail[0], all[2]);
    auto report = get("/report");
    EXPECT_EQ(report["duration"], 86400);
    int total = 0;
    for (const auto& [_, p] : report["patterns"].items()) total += p["detections"].get<int>();
    EXPECT_EQ(static_cast<std::size_t>(total), all.size());
}

TEST_F(ServiceTest, EventFeedResumesAfterLastEventId) {
    post("/sim/step", {{"ticks", 10}});
    auto first = sse_ids("/feed/events", 5);
    ASSERT_EQ(first.size(), 5u);
    EXPECT_EQ(first.front(), 1u);
    for (std::size_t i = 1; i < first.size(); ++i) EXPECT_EQ(first[i], first[i - 1] + 1);
    auto resumed = sse_ids("/feed/events", 3, {{"Last-Event-ID", std::to_string(first.back())}});
    ASSERT_EQ(resumed.size(), 3u);
    EXPECT_EQ(resumed.front(), first.back() + 1);
    auto meters = sse_ids("/feed/events?stream=meterstream&since=0", 2);
    ASSERT_EQ(meters.size(), 2u);
    EXPECT_LT(meters[0], meters[1]);
}

TEST_F(ServiceTest, ActionFeedCarriesManualCommands) {
    post("/actions", {{"kind", "DutyCycle"}, {"target", "bd:MHP"}, {"cap", 6}, {"duration", 3600}});
    auto ids = sse_ids("/feed/actions", 1);
    ASSERT_EQ(ids.size(), 1u);
    EXPECT_EQ(ids[0], 1u);
}
