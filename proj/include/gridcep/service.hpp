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

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gridcep/experiment.hpp"

namespace gridcep::service {

struct ServiceOptions {
    std::filesystem::path scenario;
    std::vector<std::filesystem::path> patterns;
    std::optional<std::filesystem::path> rules;
    std::string host = "127.0.0.1";
    int port = 8080;
    double speed = 60;  // simulated seconds per wall second; 0 runs flat out
    std::int64_t gap = 120;
};

/// Append-only JSON log readable while the loop writes. Entry ids start at 1.
class Feed {
  public:
    std::uint64_t append(nlohmann::ordered_json j, std::string tag = {}) {
        std::lock_guard lock(mu_);
        entries_.push_back({std::move(j), std::move(tag)});
        cv_.notify_all();
        return entries_.size();
    }

    /// Entries with id > `after`, optionally restricted to `tag`.
    std::vector<std::pair<std::uint64_t, std::string>> since(std::uint64_t after, const std::string& tag = {},
                                                             std::uint64_t* scanned = nullptr) const {
        std::lock_guard lock(mu_);
        if (scanned) *scanned = entries_.size();
        std::vector<std::pair<std::uint64_t, std::string>> out;
        for (auto i = after; i < entries_.size(); ++i) {
            if (!tag.empty() && entries_[i].tag != tag) continue;
            out.emplace_back(i + 1, entries_[i].body.dump());
        }
        return out;
    }

    nlohmann::ordered_json array_since(std::uint64_t after) const {
        std::lock_guard lock(mu_);
        auto out = nlohmann::ordered_json::array();
        for (auto i = after; i < entries_.size(); ++i) out.push_back(entries_[i].body);
        return out;
    }

    std::uint64_t size() const {
        std::lock_guard lock(mu_);
        return entries_.size();
    }

    /// Blocks until an entry past `after` exists, `timeout` passes or `stop` is set.
    void wait(std::uint64_t after, std::chrono::milliseconds timeout, const std::atomic<bool>& stop) const {
        std::unique_lock lock(mu_);
        cv_.wait_for(lock, timeout, [&] { return entries_.size() > after || stop.load(); });
    }

    void wake() const { cv_.notify_all(); }

  private:
    struct Entry {
        nlohmann::ordered_json body;
        std::string tag;
    };
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::vector<Entry> entries_;
};

inline int http_status(ErrorCode c) {
    switch (c) {
        case ErrorCode::UnknownPattern:
        case ErrorCode::UnknownTarget: return 404;
        case ErrorCode::DuplicateId:
        case ErrorCode::DuplicateRule: return 409;
        default: return 400;
    }
}

inline nlohmann::ordered_json taxonomy_json(const lang::CheckedPattern& p) {
    const auto& t = p.tags;
    nlohmann::ordered_json j;
    j["end_use"] = lang::to_string(t.end_use);
    if (!t.end_use_detail.empty()) j["end_use_detail"] = t.end_use_detail;
    j["spatial"] = t.spatial;
    j["frequency"] = t.frequency;
    j["latency"] = t.latency_text;
    j["representation"] = t.representation;
    j["lifecycle"] = lang::to_string(t.lifecycle.kind);
    if (!t.lifecycle.schedule.empty()) j["schedule"] = t.lifecycle.schedule.to_text();
    j["adaptivity"] = t.adaptivity;
    return j;
}

/// HTTP + SSE front end over one serialized loop. Reads take the state lock;
/// mutations are queued onto the loop thread and acknowledged with the
/// loop's command sequence id. The simulation starts paused.
class Service {
  public:
    explicit Service(const ServiceOptions& opts)
        : opts_(opts),
          inputs_(harness::load_inputs(opts.scenario, opts.patterns, opts.rules)),
          loop_(harness::make_loop(inputs_, true, {})),
          speed_(opts.speed) {
        const auto& ns = loop_.namespaces();
        loop_.on_event = [this, &ns](const Event& e) { events_.append(event_to_json(e, ns), e.stream_id); };
        loop_.on_detection = [this, &ns](const cep::Detection& d) {
            auto j = cep::detection_to_json(d, ns);
            nlohmann::ordered_json withid;
            withid["id"] = d.id;
            for (auto& [k, v] : j.items()) withid[k] = v;
            detections_.append(std::move(withid));
        };
        loop_.on_action = [this, &ns](const actions::LogEntry& a) { actions_.append(actions::log_entry_to_json(a, ns)); };
        loop_.on_status = [this](const cep::StatusChange& c) {
            statuses_.append({{"pattern_id", c.pattern_id}, {"status", cep::to_string(c.status)}, {"time", c.time}});
        };
        routes();
        worker_ = std::thread([this] { run_loop(); });
    }

    ~Service() { stop(); }

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves until `stop`. Throws BindError.
    void listen() {
        if (!server_.bind_to_port(opts_.host, opts_.port)) {
            throw Error(ErrorCode::BindError, opts_.host + ":" + std::to_string(opts_.port));
        }
        server_.listen_after_bind();
    }

    /// Binds an ephemeral port and serves on a background thread.
    int start_background() {
        int port = server_.bind_to_any_port(opts_.host);
        if (port <= 0) throw Error(ErrorCode::BindError, opts_.host);
        http_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port;
    }

    void stop() {
        if (stopping_.exchange(true)) return;
        {
            std::lock_guard lock(queue_mu_);
            queue_cv_.notify_all();
        }
        events_.wake();
        detections_.wake();
        actions_.wake();
        server_.stop();
        if (http_.joinable()) http_.join();
        if (worker_.joinable()) worker_.join();
    }

    /// Runs `fn` on the loop thread; returns its result and the command id.
    nlohmann::ordered_json submit(std::function<nlohmann::ordered_json()> fn) {
        std::packaged_task<nlohmann::ordered_json()> task(std::move(fn));
        auto fut = task.get_future();
        {
            std::lock_guard lock(queue_mu_);
            commands_.push_back(std::move(task));
        }
        queue_cv_.notify_all();
        return fut.get();
    }

  private:
    void run_loop() {
        using clock = std::chrono::steady_clock;
        auto next = clock::now();
        while (!stopping_) {
            std::deque<std::packaged_task<nlohmann::ordered_json()>> batch;
            {
                std::unique_lock lock(queue_mu_);
                auto ready = [&] { return stopping_ || !commands_.empty() || (!paused_ && clock::now() >= next); };
                if (paused_) {
                    queue_cv_.wait(lock, ready);
                } else {
                    queue_cv_.wait_until(lock, next, ready);
                }
                batch.swap(commands_);
            }
            for (auto& task : batch) {
                std::lock_guard state(state_mu_);
                task();
            }
            if (stopping_ || paused_ || clock::now() < next) continue;
            {
                std::lock_guard state(state_mu_);
                loop_.advance();
            }
            double speed = speed_;
            auto wall = speed > 0 ? std::chrono::duration<double>(static_cast<double>(inputs_.scenario.config.tick) / speed)
                                  : std::chrono::duration<double>(0);
            next = clock::now() + std::chrono::duration_cast<clock::duration>(wall);
        }
        // drain so no caller waits forever
        std::lock_guard lock(queue_mu_);
        for (auto& task : commands_) task();
        commands_.clear();
    }

    // Wraps a mutation: runs on the loop thread, stamps the command id,
    // maps domain errors to HTTP statuses.
    void mutate(httplib::Response& res, std::function<nlohmann::ordered_json()> fn) {
        auto result = submit([this, fn = std::move(fn)]() -> nlohmann::ordered_json {
            try {
                auto body = fn();
                body["seq"] = ++command_seq_;
                return body;
            } catch (const Error& e) {
                return error_body(e);
            } catch (const nlohmann::json::exception& e) {
                return {{"error", "ConfigError"}, {"message", e.what()}, {"status", 400}};
            }
        });
        int status = 200;
        if (result.contains("status") && result.contains("error")) {
            status = result["status"].get<int>();
            result.erase("status");
        }
        reply(res, result, status);
    }

    static nlohmann::ordered_json error_body(const Error& e) {
        return {{"error", std::string(to_string(e.code()))},
                {"subject", e.subject()},
                {"message", e.what()},
                {"status", http_status(e.code())}};
    }

    static void reply(httplib::Response& res, const nlohmann::ordered_json& body, int status = 200) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    template <typename F>
    void read(httplib::Response& res, F&& fn) {
        std::lock_guard state(state_mu_);
        reply(res, fn());
    }

    static std::uint64_t number_param(const httplib::Request& req, const char* name, std::uint64_t fallback) {
        if (!req.has_param(name)) return fallback;
        return std::stoull(req.get_param_value(name));
    }

    static std::uint64_t resume_point(const httplib::Request& req) {
        if (req.has_header("Last-Event-ID")) return std::stoull(req.get_header_value("Last-Event-ID"));
        return number_param(req, "since", 0);
    }

    // Server-sent events over `feed`, resuming after `from`. `keep` filters
    // by entry id for downsampling.
    void stream(httplib::Response& res, Feed& feed, std::uint64_t from, std::string tag,
                std::function<bool(std::uint64_t)> keep = {}) {
        res.set_header("Cache-Control", "no-cache");
        auto cursor = std::make_shared<std::uint64_t>(from);
        res.set_chunked_content_provider(
            "text/event-stream", [this, &feed, cursor, tag, keep](std::size_t, httplib::DataSink& sink) {
                if (stopping_) {
                    sink.done();
                    return false;
                }
                feed.wait(*cursor, std::chrono::milliseconds(250), stopping_);
                std::string out;
                std::uint64_t scanned = *cursor;
                for (const auto& [id, body] : feed.since(*cursor, tag, &scanned)) {
                    if (keep && !keep(id)) continue;
                    out += "id: " + std::to_string(id) + "\ndata: " + body + "\n\n";
                }
                *cursor = std::max(*cursor, scanned);
                if (out.empty()) out = ": keep-alive\n\n";
                return sink.write(out.data(), out.size());
            });
    }

    nlohmann::ordered_json pattern_json(const std::string& id) const {
        const auto& engine = loop_.engine();
        const auto& p = engine.pattern(id);
        return {{"id", id}, {"text", p.text()}, {"status", cep::to_string(engine.status(id))}, {"tags", taxonomy_json(p)}};
    }

    nlohmann::ordered_json sim_json() const {
        const auto* s = loop_.simulator();
        const auto& ns = loop_.namespaces();
        nlohmann::ordered_json j;
        j["clock"] = s->clock();
        j["paused"] = paused_.load();
        j["speed"] = speed_.load();
        j["tick"] = inputs_.scenario.config.tick;
        auto& bs = j["buildings"] = nlohmann::ordered_json::object();
        for (const auto& b : inputs_.scenario.config.buildings) {
            nlohmann::ordered_json bj;
            bj["coils_on"] = s->coils_on(b.id);
            if (auto g = s->gtr(b.id)) bj["gtr"] = {{"delta", g->value}, {"expires", g->expires}};
            if (auto c = s->duty_cap(b.id)) bj["duty_cap"] = {{"cap", c->value}, {"expires", c->expires}};
            bs[ns.compact(iri::bd(b.id))] = bj;
        }
        return j;
    }

    nlohmann::ordered_json report_json() const {
        const auto& ns = loop_.namespaces();
        harness::RunReport r;
        r.duration = loop_.now() - inputs_.scenario.config.start;
        r.seed = inputs_.scenario.config.seed;
        sim::TraceSummary summary;
        for (const auto& [_, body] : events_.since(0)) {
            sim::summarize(summary, event_from_json(nlohmann::json::parse(body), ns), inputs_.scenario.config.cadence.meter);
        }
        r.stream_counts = summary.counts;
        for (const auto& d : loop_.engine().detections()) ++r.detection_counts[d.pattern_id];
        r.intervals = cep::coalesce(loop_.engine().detections(), opts_.gap);
        r.buildings = harness::RunRecorder::building_energy(loop_, summary, ns);
        for (const auto& a : loop_.rules().log()) ++r.action_outcomes[std::string(actions::to_string(a.outcome))];
        std::vector<lang::CheckedPattern> patterns;
        for (const auto& id : loop_.engine().pattern_ids()) patterns.push_back(loop_.engine().pattern(id));
        return r.to_json(patterns);
    }

    void routes() {
        server_.Get("/patterns", [this](const httplib::Request&, httplib::Response& res) {
            read(res, [&] {
                auto arr = nlohmann::ordered_json::array();
                for (const auto& id : loop_.engine().pattern_ids()) arr.push_back(pattern_json(id));
                return arr;
            });
        });
        server_.Post("/patterns", [this](const httplib::Request& req, httplib::Response& res) {
            mutate(res, [this, body = req.body]() -> nlohmann::ordered_json {
                auto j = nlohmann::json::parse(body);
                lang::PatternFileEntry entry;
                entry.text = j.at("text").get<std::string>();
                for (const char* key : {"id", "end_use", "lifecycle", "schedule", "adaptivity"}) {
                    if (j.contains(key)) entry.metadata[key] = j.at(key).get<std::string>();
                }
                auto meta = lang::meta_from_entry(entry);
                auto checked = lang::validate(lang::parse_pattern(entry.text), *inputs_.scenario.ontology,
                                              *inputs_.scenario.schemas, meta);
                auto& engine = loop_.engine();
                if (j.value("replace", false) && engine.has_pattern(meta.id)) {
                    engine.replace_pattern(std::move(checked));
                } else {
                    engine.register_pattern(std::move(checked));
                }
                return pattern_json(meta.id);
            });
        });
        server_.Post(R"(/patterns/([^/]+)/(activate|deactivate))", [this](const httplib::Request& req, httplib::Response& res) {
            std::string id = req.matches[1];
            bool on = req.matches[2] == "activate";
            mutate(res, [this, id, on]() -> nlohmann::ordered_json {
                auto status = loop_.set_active(id, on);
                return {{"id", id}, {"status", cep::to_string(status)}};
            });
        });
        server_.Get("/detections", [this](const httplib::Request& req, httplib::Response& res) {
            reply(res, detections_.array_since(number_param(req, "since", 0)));
        });
        server_.Get("/feed/detections", [this](const httplib::Request& req, httplib::Response& res) {
            stream(res, detections_, resume_point(req), {});
        });
        server_.Get("/feed/actions", [this](const httplib::Request& req, httplib::Response& res) {
            stream(res, actions_, resume_point(req), {});
        });
        server_.Get("/feed/events", [this](const httplib::Request& req, httplib::Response& res) {
            std::string tag = req.has_param("stream") ? req.get_param_value("stream") : "";
            auto every = std::max<std::uint64_t>(1, number_param(req, "every", 1));
            auto count = std::make_shared<std::uint64_t>(0);
            stream(res, events_, resume_point(req), tag, [count, every](std::uint64_t) { return (*count)++ % every == 0; });
        });
        server_.Get("/rules", [this](const httplib::Request&, httplib::Response& res) {
            read(res, [&] {
                auto arr = nlohmann::ordered_json::array();
                for (const auto& r : loop_.rules().rules()) arr.push_back(actions::rule_to_json(r));
                return arr;
            });
        });
        server_.Post("/rules", [this](const httplib::Request& req, httplib::Response& res) {
            mutate(res, [this, body = req.body]() -> nlohmann::ordered_json {
                auto rule = actions::rule_from_json(nlohmann::json::parse(body));
                loop_.add_rule(rule);
                return actions::rule_to_json(rule);
            });
        });
        server_.Post("/actions", [this](const httplib::Request& req, httplib::Response& res) {
            mutate(res, [this, body = req.body]() -> nlohmann::ordered_json {
                auto entry = loop_.manual(command_from_json(nlohmann::json::parse(body)));
                auto j = actions::log_entry_to_json(entry, loop_.namespaces());
                if (entry.outcome == actions::Outcome::TargetError) {
                    j["error"] = "UnknownTarget";
                    j["status"] = 404;
                }
                return j;
            });
        });
        server_.Get("/sim", [this](const httplib::Request&, httplib::Response& res) { read(res, [&] { return sim_json(); }); });
        server_.Post("/sim/pause", [this](const httplib::Request&, httplib::Response& res) {
            mutate(res, [this] { paused_ = true; return sim_json(); });
        });
        server_.Post("/sim/resume", [this](const httplib::Request&, httplib::Response& res) {
            mutate(res, [this] { paused_ = false; return sim_json(); });
        });
        server_.Post("/sim/speed", [this](const httplib::Request& req, httplib::Response& res) {
            mutate(res, [this, body = req.body]() -> nlohmann::ordered_json {
                auto factor = nlohmann::json::parse(body).at("factor").get<double>();
                if (factor < 0) throw Error(ErrorCode::InvalidArgument, "factor", "must be >= 0");
                speed_ = factor;
                return sim_json();
            });
        });
        server_.Post("/sim/step", [this](const httplib::Request& req, httplib::Response& res) {
            mutate(res, [this, body = req.body]() -> nlohmann::ordered_json {
                std::int64_t ticks = 1;
                if (!body.empty()) ticks = nlohmann::json::parse(body).value("ticks", std::int64_t{1});
                if (ticks < 0) throw Error(ErrorCode::InvalidArgument, "ticks", "must be >= 0");
                for (std::int64_t i = 0; i < ticks; ++i) loop_.advance();
                return sim_json();
            });
        });
        server_.Get("/report", [this](const httplib::Request&, httplib::Response& res) {
            read(res, [&] { return report_json(); });
        });
        server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const Error& e) {
                auto body = error_body(e);
                int status = body["status"];
                body.erase("status");
                reply(res, body, status);
            } catch (const std::exception& e) {
                reply(res, {{"error", "InvalidArgument"}, {"message", e.what()}}, 400);
            }
        });
    }

    ServiceOptions opts_;
    harness::Inputs inputs_;
    harness::Loop loop_;
    httplib::Server server_;
    Feed events_, detections_, actions_, statuses_;

    std::mutex state_mu_;
    std::mutex queue_mu_;
    std::condition_variable queue_cv_;
    std::deque<std::packaged_task<nlohmann::ordered_json()>> commands_;
    std::atomic<bool> stopping_{false};
    std::atomic<bool> paused_{true};
    std::atomic<double> speed_;
    std::uint64_t command_seq_ = 0;
    std::thread worker_;
    std::thread http_;
};

}  // namespace gridcep::service
