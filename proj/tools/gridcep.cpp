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

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridcep/gridcep.hpp"

namespace fs = std::filesystem;
using namespace gridcep;

namespace {

std::int64_t duration_arg(const std::string& s) { return parse_duration_seconds(s); }

std::string fixed(double v, int digits) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << v;
    return out.str();
}

int cmd_run(const harness::ExperimentSpec& spec) {
    auto report = harness::run_experiment(spec);
    std::size_t total = 0;
    for (const auto& [_, n] : report.detection_counts) total += n;
    std::cout << "events: ";
    std::size_t events = 0;
    for (const auto& [_, n] : report.stream_counts) events += n;
    std::cout << events << "  detections: " << total << "  intervals: " << report.intervals.size() << '\n';
    for (const auto& [id, b] : report.buildings) {
        std::cout << id << " peak " << fixed(b.peak_kw, 2) << " kW at " << b.peak_time;
        if (report.baseline) {
            if (auto it = report.baseline->find(id); it != report.baseline->end() && it->second.peak_kw > 0) {
                double pct = (it->second.peak_kw - b.peak_kw) / it->second.peak_kw * 100.0;
                std::cout << " (baseline " << fixed(it->second.peak_kw, 2) << " kW, reduction " << fixed(pct, 2) << "%)";
            }
        }
        std::cout << '\n';
    }
    std::cout << "artifacts in " << spec.out.string() << '\n';
    return 0;
}

int cmd_parse(const std::vector<fs::path>& files, const std::optional<fs::path>& scenario,
              const std::optional<fs::path>& ontology, const std::optional<fs::path>& schemas) {
    std::shared_ptr<const Ontology> onto;
    std::shared_ptr<const SchemaRegistry> reg;
    if (scenario) {
        auto s = sim::load_scenario(harness::read_json(*scenario));
        onto = s.ontology;
        reg = s.schemas;
    } else if (ontology && schemas) {
        onto = std::make_shared<const Ontology>(parse_ontology(harness::read_file(*ontology)));
        reg = std::make_shared<const SchemaRegistry>(schemas_from_json(harness::read_json(*schemas), onto->namespaces()));
    }
    for (const auto& f : files) {
        auto content = harness::read_file(f);
        if (onto) {
            for (const auto& p : lang::load_pattern_file(content, *onto, *reg)) {
                std::cout << f.string() << ": " << p.id << " ok [" << lang::to_string(p.tags.end_use) << ", "
                          << p.tags.frequency << ", latency " << p.tags.latency_text << ", "
                          << lang::to_string(p.tags.lifecycle.kind) << "]\n";
            }
        } else {
            for (const auto& e : lang::parse_pattern_file(content)) {
                lang::parse_pattern(e.text);
                std::cout << f.string() << ": " << e.get("id") << " parsed\n";
            }
        }
    }
    return 0;
}

int cmd_replay(const fs::path& events, const std::vector<fs::path>& patterns, const fs::path& scenario,
               const std::optional<fs::path>& rules, const std::optional<fs::path>& out) {
    auto in = harness::load_inputs(scenario, patterns, rules);
    auto trace = harness::read_events(events, in.scenario.namespaces());
    auto log = harness::replay(in, trace);
    if (out) {
        std::ofstream(*out, std::ios::binary) << log;
    } else {
        std::cout << log;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gridcep: semantic CEP for campus demand response"};
    app.require_subcommand(1);

    harness::ExperimentSpec spec;
    std::string duration = "24h";
    auto* run = app.add_subcommand("run", "run a headless experiment");
    run->add_option("--scenario", spec.scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--patterns", spec.patterns, "pattern files")->check(CLI::ExistingFile);
    run->add_option("--rules", spec.rules, "action rules JSON")->check(CLI::ExistingFile);
    run->add_option("--duration", duration, "simulated time, e.g. 24h")->capture_default_str();
    run->add_option("--out", spec.out, "output directory")->capture_default_str();
    run->add_option("--gap", spec.gap, "coalesce gap in seconds")->capture_default_str();
    run->add_flag("--ab", spec.ab, "also run a baseline with rules disabled");

    std::vector<fs::path> parse_files;
    std::optional<fs::path> parse_scenario, parse_ontology, parse_schemas;
    auto* parse = app.add_subcommand("parse", "parse and validate pattern files");
    parse->add_option("--check", parse_files, "pattern files")->required()->check(CLI::ExistingFile);
    parse->add_option("--scenario", parse_scenario, "validate against a scenario")->check(CLI::ExistingFile);
    parse->add_option("--ontology", parse_ontology, "validate against an ontology file")->check(CLI::ExistingFile);
    parse->add_option("--schemas", parse_schemas, "stream schemas JSON")->check(CLI::ExistingFile);

    fs::path replay_events, replay_scenario;
    std::vector<fs::path> replay_patterns;
    std::optional<fs::path> replay_rules, replay_out;
    auto* rep = app.add_subcommand("replay", "re-run recorded events through the runtime");
    rep->add_option("--events", replay_events, "events.jsonl")->required()->check(CLI::ExistingFile);
    rep->add_option("--patterns", replay_patterns, "pattern files")->check(CLI::ExistingFile);
    rep->add_option("--scenario", replay_scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
    rep->add_option("--rules", replay_rules, "action rules JSON")->check(CLI::ExistingFile);
    rep->add_option("--out", replay_out, "write detections here instead of stdout");

    service::ServiceOptions serve_opts;
    std::string bind = "127.0.0.1:8080";
    auto* serve = app.add_subcommand("serve", "serve the control and observation API");
    serve->add_option("--scenario", serve_opts.scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
    serve->add_option("--patterns", serve_opts.patterns, "pattern files")->check(CLI::ExistingFile);
    serve->add_option("--rules", serve_opts.rules, "action rules JSON")->check(CLI::ExistingFile);
    serve->add_option("--bind", bind, "HOST:PORT")->capture_default_str();
    serve->add_option("--speed", serve_opts.speed, "simulated seconds per wall second (0 = as fast as possible)")
        ->capture_default_str();
    serve->add_option("--gap", serve_opts.gap, "coalesce gap in seconds")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            spec.duration = duration_arg(duration);
            return cmd_run(spec);
        }
        if (*parse) return cmd_parse(parse_files, parse_scenario, parse_ontology, parse_schemas);
        if (*rep) return cmd_replay(replay_events, replay_patterns, replay_scenario, replay_rules, replay_out);
        if (*serve) {
            auto colon = bind.rfind(':');
            if (colon == std::string::npos) throw Error(ErrorCode::ConfigError, bind, "expected HOST:PORT");
            serve_opts.host = bind.substr(0, colon);
            serve_opts.port = std::stoi(bind.substr(colon + 1));
            service::Service svc(serve_opts);
            std::cout << "listening on " << bind << " (simulation paused)\n";
            svc.listen();
            return 0;
        }
    } catch (const lang::SyntaxError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
