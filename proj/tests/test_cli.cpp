#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "gplab/cli.hpp"

using namespace gplab;
using namespace gplab::cli;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::optional<std::string> bad_field(const json& doc) {
    try {
        parse_config(doc);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigInvalid);
        return e.field();
    }
    return std::nullopt;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("config validation names the field") {
    CHECK(bad_field({{"command", "estimate"}, {"event", "full:4,2"}}) == "event.R");
    CHECK(bad_field({{"command", "nope"}}) == "command");
    CHECK(bad_field({{"command", "estimate"}, {"event", "full:1,4"}, {"replicas", 20}}) == "replicas");
    CHECK(bad_field({{"command", "estimate"}, {"event", "full:1,4"}, {"model", {{"delta", 2}}}}) == "model.delta");
    CHECK(bad_field({{"command", "estimate"}, {"event", "full:1,4"}, {"model", {{"typo", 1}}}}) == "model.typo");
    CHECK(bad_field({{"command", "estimate"}, {"event", "full:1,4"}, {"geometry", {{"h", "x"}}}}) == "geometry.h");
    CHECK(bad_field({{"command", "compare"}, {"event", "full:1,4"}}) == "model.N");
    CHECK(bad_field({{"command", "fit-decay"}, {"fit", {{"radii", {1, 2, 3}}}}}) == "fit.radii");
    CHECK_FALSE(bad_field({{"command", "estimate"}, {"event", "full:1,4"}}));
}

TEST_CASE("schedule resolution") {
    auto c = parse_config({{"command", "estimate"},
                           {"kernel", "rational-quadratic:3"},
                           {"event", "full:1,4"},
                           {"geometry", {{"h", 1.0 / 256}}},
                           {"model", {{"N", 16}, {"eta", 0.5}}}});
    auto r = resolve_schedule(c);
    CHECK(r.fine.sprinkle == doctest::Approx(0.25));
    CHECK(r.fine.epsilon_requested == doctest::Approx(1.0 / 256));
    CHECK(r.fine.epsilon == doctest::Approx(1.0 / 256));
    CHECK(r.fine.delta == std::exp(-std::pow(16.0, 3.0)));
    CHECK(r.eta_source == "given");
    CHECK(r.coarse.range == 32.0);

    c.eta.reset();
    c.schedule = "polynomial";
    r = resolve_schedule(c);
    CHECK(*r.eta == 0.5);
    CHECK(r.eta_source == "defaulted");
    CHECK(r.to_json()["eta_source"] == "defaulted");

    auto bf = parse_config({{"command", "estimate"},
                            {"event", "full:1,4"},
                            {"model", {{"N", 4}, {"schedule", "bargmann-fock"}, {"bf_c", 1.0}}}});
    r = resolve_schedule(bf);
    CHECK(*r.gamma == 3.0);
    CHECK(r.fine.sprinkle == doctest::Approx(std::pow(4.0, 1.5) * std::exp(-8.0)));
    CHECK(r.fine.epsilon == 0.25);  // e^{-8} snapped to h
    CHECK(r.fine.epsilon_requested == doctest::Approx(std::exp(-8.0)));

    c.kernel = "bargmann-fock";
    c.eta = 0.5;
    CHECK_THROWS_AS(resolve_schedule(c), Error);
}

TEST_CASE("runs are byte-reproducible") {
    const fs::path base = fs::temp_directory_path() / "gplab_cli_test";
    fs::remove_all(base);
    auto c = parse_config({{"command", "estimate"},
                           {"event", "cross:2"},
                           {"model", {{"levels", {-0.2, 0.0, 1e9}}}},
                           {"replicas", 100},
                           {"seed", 12}});
    std::ostringstream log;
    for (const char* d : {"a", "b"}) {
        c.out = (base / d).string();
        c.threads = d[0] == 'a' ? 1 : 3;
        run(c, log);
    }
    for (const char* f : {"results.jsonl", "estimates.csv", "config.json"}) {
        const auto a = slurp(base / "a" / f);
        CHECK_FALSE(a.empty());
        CHECK(a == slurp(base / "b" / f));
    }
    // The echoed config reproduces the run.
    const auto echoed = json::parse(slurp(base / "a" / "config.json"));
    auto again = parse_config(echoed);
    again.out = (base / "c").string();
    run(again, log);
    CHECK(slurp(base / "a" / "results.jsonl") == slurp(base / "c" / "results.jsonl"));
    std::ifstream in(base / "a" / "results.jsonl");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(json::parse(first)["estimate"] == 0.0 + json::parse(first)["hits"].get<double>() / 100);
    fs::remove_all(base);
}

TEST_CASE("exit codes") {
    CHECK(exit_code(ErrorKind::ConfigInvalid) == 2);
    CHECK(exit_code(ErrorKind::InsufficientHits) == 4);
    CHECK(exit_code(ErrorKind::WindowTooLarge) == 3);
    const auto rec = json::parse(error_record(Error(ErrorKind::ConfigInvalid, "bad", "event.R")));
    CHECK(rec["field"] == "event.R");
    CHECK(rec["exit_code"] == 2);
}
