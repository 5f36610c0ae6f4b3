#include "dastm/cli/artifacts.hpp"
#include "dastm/cli/commands.hpp"
#include "dastm/cli/config.hpp"
#include "dastm/core/io.hpp"
#include "dastm/error.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace dastm;
using namespace dastm::cli;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Four vehicles on 150 channels; every stage finishes in well under a second.
const char* kSmallConfig = R"({
  "seed": 5,
  "simulate": {"fiber": {"channel_count": 150},
               "traffic": {"vehicle_count": 4, "last_entry_s": 25.0},
               "driving_test": {"runs": 2}}
})";

int tool(const std::string& args) {
    const std::string cmd = std::string("\"") + DASTM_TOOL_PATH + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

template <class F>
int code_of(F&& f) {
    try {
        f();
    } catch (...) {
        return exit_code_for(std::current_exception());
    }
    return 0;
}

} // namespace

TEST_CASE("config sections reject unknown keys and wrong types by path") {
    const Json j = Json::parse(R"({"tracker": {"gate_sigmas": 2.5, "stitch_tolerance_s": 0.0, "gate_sigma": 1},
                                   "detector": {"r0": "high"}, "list": [1, -2]})");
    Section root(j, "track");
    auto tracker_section = root.child("tracker");
    CHECK_THROWS_WITH_AS((void)parse_tracker(tracker_section), doctest::Contains("track.tracker.gate_sigma"), ConfigError);

    const Json ok = Json::parse(R"({"gate_sigmas": 2.5, "stitch_tolerance_s": 0.0, "baseline": true})");
    const auto t = parse_tracker(Section(ok, "tracker"));
    CHECK(t.gate_sigmas == 2.5);
    CHECK(t.stitch_tolerance_s == 0.0);
    CHECK(t.baseline);

    CHECK_THROWS_WITH_AS((void)parse_detector(root.child("detector")), doctest::Contains("track.detector.r0"), ConfigError);
    std::vector<std::size_t> counts;
    CHECK_THROWS_AS(root.read("list", counts), ConfigError);
    CHECK_THROWS_AS(Section(Json::parse("[1]"), "x"), ConfigError);

    const Json bad_values = Json::parse(R"({"gate_sigmas": -1})");
    CHECK_THROWS_AS((void)parse_tracker(Section(bad_values, "tracker")), ConfigError);
}

TEST_CASE("config files: missing, malformed and non-object inputs are config errors") {
    const auto dir = test::scratch_dir("cli_json");
    CHECK_THROWS_AS((void)load_json(dir / "absent.json"), ConfigError);
    write_text(dir / "broken.json", "{\"seed\": ");
    CHECK_THROWS_AS((void)load_json(dir / "broken.json"), ConfigError);
    write_text(dir / "array.json", "[1, 2]");
    CHECK_THROWS_AS((void)load_json(dir / "array.json"), ConfigError);
    write_text(dir / "fine.json", "{\"seed\": 3}");
    CHECK(load_json(dir / "fine.json")["seed"] == 3);
}

TEST_CASE("centerline and evaluation sections") {
    const Json straight = Json::parse(R"({"origin": [37.0, -121.0], "bearing_deg": 90, "length_m": 500})");
    const auto c = parse_centerline(Section(straight, "centerline"));
    CHECK(c.length_m() == doctest::Approx(500.0).epsilon(1e-6));
    const Json bad = Json::parse(R"({"vertices": [[37.0, -121.0]]})");
    CHECK_THROWS_AS((void)parse_centerline(Section(bad, "centerline")), ConfigError);

    const Json ev = Json::parse(R"({"decimation": [1, 3], "scenarios": ["spacing"], "channel_count": 100})");
    const auto e = parse_eval(Section(ev, "eval"));
    CHECK(eval::expand_scenarios(e) == std::vector<std::string>{"spacing_1m", "spacing_3m"});
    const Json ev_bad = Json::parse(R"({"decimation": [0]})");
    CHECK_THROWS_AS(parse_eval(Section(ev_bad, "eval")).validate(), ConfigError);
}

TEST_CASE("error classes map to exit codes") {
    CHECK(code_of([] {}) == 0);
    CHECK(code_of([] { throw ConfigError("x"); }) == 2);
    CHECK(code_of([] { throw DataError("x"); }) == 3);
    CHECK(code_of([] { throw PreconditionError("x"); }) == 3);
    CHECK(code_of([] { throw std::runtime_error("x"); }) == 1);
    CHECK(code_of([] { (void)run_command("teleport", {}); }) == 2);
    CHECK(command_names() ==
          std::vector<std::string>{"simulate", "calibrate", "detect", "track", "characterize", "eval"});
}

TEST_CASE("pipeline stages chain through one directory and recover the simulated vehicles") {
    const auto dir = test::scratch_dir("cli_pipeline");
    write_text(dir / "config.json", kSmallConfig);
    CommandOptions o;
    o.config = dir / "config.json";
    o.out = dir / "out";
    for (const auto& name : {"simulate", "calibrate", "detect", "track", "characterize"}) {
        CAPTURE(name);
        const auto outputs = run_command(name, o);
        CHECK_FALSE(outputs.empty());
        for (const auto& p : outputs) CHECK(fs::exists(p));
    }

    const auto truth = read_vehicle_truth(o.out / "truth_vehicles.csv");
    const auto table = io::read_table(o.out / "vehicles.csv");
    REQUIRE(truth.size() == 4);
    const auto col = [&](const std::string& name) {
        const auto it = std::find(table.header.begin(), table.header.end(), name);
        REQUIRE(it != table.header.end());
        return static_cast<std::size_t>(it - table.header.begin());
    };
    const auto dir_col = col("direction");
    const auto weight_col = col("weight_tons");
    // every vehicle is matched by a track in its direction with a weight within 12%
    for (const auto& v : truth) {
        CAPTURE(v.id);
        bool found = false;
        for (const auto& row : table.rows) {
            const double w = io::parse_number(row[weight_col]);
            if (row[dir_col] == to_string(v.direction) && std::abs(w - v.spec.weight_tons) <= 0.12 * v.spec.weight_tons) {
                found = true;
            }
        }
        CHECK(found);
    }

    // same seed, same bytes; a different seed changes the record
    CommandOptions again = o;
    again.out = dir / "again";
    (void)run_simulate(again);
    CHECK(slurp(o.out / "das.bin") == slurp(again.out / "das.bin"));
    again.seed = 6;
    again.out = dir / "reseeded";
    (void)run_simulate(again);
    CHECK(slurp(o.out / "das.bin") != slurp(again.out / "das.bin"));
}

TEST_CASE("installed tool exit codes") {
    const auto dir = test::scratch_dir("cli_tool");
    write_text(dir / "config.json", kSmallConfig);
    const auto cfg = (dir / "config.json").string();
    const auto out = (dir / "out").string();
    CHECK(tool("simulate --config " + cfg + " --out " + out) == 0);
    CHECK(tool("calibrate --config " + cfg + " --out " + out) == 0);

    write_text(dir / "typo.json", R"({"detect": {"detector": {"r00": 3}}})");
    CHECK(tool("detect --config " + (dir / "typo.json").string() + " --out " + out) == 2);
    write_text(dir / "type.json", R"({"detect": {"detector": {"r0": "x"}}})");
    CHECK(tool("detect --config " + (dir / "type.json").string() + " --out " + out) == 2);
    CHECK(tool("detect --bogus-flag") == 2);
    CHECK(tool("") == 2);

    // truncated record with intact metadata is a data error
    fs::resize_file(dir / "out" / "das.bin", 100);
    CHECK(tool("detect --out " + out) == 3);
}

TEST_SUITE_END();
