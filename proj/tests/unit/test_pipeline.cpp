#include <doctest.h>

#include <filesystem>

#include "descreg/error.hpp"
#include "descreg/pipeline.hpp"
#include "descreg/textio.hpp"

using namespace descreg;
namespace fs = std::filesystem;

namespace {

RunConfig quick() {
    auto c = parse_config(
        "sim.regions_per_class = 40\nsim.images = 80\nepochs = 3\nreproduce.seeds = 2\n"
        "reproduce.modes = off, diagonal, direct_l2, adaptive\n");
    return c;
}

}  // namespace

TEST_CASE("comparison table has one row per mode") {
    const fs::path dir = fs::temp_directory_path() / "descreg-pipeline-test";
    fs::remove_all(dir);
    std::vector<std::string> progress;
    const auto result = reproduce(quick(), dir.string(), [&](const std::string& m) { progress.push_back(m); });
    CHECK(result.runs.size() == 8);
    REQUIRE(result.summary.size() == 4);
    CHECK(result.summary[0].variant == "off");
    CHECK(result.summary[3].variant == "adaptive");
    for (const auto& s : result.summary) CHECK(s.runs == 2);
    CHECK_FALSE(progress.empty());

    const std::string table = textio::read_file((dir / "comparison.txt").string());
    std::size_t lines = 0;
    for (char ch : table) lines += ch == '\n';
    CHECK(lines == 5);
    CHECK(table.rfind("variant", 0) == 0);
    CHECK(fs::exists(dir / "runs.csv"));
    CHECK(fs::exists(dir / "history" / "adaptive-seed1.csv"));

    // The saved config alone regenerates the same numbers.
    const auto again = reproduce(load_config((dir / "config.txt").string()), "");
    CHECK(format_comparison_csv(again.summary) == textio::read_file((dir / "comparison.csv").string()));

    const auto checks = check_reproduction(result, quick());
    CHECK(checks.size() == 4);
    fs::remove_all(dir);
}

TEST_CASE("summary means") {
    RunResult a, b;
    a.variant = b.variant = "x";
    a.zsd.unseen.map = 0.2;
    b.zsd.unseen.map = 0.4;
    a.unseen_accuracy = 1.0;
    const auto s = summarize({a, b}, {"x", "y"});
    REQUIRE(s.size() == 2);
    CHECK(s[0].zsd_map == doctest::Approx(0.3));
    CHECK(s[0].unseen_accuracy == 0.5);
    CHECK(s[1].runs == 0);
}

TEST_CASE("checks compare against each baseline") {
    ReproduceResult r;
    r.summary = {{"off", 1, 0.1, 0, 0, 0.05, 0, 0, 0}, {"adaptive", 1, 0.3, 0, 0, 0.055, 0, 0, 0}};
    RunConfig c;
    const auto checks = check_reproduction(r, c);
    REQUIRE(checks.size() == 2);
    CHECK(checks[0].pass);
    CHECK_FALSE(checks[1].pass);
}

TEST_CASE("partial data paths are a configuration error") {
    auto c = quick();
    c.data.catalog_dir = "/nonexistent";
    CHECK_THROWS_AS(prepare_dataset(c), ConfigError);
    c.data.train_regions = c.data.test_regions = c.data.test_gt = "/nonexistent/x";
    CHECK_THROWS_AS(prepare_dataset(c), StageError);
}
