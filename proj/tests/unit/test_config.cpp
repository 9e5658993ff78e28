#include <doctest.h>

#include <set>

#include "descreg/config.hpp"
#include "descreg/error.hpp"

using namespace descreg;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("empty file keeps the defaults") {
    const auto c = parse_config("");
    CHECK(c.train.reg.mode == RegMode::Adaptive);
    CHECK(c.train.reg.tau == 0.03);
    CHECK(c.train.reg.fixed_margin == 0.2);
    CHECK(c.train.lr == 0.02);
    CHECK(c.train.momentum == 0.9);
    CHECK(c.train.weight_decay == 1e-4);
    CHECK(c.train.epochs == 12);
    CHECK(c.train.batch == 128);
    CHECK(c.train.depth == 1);
    CHECK(c.train.hidden == 128);
    CHECK(c.train.score_scale == 20.0);
    CHECK(c.sim.n_seen == 16);
    CHECK(c.sim.n_unseen == 4);
    CHECK(c.sim.feature_dim == 64);
    CHECK(c.sim.regions_per_class == 200);
    CHECK(c.synth.noise_dim == 16);
    CHECK(c.synth_classifier.samples_per_class == 200);
    CHECK(c.reproduce.seeds == 5);
    CHECK_FALSE(c.data.complete());
}

TEST_CASE("assignments and comments") {
    const auto c = parse_config("# baseline\nreg.mode = diagonal\nseed = 9  # run seed\nreg.lambda=0.5\n\nhead.depth = 2\n");
    CHECK(c.train.reg.mode == RegMode::Diagonal);
    CHECK(c.train.seed == 9);
    CHECK(c.sim.seed == 9);
    CHECK(c.synth.seed == 9);
    CHECK(c.synth_classifier.seed == 9);
    CHECK(c.train.reg.lambda == 0.5);
    CHECK(c.train.depth == 2);
    CHECK(c.synth.reg.mode == RegMode::Diagonal);
}

TEST_CASE("errors name the line") {
    const std::string bad = error_of("lr = fast\n");
    CHECK(bad.find("line 1") != std::string::npos);
    CHECK(bad.find("lr") != std::string::npos);
    CHECK(error_of("\n\nbogus.key = 1\n").find("line 3") != std::string::npos);
    CHECK(error_of("reg.mode = sideways\n").find("line 1") != std::string::npos);
    CHECK(error_of("epochs = -1\n").find("line 1") != std::string::npos);
    CHECK(error_of("lr = 0.1\nlr = 0.2\n").find("line 2") != std::string::npos);
    CHECK(error_of("just words\n").find("line 1") != std::string::npos);
    CHECK_FALSE(error_of("reproduce.modes = off, adaptive\n").size());
    CHECK_FALSE(error_of("reproduce.modes =\n").empty());
}

TEST_CASE("format and parse round-trip") {
    auto c = parse_config("reg.mode = fixed\nreg.tau = 0.05\nreproduce.modes = off,adaptive\nsim.noise_sigma = 0.25\n"
                          "reg.sampling = proportional\ndata.catalog_dir = /tmp/x y\nsynth.lambda = 0\n");
    const std::string text = format_config(c);
    CHECK(format_config(parse_config(text)) == text);
    const auto back = parse_config(text);
    CHECK(back.train.reg.mode == RegMode::Fixed);
    CHECK(back.reproduce.modes == std::vector<RegMode>{RegMode::Off, RegMode::Adaptive});
    CHECK(back.train.reg.sampling == SamplingMode::Proportional);
    CHECK(back.data.catalog_dir == "/tmp/x y");
    CHECK(back.synth.reg.lambda == 0.0);
    CHECK(back.synth.reg.tau == 0.05);
}

TEST_CASE("every documented key is accepted") {
    std::set<std::string> names;
    for (const auto& k : config_keys()) {
        CHECK_FALSE(k.help.empty());
        CHECK(names.insert(k.key).second);
    }
    const std::string text = format_config(RunConfig{});
    for (const auto& k : config_keys()) CHECK(text.find("\n" + k.key + " = ") != std::string::npos);
    for (const char* key : {"lr", "momentum", "weight_decay", "epochs", "batch", "seed", "head.depth", "head.hidden",
                            "score_scale", "reg.mode", "reg.tau", "reg.fixed_margin", "reg.pos_pool", "reg.neg_pool",
                            "reg.lambda", "reg.seed"}) {
        CHECK(names.count(key) == 1);
    }
}
