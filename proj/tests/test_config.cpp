#include <doctest.h>

#include <filesystem>

#include "dncnn/config.hpp"
#include "dncnn/error.hpp"

using namespace dncnn;

TEST_CASE("an empty file gives the documented defaults") {
    const RunConfig c = parse_config_text("");
    CHECK(c.model.depth == 17);
    CHECK(c.model.hidden_channels == 64);
    CHECK(c.train.epochs == 50);
    CHECK(c.train.batch_size == 128);
    CHECK(c.train.lr_start == 0.1);
    CHECK(c.train.lr_end == 1e-4);
    CHECK(c.train.momentum == 0.9);
    CHECK(c.train.weight_decay == 1e-4);
    CHECK(c.mode == TaskMode::S);
    CHECK(c.sigma == 25.0);
    CHECK(c.bn_gamma == 1.0);
    CHECK_THROWS_AS(require_key(c, "sources"), ConfigError);
}

TEST_CASE("keys, comments and overrides") {
    RunConfig c = parse_config_text(
        "# comment line\n"
        "depth = 9   # trailing comment\n"
        "sources=a.pgm, dir/\n"
        "optimizer=adam\n"
        "val_degrade=jpeg:10\n"
        "mode=B\n");
    CHECK(c.model.depth == 9);
    CHECK(c.sources == std::vector<std::string>{"a.pgm", "dir/"});
    CHECK(c.train.optimizer == OptimizerKind::adam);
    CHECK(format_spec(c.val_degrade) == "jpeg:10");
    CHECK(c.mode == TaskMode::B);
    CHECK(c.warnings.empty());
    CHECK_NOTHROW(require_key(c, "sources"));
    c.set("epochs", "3");
    CHECK(c.train.epochs == 3);
    CHECK_THROWS_AS(c.set("nonsense", "1"), ConfigError);
}

TEST_CASE("duplicate keys: last one wins, with a warning") {
    const RunConfig c = parse_config_text("epochs=5\nepochs=7\n");
    CHECK(c.train.epochs == 7);
    REQUIRE(c.warnings.size() == 1);
    CHECK(c.warnings[0].find("line 2") != std::string::npos);
}

TEST_CASE("bad input names the line") {
    auto line_of = [](const std::string& text) {
        try {
            parse_config_text(text);
        } catch (const ConfigError& e) {
            return e.line();
        }
        return std::size_t(0);
    };
    CHECK(line_of("depth=17\nbogus=1\n") == 2);
    CHECK(line_of("\n\ndepth=1\n") == 3);
    CHECK(line_of("epochs=ten\n") == 1);
    CHECK(line_of("val_degrade=blur:3\n") == 1);
    CHECK(line_of("just words\n") == 1);
    CHECK(line_of("depth=5\nbn_gamma=0\n") == 2);
    CHECK_THROWS_AS(parse_config_text("depth=1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("batch=1\n"), ConfigError);
    CHECK_NOTHROW(parse_config_text("batch=1\nbn=false\n"));
}

TEST_CASE("the echo parses back to the same configuration") {
    const RunConfig c = parse_config_text("depth=5\nsources=x.pgm\nval_degrade=bicubic:3\n");
    const RunConfig back = parse_config_text(c.echo());
    CHECK(back.values == c.values);
    CHECK(back.echo() == c.echo());
}

TEST_CASE("shipped presets carry the published hyperparameters") {
    const std::string dir = std::string(DNCNN_TEST_DATA) + "/../../configs/";
    struct Want {
        const char* file;
        int depth;
        std::size_t patch;
        std::size_t count;
        TaskMode mode;
    };
    for (const Want& w : {Want{"dncnn-s-25.cfg", 17, 40, 204800, TaskMode::S},
                          Want{"dncnn-b.cfg", 20, 50, 384000, TaskMode::B},
                          Want{"dncnn-3.cfg", 20, 50, 1024000, TaskMode::Three}}) {
        CAPTURE(w.file);
        const RunConfig c = parse_config(dir + w.file);
        CHECK(c.model.depth == w.depth);
        CHECK(c.mode == w.mode);
        const DatasetOptions o = c.dataset_options();
        CHECK((o.patch ? o.patch : default_patch_size(o.mode)) == w.patch);
        CHECK(resolved_patch_count(o) == w.count);
        CHECK(c.train.batch_size == 128);
        CHECK(c.train.epochs == 50);
        CHECK(c.train.lr_start == 0.1);
        CHECK(c.train.lr_end == 1e-4);
        CHECK(c.train.optimizer == OptimizerKind::sgd);
        CHECK(c.train.momentum == 0.9);
        CHECK(c.train.weight_decay == 1e-4);
        CHECK_NOTHROW(c.model.validate());
        CHECK_NOTHROW(c.train.validate(c.model.use_bn));
    }
}
