#include <doctest.h>

#include <algorithm>
#include <string>

#include "descreg/catalog.hpp"
#include "descreg/error.hpp"

using namespace descreg;

namespace {

std::size_t error_line(const std::string& text) {
    try {
        parse_embedding_text(text);
    } catch (const FormatError& e) {
        return e.line();
    }
    return 0;
}

EmbeddingSet three_classes() {
    return parse_embedding_text(
        "descreg-embeddings v1\ndim 2\nharbor\t1 0\nship\t0.5 0.5\nairport\t0 1\n");
}

}  // namespace

TEST_CASE("single-row embedding file") {
    const auto set = parse_embedding_text("descreg-embeddings v1\ndim 2\nship\t1.0 0.0\n");
    CHECK(set.dim == 2);
    REQUIRE(set.size() == 1);
    CHECK(set.names[0] == "ship");
    CHECK(set.vectors(0, 0) == 1.0);
    CHECK(set.vectors(0, 1) == 0.0);
}

TEST_CASE("embedding parse errors carry the line") {
    CHECK(error_line("descreg-embeddings v1\ndim 2\nship\t1 2 3\n") == 3);
    CHECK(error_line("descreg-embeddings v1\ndim 2\nship\t1 0\nship\t0 1\n") == 4);
    CHECK(error_line("descreg-embeddings v1\ndim 2\nship\t1 zero\n") == 3);
    CHECK(error_line("descreg-embeddings v2\ndim 2\n") == 1);
    CHECK(error_line("descreg-embeddings v1\ndim x\n") == 2);
    CHECK(error_line("descreg-embeddings v1\ndim 2\nship 1 0\n") == 3);
}

TEST_CASE("embedding file round-trip is byte-identical") {
    const std::string text = "descreg-embeddings v1\ndim 3\nstorage tank\t0.25 -1 3e-05\nship\t1 0 0\n";
    CHECK(format_embedding_file(parse_embedding_text(text)) == text);
    const auto set = three_classes();
    CHECK(format_embedding_file(parse_embedding_text(format_embedding_file(set))) == format_embedding_file(set));
}

TEST_CASE("split file parse and round-trip") {
    const std::string text = "descreg-split v1\nseen harbor\nseen ship\nunseen airport\n";
    const auto split = parse_split_text(text);
    CHECK(split.seen.size() == 2);
    CHECK(split.unseen == std::vector<std::string>{"airport"});
    CHECK(format_split_file(split) == text);
    CHECK_THROWS_AS(parse_split_text("descreg-split v1\nseen a\nunseen a\n"), FormatError);
    CHECK_THROWS_AS(parse_split_text("descreg-split v1\nmaybe a\n"), FormatError);
}

TEST_CASE("catalog puts seen classes first") {
    const auto emb = three_classes();
    const auto split = parse_split_text("descreg-split v1\nunseen harbor\nseen airport\nseen ship\n");
    const auto cat = build_catalog(emb, emb, split);
    REQUIRE(cat.size() == 3);
    CHECK(cat.names() == std::vector<std::string>{"airport", "ship", "harbor"});
    for (std::size_t i = 0; i < cat.size(); ++i) {
        const bool listed_seen =
            std::find(split.seen.begin(), split.seen.end(), cat.names()[i]) != split.seen.end();
        CHECK(cat.is_seen(i) == listed_seen);
        CHECK(cat.descriptions.names[i] == cat.names()[i]);
    }
    CHECK(cat.semantic.vectors.row(2) == emb.vectors.row(0));
}

TEST_CASE("missing split class is named") {
    const auto emb = parse_embedding_text("descreg-embeddings v1\ndim 2\nship\t1 0\nairport\t0 1\n");
    const auto split = parse_split_text("descreg-split v1\nseen ship\nseen harbor\nunseen airport\n");
    try {
        build_catalog(emb, emb, split);
        FAIL("expected an error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("harbor") != std::string::npos);
    }
}

TEST_CASE("extra embedding rows are dropped with a warning") {
    const auto emb = parse_embedding_text(
        "descreg-embeddings v1\ndim 2\nship\t1 0\nrunway\t1 1\nairport\t0 1\n");
    const auto split = parse_split_text("descreg-split v1\nseen ship\nunseen airport\n");
    std::vector<std::string> warnings;
    const auto cat = build_catalog(emb, emb, split, &warnings);
    CHECK(cat.size() == 2);
    CHECK_FALSE(cat.index_of("runway"));
    REQUIRE_FALSE(warnings.empty());
    CHECK(warnings[0].find("runway") != std::string::npos);
}

TEST_CASE("DIOR split fixture builds a 20-class catalog") {
    const auto split = load_split_file(std::string(DESCREG_DATA_DIR) + "/splits/dior.split");
    const auto emb = load_embedding_file(std::string(DESCREG_DATA_DIR) + "/fixtures/dior_semantic.emb");
    const auto cat = build_catalog(emb, emb, split);
    CHECK(cat.size() == 20);
    CHECK(cat.n_seen() == 16);
    CHECK(split.unseen == std::vector<std::string>{"airport", "basketballcourt", "groundtrackfield", "windmill"});
    CHECK(cat.index_of("airport").value() >= 16);

    const auto dota = load_split_file(std::string(DESCREG_DATA_DIR) + "/splits/dota.split");
    CHECK(dota.seen.size() == 11);
    CHECK(dota.unseen.size() == 4);
    const auto xview = load_split_file(std::string(DESCREG_DATA_DIR) + "/splits/xview.split");
    CHECK(xview.seen.size() == 48);
    CHECK(xview.unseen.size() == 12);
}
