#include <doctest.h>

#include <cstdio>

#include "lrmpc/container.hpp"
#include "lrmpc/prng.hpp"

using namespace lrmpc;

TEST_CASE("container round trips payloads bit-exactly") {
    Ring rg(64);
    Prf prf(make_master_seed(9), 0);
    Container c;
    c.put("w/a", prf.tensor({3, 5}, rg));
    c.put("w/b", RealTensor({2, 2}, {1.5, -2.25, 0.0, 1e-300}));
    c.meta()["scheme"] = "additive";
    c.meta()["party"] = 2;

    auto bytes = c.serialize();
    Container d = Container::deserialize(bytes);
    CHECK(d.ring("w/a").data == c.ring("w/a").data);
    CHECK(d.ring("w/a").shape == c.ring("w/a").shape);
    CHECK(d.real("w/b").data == c.real("w/b").data);
    CHECK(d.meta().at("party") == 2);

    // deterministic writer: a second serialize of the parsed container is identical
    CHECK(d.serialize() == bytes);
}

TEST_CASE("container magic and errors") {
    std::vector<u8> junk{'n', 'o', 'p', 'e', 0, 0, 0, 0};
    CHECK_THROWS(Container::deserialize(junk));

    Container c;
    CHECK_THROWS_AS(c.put("__meta__", RingTensor({1})), std::invalid_argument);
    c.put("t", RingTensor({1}, {7}));
    CHECK_THROWS_AS(c.real("t"), std::runtime_error);
    CHECK_THROWS_AS(c.ring("missing"), std::out_of_range);
}

TEST_CASE("container file io") {
    std::string path = "container_io_test.lrmt";
    Container c;
    c.put("x", RingTensor({2}, {1, 2}));
    c.save(path);
    Container d = Container::load(path);
    CHECK(d.ring("x").data == std::vector<u64>{1, 2});
    std::remove(path.c_str());
}
