#include <doctest.h>

#include <filesystem>

#include "common/binio.hpp"
#include "common/error.hpp"
#include "data/dataset.hpp"

using namespace bplab;
using namespace bplab::data;
using namespace bplab::sim;

namespace {

GenParams test_params() {
    GenParams p;
    p.min_size = 12;
    p.max_size = 16;
    p.max_rooms = 4;
    return p;
}

std::string temp_dir(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / "bplab_tests" / name;
    std::filesystem::remove_all(dir);
    return dir.string();
}

} // namespace

TEST_CASE("dataset round-trips bit-exactly") {
    for (Task task : {Task::Explore, Task::ObjectNav, Task::LeaveReturn}) {
        Dataset ds = build_dataset(task, 4, 3, 99, test_params(), 1234);
        CHECK(ds.episodes.size() == 12);
        CHECK(ds.manifest.episode_count == 12);
        CHECK(ds.manifest.house_seeds.size() == 4);

        std::string dir = temp_dir(task_name(task));
        write_dataset(ds, dir);
        Dataset back = read_dataset(dir);
        CHECK(back.manifest == ds.manifest);
        CHECK(back.episodes == ds.episodes);

        // writing twice produces byte-identical files
        std::string dir2 = dir + "_again";
        write_dataset(ds, dir2);
        CHECK(read_file(dir + "/episodes.bplb") == read_file(dir2 + "/episodes.bplb"));
        CHECK(read_file(dir + "/manifest.json") == read_file(dir2 + "/manifest.json"));
    }
}

TEST_CASE("build_dataset is independent of worker count") {
    setenv("BPLB_THREADS", "1", 1);
    Dataset a = build_dataset(Task::Explore, 3, 2, 5, test_params(), 0);
    setenv("BPLB_THREADS", "4", 1);
    Dataset b = build_dataset(Task::Explore, 3, 2, 5, test_params(), 0);
    unsetenv("BPLB_THREADS");
    CHECK(a.episodes == b.episodes);
}

TEST_CASE("empty episode list round-trips") {
    Dataset ds;
    ds.manifest.task = Task::Explore;
    ds.manifest.seed = 1;
    ds.manifest.house_seeds = {11, 22};
    ds.manifest.episode_count = 0;
    std::string dir = temp_dir("empty");
    write_dataset(ds, dir);
    Dataset back = read_dataset(dir);
    CHECK(back.episodes.empty());
    CHECK(back.manifest == ds.manifest);
}

TEST_CASE("corruption and version mismatch are detected") {
    Dataset ds = build_dataset(Task::ObjectNav, 2, 2, 7, test_params(), 0);
    std::string dir = temp_dir("corrupt");
    write_dataset(ds, dir);
    const std::string epath = dir + "/episodes.bplb";
    std::vector<uint8_t> good = read_file(epath);

    SUBCASE("truncated file") {
        std::vector<uint8_t> bad(good.begin(), good.end() - 7);
        write_file(epath, bad);
        CHECK_THROWS_WITH_AS(read_dataset(dir), doctest::Contains("truncated"), Error);
    }
    SUBCASE("flipped payload byte breaks the CRC") {
        std::vector<uint8_t> bad = good;
        bad[10] ^= 0x40; // inside the first record payload
        write_file(epath, bad);
        try {
            read_dataset(dir);
            FAIL("expected CorruptRecord");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::CorruptRecord);
        }
    }
    SUBCASE("wrong version") {
        std::vector<uint8_t> bad = good;
        bad[4] = 0xEE;
        write_file(epath, bad);
        try {
            read_dataset(dir);
            FAIL("expected VersionMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::VersionMismatch);
        }
    }
    SUBCASE("bad magic") {
        std::vector<uint8_t> bad = good;
        bad[0] = 'X';
        write_file(epath, bad);
        CHECK_THROWS_AS(read_dataset(dir), Error);
    }
}

TEST_CASE("replay regenerates observations deterministically") {
    Dataset ds = build_dataset(Task::LeaveReturn, 2, 2, 31, test_params(), 0);
    const Episode& ep = ds.episodes[0];
    auto steps1 = replay_episode(ep, ds.manifest.gen_params);
    auto steps2 = replay_episode(ep, ds.manifest.gen_params);
    CHECK(steps1.size() == ep.actions.size());
    REQUIRE(steps1.size() == steps2.size());
    for (size_t i = 0; i < steps1.size(); ++i) {
        CHECK(steps1[i].obs == steps2[i].obs);
        CHECK(steps1[i].action == ep.actions[i]);
    }
}

TEST_CASE("tampered action is caught by replay") {
    Dataset ds = build_dataset(Task::Explore, 1, 1, 13, test_params(), 0);
    Episode ep = ds.episodes[0];
    REQUIRE(ep.length() > 3);
    // Find a MoveAhead and reverse it into a blocked situation by flipping it
    // to MoveBack; either the flags diverge or the walk differs. Flip every
    // movement action to maximize the chance of divergence.
    bool flipped = false;
    for (Action& a : ep.actions) {
        if (a == Action::MoveAhead) {
            a = Action::MoveBack;
            flipped = true;
        }
    }
    REQUIRE(flipped);
    bool diverged = false;
    try {
        auto steps = replay_episode(ep, ds.manifest.gen_params);
        (void)steps;
    } catch (const Error& e) {
        diverged = e.code() == ErrorCode::ReplayDivergence;
    }
    CHECK(diverged);
}

TEST_CASE("house split is disjoint and episode-complete") {
    Dataset ds = build_dataset(Task::Explore, 10, 3, 77, test_params(), 0);
    for (double frac : {0.1, 0.25, 0.5}) {
        HouseSplit split = split_train_val(ds.manifest, frac);
        CHECK(split.train_houses.size() + split.val_houses.size() ==
              ds.manifest.house_seeds.size());
        for (uint64_t v : split.val_houses)
            for (uint64_t t : split.train_houses) CHECK(v != t);

        HouseSplit again = split_train_val(ds.manifest, frac);
        CHECK(again.train_houses == split.train_houses);
        CHECK(again.val_houses == split.val_houses);

        std::vector<int> train_ids, val_ids;
        episode_split(ds, split, train_ids, val_ids);
        CHECK(train_ids.size() + val_ids.size() == ds.episodes.size());
        // all episodes of one house land on one side
        for (int i : train_ids)
            for (uint64_t v : split.val_houses) CHECK(ds.episodes[i].house_seed != v);
    }
    HouseSplit tenth = split_train_val(ds.manifest, 0.1);
    CHECK(tenth.val_houses.size() == 1);

    CHECK_THROWS_AS(split_train_val(ds.manifest, 0.0), Error);
    CHECK_THROWS_AS(split_train_val(ds.manifest, 1.0), Error);
}

TEST_CASE("validation rejects malformed episodes") {
    Dataset ds = build_dataset(Task::ObjectNav, 1, 1, 3, test_params(), 0);
    std::string dir = temp_dir("invalid");

    Dataset bad = ds;
    bad.episodes[0].actions.back() = Action::MoveAhead;
    CHECK_THROWS_AS(write_dataset(bad, dir), Error);

    bad = ds;
    bad.episodes[0].actions.insert(bad.episodes[0].actions.begin(), Action::Subdone);
    bad.episodes[0].success_flags.insert(bad.episodes[0].success_flags.begin(), 1);
    CHECK_THROWS_AS(write_dataset(bad, dir), Error);

    bad = ds;
    bad.manifest.episode_count = 5;
    CHECK_THROWS_AS(write_dataset(bad, dir), Error);
}
