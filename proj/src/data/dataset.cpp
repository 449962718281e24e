#include "data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "common/binio.hpp"
#include "common/error.hpp"
#include "common/parallel.hpp"

namespace bplab::data {

using nlohmann::json;
using namespace bplab::sim;

namespace {

const char kMagic[4] = {'B', 'P', 'L', 'B'};

Task task_from_name(const std::string& s) {
    if (s == "explore") return Task::Explore;
    if (s == "objectnav") return Task::ObjectNav;
    if (s == "leavereturn") return Task::LeaveReturn;
    fail(ErrorCode::ValidationFailed, "unknown task tag: " + s);
}

void validate_episode(const Episode& ep) {
    check(!ep.actions.empty(), ErrorCode::ValidationFailed, "empty episode");
    check(ep.actions.back() == Action::Done, ErrorCode::ValidationFailed,
          "episode must end with Done");
    check(ep.actions.size() == ep.success_flags.size(), ErrorCode::ValidationFailed,
          "success flag count mismatch");
    if (ep.task != Task::Explore) {
        for (Action a : ep.actions)
            check(a != Action::Subdone, ErrorCode::ValidationFailed,
                  "Subdone in downstream episode");
    }
}

} // namespace

Dataset build_dataset(Task task, int n_houses, int episodes_per_house, uint64_t seed,
                      const GenParams& params, uint64_t encoder_seed) {
    check(n_houses > 0 && episodes_per_house > 0, ErrorCode::InvalidArgument,
          "need houses and episodes");
    Dataset ds;
    ds.manifest.task = task;
    ds.manifest.seed = seed;
    ds.manifest.gen_params = params;
    ds.manifest.encoder_seed = encoder_seed;
    ds.manifest.house_seeds.resize(n_houses);
    for (int i = 0; i < n_houses; ++i)
        ds.manifest.house_seeds[i] = Rng::stream(seed, "houseseed", i).next_u64();

    const int total = n_houses * episodes_per_house;
    ds.episodes.resize(total);
    parallel_for(n_houses, [&](int h) {
        House house = generate_house(ds.manifest.house_seeds[h], params);
        for (int e = 0; e < episodes_per_house; ++e) {
            uint64_t ep_seed = Rng::stream(seed, "episode", h, e).next_u64();
            Episode ep;
            switch (task) {
                case Task::Explore: ep = run_explore_expert(house, ep_seed); break;
                case Task::ObjectNav: ep = run_objectnav_expert(house, ep_seed); break;
                case Task::LeaveReturn: ep = run_leave_return_expert(house, ep_seed); break;
            }
            ds.episodes[h * episodes_per_house + e] = std::move(ep);
        }
    });
    ds.manifest.episode_count = static_cast<uint32_t>(total);
    return ds;
}

std::vector<uint8_t> serialize_episode(const Episode& ep) {
    ByteWriter w;
    w.u64(ep.house_seed);
    w.u8(static_cast<uint8_t>(ep.task));
    w.u32(static_cast<uint32_t>(ep.start.x));
    w.u32(static_cast<uint32_t>(ep.start.y));
    w.u8(static_cast<uint8_t>(ep.start.heading));
    w.u32(static_cast<uint32_t>(ep.actions.size()));
    for (Action a : ep.actions) w.u8(static_cast<uint8_t>(a));
    // success flags as a packed bitset
    const size_t n = ep.actions.size();
    for (size_t byte = 0; byte * 8 < n; ++byte) {
        uint8_t v = 0;
        for (size_t bit = 0; bit < 8 && byte * 8 + bit < n; ++bit)
            if (ep.success_flags[byte * 8 + bit]) v |= static_cast<uint8_t>(1u << bit);
        w.u8(v);
    }
    w.u32(static_cast<uint32_t>(ep.target_category));
    w.u32(static_cast<uint32_t>(ep.split_index));
    w.u32(static_cast<uint32_t>(ep.room_visit_order.size()));
    for (int r : ep.room_visit_order) w.u32(static_cast<uint32_t>(r));
    return w.data();
}

Episode deserialize_episode(const std::vector<uint8_t>& payload) {
    ByteReader r(payload);
    Episode ep;
    ep.house_seed = r.u64();
    ep.task = static_cast<Task>(r.u8());
    ep.start.x = static_cast<int>(r.u32());
    ep.start.y = static_cast<int>(r.u32());
    ep.start.heading = r.u8();
    const uint32_t n = r.u32();
    ep.actions.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        uint8_t a = r.u8();
        check(a < kActionCount, ErrorCode::CorruptRecord, "action id out of range");
        ep.actions[i] = static_cast<Action>(a);
    }
    ep.success_flags.resize(n);
    for (uint32_t byte = 0; byte * 8 < n; ++byte) {
        uint8_t v = r.u8();
        for (uint32_t bit = 0; bit < 8 && byte * 8 + bit < n; ++bit)
            ep.success_flags[byte * 8 + bit] = (v >> bit) & 1;
    }
    ep.target_category = static_cast<int>(r.u32());
    ep.split_index = static_cast<int>(r.u32());
    const uint32_t rooms = r.u32();
    check(rooms <= 4096, ErrorCode::CorruptRecord, "implausible room count");
    ep.room_visit_order.resize(rooms);
    for (uint32_t i = 0; i < rooms; ++i) ep.room_visit_order[i] = static_cast<int>(r.u32());
    check(r.remaining() == 0, ErrorCode::CorruptRecord, "trailing bytes in episode record");
    return ep;
}

std::string manifest_to_json(const DatasetManifest& m) {
    json j;
    j["format_version"] = m.format_version;
    j["task"] = task_name(m.task);
    j["seed"] = m.seed;
    j["episode_count"] = m.episode_count;
    j["house_count"] = m.house_seeds.size();
    j["house_seeds"] = m.house_seeds;
    j["val_house_fraction"] = m.val_house_fraction;
    j["encoder_seed"] = m.encoder_seed;
    const GenParams& p = m.gen_params;
    j["gen_params"] = {
        {"min_size", p.min_size},
        {"max_size", p.max_size},
        {"max_rooms", p.max_rooms},
        {"min_room", p.min_room},
        {"objects_per_room_min", p.objects_per_room_min},
        {"objects_per_room_max", p.objects_per_room_max},
        {"categories", p.categories},
        {"obs_window", p.obs_window},
        {"return_radius", p.return_radius},
    };
    return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::CorruptRecord, std::string("manifest parse: ") + e.what());
    }
    DatasetManifest m;
    m.format_version = j.at("format_version").get<uint16_t>();
    check(m.format_version == kFormatVersion, ErrorCode::VersionMismatch,
          "manifest format version mismatch");
    m.task = task_from_name(j.at("task").get<std::string>());
    m.seed = j.at("seed").get<uint64_t>();
    m.episode_count = j.at("episode_count").get<uint32_t>();
    m.house_seeds = j.at("house_seeds").get<std::vector<uint64_t>>();
    check(m.house_seeds.size() == j.at("house_count").get<size_t>(), ErrorCode::CorruptRecord,
          "house count disagrees with house seed list");
    m.val_house_fraction = j.at("val_house_fraction").get<double>();
    m.encoder_seed = j.at("encoder_seed").get<uint64_t>();
    const json& p = j.at("gen_params");
    m.gen_params.min_size = p.at("min_size").get<int>();
    m.gen_params.max_size = p.at("max_size").get<int>();
    m.gen_params.max_rooms = p.at("max_rooms").get<int>();
    m.gen_params.min_room = p.at("min_room").get<int>();
    m.gen_params.objects_per_room_min = p.at("objects_per_room_min").get<int>();
    m.gen_params.objects_per_room_max = p.at("objects_per_room_max").get<int>();
    m.gen_params.categories = p.at("categories").get<int>();
    m.gen_params.obs_window = p.at("obs_window").get<int>();
    m.gen_params.return_radius = p.at("return_radius").get<int>();
    return m;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
    check(ds.episodes.size() == ds.manifest.episode_count, ErrorCode::ValidationFailed,
          "manifest episode count disagrees with episode list");
    for (const Episode& ep : ds.episodes) validate_episode(ep);
    std::filesystem::create_directories(dir);

    ByteWriter file;
    file.bytes(kMagic, 4);
    file.u16(kFormatVersion);
    for (const Episode& ep : ds.episodes) {
        std::vector<uint8_t> payload = serialize_episode(ep);
        file.u32(static_cast<uint32_t>(payload.size()));
        file.bytes(payload.data(), payload.size());
        file.u32(crc32(payload.data(), payload.size()));
    }
    write_file(dir + "/episodes.bplb", file.data());

    const std::string manifest = manifest_to_json(ds.manifest);
    write_file(dir + "/manifest.json",
               std::vector<uint8_t>(manifest.begin(), manifest.end()));
}

Dataset read_dataset(const std::string& dir) {
    Dataset ds;
    std::vector<uint8_t> mbytes = read_file(dir + "/manifest.json");
    ds.manifest = manifest_from_json(std::string(mbytes.begin(), mbytes.end()));

    std::vector<uint8_t> bytes = read_file(dir + "/episodes.bplb");
    ByteReader r(bytes);
    char magic[4];
    r.bytes(magic, 4);
    check(std::equal(magic, magic + 4, kMagic), ErrorCode::CorruptRecord, "bad magic");
    check(r.u16() == kFormatVersion, ErrorCode::VersionMismatch, "episode file version mismatch");
    while (r.remaining() > 0) {
        const uint32_t len = r.u32();
        check(r.remaining() >= len + 4u, ErrorCode::CorruptRecord, "truncated record");
        std::vector<uint8_t> payload(len);
        r.bytes(payload.data(), len);
        const uint32_t stored = r.u32();
        check(crc32(payload.data(), payload.size()) == stored, ErrorCode::CorruptRecord,
              "record CRC mismatch");
        ds.episodes.push_back(deserialize_episode(payload));
    }
    check(ds.episodes.size() == ds.manifest.episode_count, ErrorCode::CorruptRecord,
          "episode count disagrees with manifest");
    return ds;
}

std::vector<ReplayedStep> replay_episode(const Episode& ep, const GenParams& params) {
    House house = generate_house(ep.house_seed, params);
    std::vector<ReplayedStep> steps;
    steps.reserve(ep.actions.size());
    Pose pose = ep.start;
    check(pose_valid(house, pose), ErrorCode::ReplayDivergence, "invalid start pose");
    for (size_t i = 0; i < ep.actions.size(); ++i) {
        steps.push_back({render_raw_obs(house, pose), ep.actions[i]});
        StepResult r = step_dynamics(house, pose, ep.actions[i]);
        check(r.success == (ep.success_flags[i] != 0), ErrorCode::ReplayDivergence,
              "success flag disagrees with simulation");
        pose = r.pose;
    }
    return steps;
}

HouseSplit split_train_val(const DatasetManifest& m, double val_house_fraction) {
    check(val_house_fraction > 0.0 && val_house_fraction < 1.0, ErrorCode::InvalidArgument,
          "fraction must be in (0, 1)");
    check(m.house_seeds.size() >= 2, ErrorCode::InvalidArgument, "need >= 2 houses to split");
    std::vector<uint64_t> houses = m.house_seeds;
    Rng rng = Rng::stream(m.seed, "split");
    rng.shuffle(houses);
    size_t n_val = static_cast<size_t>(
        std::floor(val_house_fraction * static_cast<double>(houses.size()) + 0.5));
    n_val = std::clamp<size_t>(n_val, 1, houses.size() - 1);
    HouseSplit split;
    split.val_houses.assign(houses.begin(), houses.begin() + n_val);
    split.train_houses.assign(houses.begin() + n_val, houses.end());
    std::sort(split.val_houses.begin(), split.val_houses.end());
    std::sort(split.train_houses.begin(), split.train_houses.end());
    return split;
}

void episode_split(const Dataset& ds, const HouseSplit& split, std::vector<int>& train_ids,
                   std::vector<int>& val_ids) {
    train_ids.clear();
    val_ids.clear();
    for (size_t i = 0; i < ds.episodes.size(); ++i) {
        uint64_t h = ds.episodes[i].house_seed;
        if (std::binary_search(split.val_houses.begin(), split.val_houses.end(), h))
            val_ids.push_back(static_cast<int>(i));
        else if (std::binary_search(split.train_houses.begin(), split.train_houses.end(), h))
            train_ids.push_back(static_cast<int>(i));
        else
            fail(ErrorCode::ValidationFailed, "episode house missing from split");
    }
}

} // namespace bplab::data
