#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "gridflow/cli.hpp"
#include "gridflow/config.hpp"
#include "gridflow/io.hpp"
#include "gridflow/pipeline.hpp"
#include "oracle.hpp"

using namespace gridflow;
namespace fs = std::filesystem;

namespace {

// Runs the CLI with stdout and stderr captured.
int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "gridflow");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream cap_out, cap_err;
  auto* old_out = std::cout.rdbuf(cap_out.rdbuf());
  auto* old_err = std::cerr.rdbuf(cap_err.rdbuf());
  const int rc = cli_main(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  if (out) *out = cap_out.str() + cap_err.str();
  return rc;
}

float read_f32(const Bytes& b, std::size_t at) {
  float v;
  std::memcpy(&v, b.data() + at, 4);
  return v;
}

std::int32_t read_i32(const Bytes& b, std::size_t at) {
  std::int32_t v;
  std::memcpy(&v, b.data() + at, 4);
  return v;
}

FlowField float_exact_flow(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-20.0f, 20.0f);
  FlowField f(rows, cols, FlowDirection::kForward);
  for (auto& d : f.displacement.values()) d = {u(rng), u(rng)};
  return f;
}

struct EnvGuard {
  explicit EnvGuard(const char* value) {
    if (value) ::setenv("GRIDFLOW_SEED", value, 1);
    else ::unsetenv("GRIDFLOW_SEED");
  }
  ~EnvGuard() { ::unsetenv("GRIDFLOW_SEED"); }
};

}  // namespace

TEST_SUITE("io_cli") {
  TEST_CASE(".flo layout and round trip") {
    std::mt19937_64 rng(51);
    const FlowField f = float_exact_flow(3, 5, rng);
    const Bytes b = encode_flo(f);
    REQUIRE(b.size() == 12 + 3 * 5 * 8);
    CHECK(read_f32(b, 0) == 202021.25f);
    CHECK(read_i32(b, 4) == 5);
    CHECK(read_i32(b, 8) == 3);
    // Row-major interleaved (u, v): cell (x=1, y=2) sits at index 2 * 5 + 1.
    CHECK(read_f32(b, 12 + 8 * 11) == static_cast<float>(f(1, 2).x));
    CHECK(read_f32(b, 12 + 8 * 11 + 4) == static_cast<float>(f(1, 2).y));
    const FlowField back = decode_flo(b, FlowDirection::kForward);
    CHECK(back == f);
    CHECK(decode_flo(b, FlowDirection::kBackward).direction == FlowDirection::kBackward);
    CHECK(encode_flo(back) == b);

    Bytes bad = b;
    bad[0] ^= 0xFF;
    CHECK_THROWS_AS(decode_flo(bad), FormatError);
    try {
      decode_flo(std::span<const std::uint8_t>(b.data(), 50));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() <= 50);
      CHECK(e.offset() >= 12);
    }
  }

  TEST_CASE("point cloud round trip") {
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<float> u(-30.0f, 30.0f), in(0.0f, 1.0f);
    PointCloud c;
    for (int i = 0; i < 100; ++i) c.points.push_back({u(rng), u(rng), u(rng), in(rng)});
    const Bytes b = encode_point_cloud(c);
    CHECK(b.size() == 1600);
    CHECK(read_f32(b, 16 * 7 + 8) == static_cast<float>(c.points[7].z));
    const PointCloud back = decode_point_cloud(b, {0.0, 0.0, 1.8});
    REQUIRE(back.points.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) {
      CHECK(back.points[i].x == c.points[i].x);
      CHECK(back.points[i].intensity == c.points[i].intensity);
    }
    CHECK(back.sensor_origin.z == 1.8);
    CHECK_THROWS_AS(decode_point_cloud(std::span<const std::uint8_t>(b.data(), 30)), FormatError);
  }

  TEST_CASE("grid map round trip") {
    std::mt19937_64 rng(53);
    GridMap m(7, 9, 0.25);
    std::uniform_real_distribution<float> u(0.0f, 5.0f);
    for (const char* name : {"reflection_count", "max_height", "custom"}) {
      ScalarField f(7, 9);
      for (auto& v : f.values()) v = u(rng);
      m.add_layer(name, f);
    }
    const Bytes b = encode_grid_map(m);
    CHECK(std::string(b.begin(), b.begin() + 4) == "GMAP");
    const GridMap back = decode_grid_map(b);
    CHECK(back.rows() == 7);
    CHECK(back.cols() == 9);
    CHECK(back.cell_size() == 0.25);
    REQUIRE(back.layer_count() == 3);
    CHECK(back.layers()[2].name == "custom");
    for (const auto& l : m.layers()) CHECK(back.layer(l.name) == l.values);
    CHECK(encode_grid_map(back) == b);

    for (std::size_t cut : {std::size_t{3}, std::size_t{10}, b.size() - 1}) {
      try {
        decode_grid_map(std::span<const std::uint8_t>(b.data(), cut));
        FAIL("expected FormatError");
      } catch (const FormatError& e) {
        CHECK(e.offset() <= cut);
      }
    }
  }

  TEST_CASE("file helpers") {
    const auto dir = oracle::scratch_dir("io_files");
    std::mt19937_64 rng(54);
    const FlowField f = float_exact_flow(4, 4, rng);
    write_flo(dir / "a.flo", f);
    CHECK(read_flo(dir / "a.flo") == f);
    CHECK_THROWS_AS(read_flo(dir / "missing.flo"), IoError);
  }

  TEST_CASE("pose lines") {
    const RigidTransform2D t{std::numbers::pi / 6, {1.5, -2.0}, FlowDirection::kBackward};
    const std::string line = pose_line(t);
    std::istringstream is(line);
    std::vector<double> v;
    for (double x; is >> x;) v.push_back(x);
    REQUIRE(v.size() == 12);
    // [R t] lifted to 3D with the z axis untouched.
    CHECK(v[0] == doctest::Approx(std::cos(t.theta)));
    CHECK(v[1] == doctest::Approx(-std::sin(t.theta)));
    CHECK(v[3] == doctest::Approx(1.5));
    CHECK(v[4] == doctest::Approx(std::sin(t.theta)));
    CHECK(v[7] == doctest::Approx(-2.0));
    CHECK(v[10] == doctest::Approx(1.0));
    CHECK(v[11] == 0.0);
    const auto back = parse_pose_line(line, FlowDirection::kBackward);
    CHECK(back.theta == doctest::Approx(t.theta).epsilon(1e-12));
    CHECK(back.t.x == doctest::Approx(1.5));
    CHECK(back.direction == FlowDirection::kBackward);
    CHECK_THROWS_AS(parse_pose_line("1 0 0"), FormatError);
    CHECK_THROWS_AS(parse_pose_line(line + " 4"), FormatError);

    const auto dir = oracle::scratch_dir("io_poses");
    write_poses(dir / "p.txt", {t, t.inverse()});
    const auto ps = read_poses(dir / "p.txt");
    REQUIRE(ps.size() == 2);
    CHECK(ps[1].t.x == doctest::Approx(t.inverse().t.x).epsilon(1e-9));
  }

  TEST_CASE("HSV rendering") {
    FlowField f(1, 4, FlowDirection::kForward);
    f(0, 0) = {0.0, 0.0};
    f(1, 0) = {1.0, 0.0};
    f(2, 0) = {0.0, 1.0};
    f(3, 0) = {0.0, 0.5};
    const RgbImage img = render_flow_hsv(f, 1.0);
    CHECK(img.pixel(0, 0) == std::array<std::uint8_t, 3>{0, 0, 0});
    CHECK(img.pixel(1, 0) == std::array<std::uint8_t, 3>{255, 0, 0});
    // Hue 90 degrees, full value: (0.5, 1, 0).
    const auto p = img.pixel(2, 0);
    CHECK(std::abs(int(p[0]) - 127) <= 1);
    CHECK(p[1] == 255);
    CHECK(p[2] == 0);
    CHECK(std::abs(int(img.pixel(3, 0)[1]) - 128) <= 1);

    const Bytes ppm = encode_ppm(img);
    const std::string header = "P6\n4 1\n255\n";
    CHECK(std::string(ppm.begin(), ppm.begin() + static_cast<std::ptrdiff_t>(header.size())) == header);
    CHECK(ppm.size() == header.size() + 12);

    ScalarField g(1, 2);
    g(1, 0) = 1.0;
    const RgbImage gray = render_gray(g);
    CHECK(gray.pixel(1, 0) == std::array<std::uint8_t, 3>{255, 255, 255});
  }

  TEST_CASE("run config JSON") {
    RunConfig base;
    const Json j = Json::parse(R"({"seed": 9, "optimizer": {"steps_per_level": 7}, "flags": {"blur": false}})");
    const RunConfig c = run_config_from_json(j, base);
    CHECK(c.seed == 9);
    CHECK(c.optimizer.steps_per_level == 7);
    CHECK(c.optimizer.outer_alternations == base.optimizer.outer_alternations);
    CHECK_FALSE(c.flags.blur);
    CHECK(c.effective_optimizer().sigma_schedule == std::vector<double>{0.0});

    CHECK_THROWS_AS(run_config_from_json(Json::parse(R"({"sed": 1})")), ParameterError);
    CHECK_THROWS_AS(run_config_from_json(Json::parse(R"({"optimizer": {"stepsize": 1}})")), ParameterError);
    CHECK_THROWS_AS(run_config_from_json(Json::parse(R"({"seed": "x"})")), ParameterError);

    // Round trip through JSON.
    RunConfig r;
    r.seed = 77;
    r.optimizer.weights.motion = 0.25;
    r.flags.motion_spatial = false;
    const RunConfig back = run_config_from_json(to_json(r));
    CHECK(to_json(back) == to_json(r));
    CHECK(back.effective_optimizer().weights.motion == 0.0);
  }

  TEST_CASE("seed from the environment") {
    {
      EnvGuard g(nullptr);
      CHECK_FALSE(seed_from_env().has_value());
    }
    {
      EnvGuard g("1234");
      CHECK(seed_from_env() == 1234u);
    }
    {
      EnvGuard g("12ab");
      CHECK_THROWS_AS(seed_from_env(), ParameterError);
    }
  }

  TEST_CASE("ablation variants match the configuration table") {
    const auto v = ablation_variants();
    REQUIRE(v.size() == 3);
    CHECK((!v[0].blur && !v[0].motion_spatial));
    CHECK((v[1].blur && !v[1].motion_spatial));
    CHECK((v[2].blur && v[2].motion_spatial));
  }

  TEST_CASE("CLI: seed precedence and echo") {
    const auto dir = oracle::scratch_dir("cli_seed");
    std::string out;
    {
      EnvGuard g("42");
      REQUIRE(run_cli({"synth", "--static", "--out", (dir / "a").string()}, &out) == 0);
      CHECK(out.find("seed: 42") != std::string::npos);
      REQUIRE(run_cli({"synth", "--static", "--seed", "5", "--out", (dir / "b").string()}, &out) == 0);
      CHECK(out.find("seed: 5") != std::string::npos);
      CHECK(out.find("\"optimizer\"") != std::string::npos);
    }
    {
      EnvGuard g("oops");
      CHECK(run_cli({"synth", "--out", (dir / "c").string()}) == 2);
    }
    CHECK(run_cli({}) != 0);
    CHECK(run_cli({"flow"}) != 0);
    std::ofstream(dir / "bad.json") << R"({"no_such_key": 1})";
    CHECK(run_cli({"synth", "--config", (dir / "bad.json").string(), "--out", (dir / "d").string()}) == 2);
    CHECK(run_cli({"synth", "--help"}, &out) == 0);
    for (const char* flag : {"--frames", "--objects", "--noise", "--static", "--seed", "--jobs", "--config", "--out",
                             "--no-blur", "--no-motion-spatial", "--spatial-mask-mode"}) {
      CHECK(out.find(flag) != std::string::npos);
    }
  }

  TEST_CASE("CLI: static noise-free pair gives zero flow error; flow output is deterministic") {
    const auto dir = oracle::scratch_dir("cli_flow");
    REQUIRE(run_cli({"synth", "--static", "--noise", "0", "--seed", "3", "--out", (dir / "s").string()}) == 0);
    REQUIRE(run_cli({"gridmap", (dir / "s/cloud_0000.bin").string(), (dir / "s/cloud_0001.bin").string(), "--out",
                     (dir / "m").string()}) == 0);
    const std::string m0 = (dir / "m/cloud_0000.gmap").string();
    const std::string m1 = (dir / "m/cloud_0001.gmap").string();
    CHECK(read_file(m0) == read_file(m1));
    REQUIRE(run_cli({"flow", m0, m1, "--gt", (dir / "s/gt_flow_0000.flo").string(), "--out", (dir / "f1").string()}) == 0);
    const Json loss = read_json(dir / "f1/loss.json");
    CHECK(loss["epe_fw"]["mean"].get<double>() < 1e-6);
    for (const char* name : {"flow_fw.flo", "flow_bw.flo", "flow_fw.ppm", "mask_data_fw.ppm", "mask_motion_bw.ppm",
                             "mask_spatial_fw.ppm", "transform_fw.txt", "transform_bw.txt", "run_config.json"}) {
      CHECK(fs::exists(dir / "f1" / name));
    }

    REQUIRE(run_cli({"flow", m0, m1, "--gt", (dir / "s/gt_flow_0000.flo").string(), "--out", (dir / "f2").string()}) == 0);
    for (const auto& e : fs::directory_iterator(dir / "f1")) {
      CHECK(read_file(e.path()) == read_file(dir / "f2" / e.path().filename()));
    }
  }

  TEST_CASE("CLI: odometry on true motions scores zero; track and render run") {
    const auto dir = oracle::scratch_dir("cli_odometry");
    REQUIRE(run_cli({"synth", "--frames", "40", "--seed", "3", "--out", (dir / "s").string()}) == 0);
    REQUIRE(run_cli({"odometry", "--transforms", (dir / "s/gt_transforms.txt").string(), "--reference",
                     (dir / "s/poses.txt").string(), "--out", (dir / "o").string()}) == 0);
    const Json m = read_json(dir / "o/metrics.json");
    CHECK_FALSE(m["empty"].get<bool>());
    CHECK(m["are_rad_per_m"].get<double>() < 1e-9);
    CHECK(m["ate"].get<double>() < 1e-9);
    CHECK(read_poses(dir / "o/trajectory.txt").size() == 40);

    const std::string gt = (dir / "s/gt_flow_0000.flo").string();
    REQUIRE(run_cli({"gridmap", (dir / "s/cloud_0000.bin").string(), "--out", (dir / "m").string()}) == 0);
    REQUIRE(run_cli({"track", "--flow", gt, "--boxes1", (dir / "s/boxes_0000.json").string(), "--boxes2",
                     (dir / "s/boxes_0001.json").string(), "--map1", (dir / "m/cloud_0000.gmap").string(), "--out",
                     (dir / "t").string()}) == 0);
    const Json iou = read_json(dir / "t/iou.json");
    CHECK(iou["mean"].get<double>() > 0.5);

    REQUIRE(run_cli({"render", gt, "--out", (dir / "r").string()}) == 0);
    const Bytes ppm = read_file(dir / "r/gt_flow_0000.ppm");
    CHECK(std::string(ppm.begin(), ppm.begin() + 2) == "P6");
    CHECK(run_cli({"odometry", "--out", (dir / "x").string()}) == 2);
  }

  TEST_CASE("CLI: ablate emits the three configuration rows") {
    const auto dir = oracle::scratch_dir("cli_ablate");
    std::ofstream(dir / "quick.json") << R"({"optimizer": {"outer_alternations": 2, "steps_per_level": 10}})";
    std::string out;
    REQUIRE(run_cli({"ablate", "--scenarios", "1", "--seed", "100", "--config", (dir / "quick.json").string(), "--out",
                     (dir / "a").string()},
                    &out) == 0);
    const Json rows = read_json(dir / "a/ablation.json");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0]["variant"] == "B-/M-");
    CHECK(rows[0]["blur"] == false);
    CHECK(rows[0]["motion_spatial"] == false);
    CHECK(rows[1]["blur"] == true);
    CHECK(rows[1]["motion_spatial"] == false);
    CHECK(rows[2]["blur"] == true);
    CHECK(rows[2]["motion_spatial"] == true);
    CHECK(fs::exists(dir / "a/ablation.txt"));
    CHECK(out.find("3   y  y") != std::string::npos);
  }
}
