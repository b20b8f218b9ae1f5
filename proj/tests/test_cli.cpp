#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "eovseg/pipeline.hpp"
#include "eovseg/tensor_io.hpp"
#include "helpers.hpp"

using namespace eovseg;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "eovseg");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> v;
    std::stringstream in(s);
    for (std::string l; std::getline(in, l);) v.push_back(l);
    return v;
}

std::vector<std::string> split(const std::string& s, char sep = ',') {
    std::vector<std::string> v;
    std::stringstream in(s);
    for (std::string f; std::getline(in, f, sep);) v.push_back(f);
    return v;
}

std::string spec_path() { return (testing::data_dir() / "scene64.json").string(); }
std::string small_config() { return (testing::data_dir() / "small.json").string(); }

fs::path make_scene(const std::string& name, const std::string& config = "") {
    const auto dir = testing::scratch(name);
    std::vector<std::string> args{"gen", "--spec", spec_path(), "--out", dir.string(), "--seed", "3"};
    if (!config.empty()) args.insert(args.end(), {"--config", config});
    REQUIRE(cli(args).code == kExitOk);
    return dir;
}

}  // namespace

TEST_CASE("gen is deterministic") {
    const auto a = make_scene("gen_a"), b = make_scene("gen_b");
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        CHECK_MESSAGE(slurp(e.path()) == slurp(b / e.path().filename()), e.path().filename().string());
    }
    CHECK(files >= 5);
}

TEST_CASE("gen usage errors") {
    const auto r = cli({"gen", "--out", testing::scratch("gen_missing").string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("--spec") != std::string::npos);
    CHECK(cli({"gen", "--spec", "/nonexistent/spec.json", "--out", "/tmp/x"}).code == kExitUsage);
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"frobnicate"}).code == kExitUsage);
}

TEST_CASE("gen templates follow the configured prompt count") {
    const auto dir = testing::scratch("gen3");
    std::ofstream(dir / "spec.json") << R"({"height": 32, "width": 32,
        "classes": [{"name": "floor", "thing": false}, {"name": "cup"}, {"name": "box"}],
        "background": ["floor"], "objects": [{"class": "cup", "shape": "disk"}, {"class": "box"}]})";
    std::ofstream(dir / "cfg.json") << R"({"prompt_templates": 5, "embed_dim": 32, "fusion_dim": 16})";
    REQUIRE(cli({"gen", "--spec", (dir / "spec.json").string(), "--out", (dir / "scene").string(), "--config",
                 (dir / "cfg.json").string()})
                .code == kExitOk);
    const Tensor t = read_tensor(dir / "scene" / "templates.eovt");
    CHECK(t.dim(0) == 5);
    CHECK(t.dim(1) == 3);
}

TEST_CASE("run with ground truth as prediction scores perfectly") {
    const auto scene = make_scene("run_gt");
    const auto r = cli({"run", "--scene", scene.string(), "--gt-as-prediction"});
    REQUIRE(r.code == kExitOk);
    const auto rows = lines(r.out);
    const auto f = split(rows.back());
    CHECK(f[1] == "1.000000");
    CHECK(f[4] == "1.000000");
}

TEST_CASE("run reports differ only in metrics and mode") {
    const auto scene = make_scene("run_modes", small_config());
    const auto a = cli({"run", "--scene", scene.string(), "--config", small_config(), "--fusion", "tdee"});
    const auto b = cli({"run", "--scene", scene.string(), "--config", small_config(), "--fusion", "none"});
    REQUIRE(a.code == kExitOk);
    REQUIRE(b.code == kExitOk);
    const auto ra = split(lines(a.out).back()), rb = split(lines(b.out).back());
    REQUIRE(ra.size() == rb.size());
    CHECK(ra[0] == "tdee");
    CHECK(rb[0] == "none");
    for (std::size_t i = 5; i < ra.size(); ++i) CHECK(ra[i] == rb[i]);
}

TEST_CASE("run writes the trace manifest") {
    const auto scene = make_scene("run_trace", small_config());
    const auto trace = testing::scratch("run_trace_out");
    REQUIRE(cli({"run", "--scene", scene.string(), "--config", small_config(), "--trace", trace.string()}).code ==
            kExitOk);
    auto got = Trace::load(trace).names();
    auto want = trace_names(FusionMode::tdee);
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    CHECK(got == want);
}

TEST_CASE("run reports malformed inputs") {
    const auto scene = make_scene("run_bad");
    {
        std::ofstream f(scene / "image.eovt", std::ios::binary | std::ios::trunc);
        f << "garbage";
    }
    const auto r = cli({"run", "--scene", scene.string()});
    CHECK(r.code == kExitIo);
    CHECK(r.err.find("image.eovt") != std::string::npos);

    const auto dir = testing::scratch("bad_cfg");
    std::ofstream(dir / "cfg.json") << R"({"querys": 3})";
    const auto c = cli({"run", "--scene", scene.string(), "--config", (dir / "cfg.json").string()});
    CHECK(c.code == kExitUsage);
    CHECK(c.err.find("querys") != std::string::npos);
}

TEST_CASE("verify passes and catches sabotage") {
    const auto ok = cli({"verify"});
    CHECK(ok.code == kExitOk);
    CHECK(ok.out.find("all checks passed") != std::string::npos);

    const auto bad = cli({"verify", "--sabotage", "softmax"});
    CHECK(bad.code == kExitVerifyFailed);
    CHECK(bad.err.find("softmax") != std::string::npos);

    // one trial, fixed seed: identical pass/fail table apart from the timing line
    auto table = [](const std::string& s) {
        auto v = lines(s);
        v.pop_back();
        return v;
    };
    const auto x = cli({"verify", "--trials", "1", "--seed", "9"});
    const auto y = cli({"verify", "--trials", "1", "--seed", "9"});
    CHECK(x.code == y.code);
    CHECK(table(x.out) == table(y.out));
    CHECK(cli({"verify", "--sabotage", "matmul"}).code == kExitUsage);
}

TEST_CASE("profile lists every module") {
    const auto dir = testing::scratch("profile");
    const auto r = cli({"profile", "--reps", "5", "--out", (dir / "p.csv").string()});
    REQUIRE(r.code == kExitOk);
    const auto rows = lines(slurp(dir / "p.csv"));
    REQUIRE(rows.size() == 11);
    std::vector<std::string> modules;
    for (std::size_t i = 2; i < 10; ++i) modules.push_back(split(rows[i])[0]);
    CHECK(modules == std::vector<std::string>{"backbone", "pyramid", "aggregate", "vas", "decoder", "spatial", "fusion",
                                              "classifier"});
    CHECK(split(rows[10])[0] == "total");
}

TEST_CASE("bench modes share the config hash") {
    const auto a = cli({"bench", "--mode", "dda", "--reps", "5", "--config", small_config()});
    const auto b = cli({"bench", "--mode", "ca", "--reps", "5", "--config", small_config()});
    REQUIRE(a.code == kExitOk);
    REQUIRE(b.code == kExitOk);
    const auto ra = lines(a.out), rb = lines(b.out);
    CHECK(split(ra.back()).back() == split(rb.back()).back());
    CHECK(split(ra.back())[7] == "dda");
    CHECK(split(rb.back())[7] == "ca");
    CHECK(cli({"bench", "--reps", "4"}).code == kExitUsage);
    CHECK(cli({"bench", "--mode", "xa"}).code == kExitUsage);
}
