#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "advaug/checkpoint.hpp"
#include "advaug/manifest.hpp"
#include "advaug/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string tool() {
#ifdef ADVAUG_BIN_PATH
    return ADVAUG_BIN_PATH;
#else
    return "advaug";
#endif
}

int run_tool(const std::string& args, std::string* output = nullptr) {
    std::string cmd = tool() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string captured;
    std::array<char, 512> buf{};
    while (fgets(buf.data(), buf.size(), pipe)) captured += buf.data();
    int status = pclose(pipe);
    if (output) *output = captured;
    return WEXITSTATUS(status);
}

struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() / ("advaug_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Workspace() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json slurp_json(const std::string& path) { return json::parse(slurp(path)); }

std::size_t count_lines(const std::string& path) {
    std::string text = slurp(path);
    std::size_t n = 0;
    for (char c : text) n += c == '\n' ? 1 : 0;
    return n;
}

} // namespace

TEST_CASE("datagen two-moons produces the requested csv") {
    Workspace ws;
    std::string out = ws.path("moons.csv");
    CHECK(run_tool("datagen two-moons --n 500 --std 0.15 --seed 0 --out " + out) == 0);
    CHECK(count_lines(out) == 1001); // header + 1000 rows

    std::string sub = ws.path("sub.csv");
    CHECK(run_tool("datagen two-moons --n 500 --std 0.15 --seed 0 --subsample-pos 20 --out " + sub) ==
          0);
    std::string text = slurp(sub);
    std::size_t positives = 0;
    std::istringstream ss(text);
    std::string line;
    std::getline(ss, line); // header
    while (std::getline(ss, line)) {
        if (line.find(",1,") != std::string::npos) ++positives;
    }
    CHECK(positives == 20);
}

TEST_CASE("invalid flags exit with code 2 and name the flag") {
    Workspace ws;
    std::string output;
    int rc = run_tool("datagen two-moons --std -0.5 --seed 0 --out " + ws.path("x.csv"), &output);
    CHECK(rc == 2);
    CHECK(output.find("--std") != std::string::npos);
}

TEST_CASE("evaluate: perfect fixture gives cpm 1, missing files exit 2") {
    Workspace ws;
    {
        std::ofstream c(ws.path("candidates.csv"));
        c << "scan_id,x,y,score\na,5,5,1\nb,9,9,1\n";
        std::ofstream g(ws.path("gt.csv"));
        g << "scan_id,x,y,radius,relevant\na,5,5,2,1\nb,9,9,2,1\n";
    }
    std::string report = ws.path("report.json");
    CHECK(run_tool("evaluate --candidates " + ws.path("candidates.csv") + " --groundtruth " +
                   ws.path("gt.csv") + " --bootstrap 50 --out " + report) == 0);
    json r = slurp_json(report);
    CHECK(r["cpm"].get<double>() == 1.0);
    CHECK(r["scan_count"].get<std::size_t>() == 2);

    CHECK(run_tool("evaluate --candidates " + ws.path("candidates.csv") + " --groundtruth " +
                   ws.path("absent.csv") + " --out " + ws.path("r2.json")) == 2);
}

TEST_CASE("evaluate: hand fixture cpm matches the hand computation") {
    Workspace ws;
    {
        std::ofstream c(ws.path("candidates.csv"));
        c << "scan_id,x,y,score\n";
        c << "s1,10,10,0.9\ns1,30.5,30,0.8\ns1,50,50,0.7\ns2,20,21,0.6\ns2,5,5,0.5\n";
        std::ofstream g(ws.path("gt.csv"));
        g << "scan_id,x,y,radius,relevant\ns1,10,10,2,1\ns1,30,30,2,1\ns2,20,20,2,1\n";
    }
    std::string report = ws.path("report.json");
    CHECK(run_tool("evaluate --candidates " + ws.path("candidates.csv") + " --groundtruth " +
                   ws.path("gt.csv") + " --bootstrap 0 --out " + report) == 0);
    json r = slurp_json(report);
    CHECK(std::abs(r["cpm"].get<double>() - 19.0 / 21.0) < 1e-12);
}

TEST_CASE("train echoes config into the manifest and reruns bitwise") {
    Workspace ws;
    std::string moons = ws.path("moons.csv");
    REQUIRE(run_tool("datagen two-moons --n 60 --std 0.15 --seed 3 --out " + moons) == 0);

    std::string model = ws.path("model.json");
    std::string args = "train --data " + moons + " --head beta --anneal 20 --epochs 5 --seed 9 --out " +
                       model;
    REQUIRE(run_tool(args) == 0);
    json manifest = slurp_json(model + ".manifest.json");
    CHECK(manifest["config"]["head"] == "beta");
    CHECK(manifest["config"]["anneal"] == 20);
    CHECK(manifest["command"] == "train");

    std::string first = advaug::file_fingerprint(model);
    REQUIRE(run_tool(args) == 0);
    CHECK(advaug::file_fingerprint(model) == first);
}

TEST_CASE("attack pools: counts, ranges, fingerprint recipe") {
    Workspace ws;
    std::string moons = ws.path("moons.csv");
    REQUIRE(run_tool("datagen two-moons --n 80 --std 0.15 --seed 1 --out " + moons) == 0);
    std::string model = ws.path("m.json");
    REQUIRE(run_tool("train --data " + moons + " --head beta --epochs 6 --seed 2 --out " + model) == 0);
    std::string synth = ws.path("synth.json");
    REQUIRE(run_tool("train-synth --data " + moons + " --epochs 10 --seed 3 --out " + synth) == 0);

    std::string pool = ws.path("pool.json");
    REQUIRE(run_tool("attack --model " + model + " --mode latent --generator " + synth +
                     " --count 7 --seed 4 --out " + pool) == 0);
    json p = slurp_json(pool);
    CHECK(p["records"].size() == 7);
    for (const auto& rec : p["records"]) CHECK(rec["kind"] == "synthetic-pgd");

    // pool fingerprint = hash(model fingerprint, config echo, seed)
    json config = p["config"];
    config.erase("pool_fingerprint");
    std::string expect = advaug::hex64(advaug::fnv1a64(p["source_model"].get<std::string>() +
                                                       config.dump() + std::to_string(4)));
    CHECK(p["config"]["pool_fingerprint"].get<std::string>() == expect);

    std::string noise_pool = ws.path("noise.json");
    REQUIRE(run_tool("attack --model " + model +
                     " --mode noise --range-lo=-1.5,-1 --range-hi=2.5,1.5 --count 5 --seed 5 --out " +
                     noise_pool) == 0);
    json np = slurp_json(noise_pool);
    CHECK(np["records"].size() == 5);
    for (const auto& rec : np["records"]) {
        auto data = rec["data"].get<std::vector<double>>();
        CHECK(data[0] >= -1.5);
        CHECK(data[0] <= 2.5);
        CHECK(data[1] >= -1.0);
        CHECK(data[1] <= 1.5);
    }
}

TEST_CASE("plot-boundary: constant model yields a contour-free well-formed svg") {
    Workspace ws;
    // a zero-weight model responds 0.5 everywhere
    advaug::Rng rng(1);
    advaug::Classifier model = advaug::Classifier::make({4}, 2, advaug::HeadKind::cross_entropy, rng);
    for (advaug::Tensor* p : model.net.parameters()) {
        for (std::size_t i = 0; i < p->size(); ++i) (*p)[i] = 0.0;
    }
    std::string ckpt = ws.path("const.json");
    advaug::save_classifier(ckpt, model, {});

    std::string svg_path = ws.path("fig.svg");
    REQUIRE(run_tool("plot-boundary --model " + ckpt + " --grid 50 --out " + svg_path) == 0);
    std::string svg = slurp(svg_path);
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("<line") == std::string::npos); // constant field: no 0.5 contour

    // grid n x n emits n^2 cells
    std::size_t rects = 0;
    for (std::size_t at = svg.find("<rect"); at != std::string::npos; at = svg.find("<rect", at + 1)) {
        ++rects;
    }
    CHECK(rects == 2500);

    // non-2-D models are rejected with a usage error
    advaug::Rng rng2(2);
    advaug::Classifier wide = advaug::Classifier::make({4}, 5, advaug::HeadKind::cross_entropy, rng2);
    std::string wide_ckpt = ws.path("wide.json");
    advaug::save_classifier(wide_ckpt, wide, {});
    CHECK(run_tool("plot-boundary --model " + wide_ckpt + " --grid 20 --out " + ws.path("w.svg")) ==
          2);
}

TEST_CASE("manifest replay reproduces artifacts bitwise") {
    Workspace ws;
    std::string moons = ws.path("moons.csv");
    REQUIRE(run_tool("datagen two-moons --n 50 --std 0.15 --seed 11 --out " + moons) == 0);
    std::string fp_before = advaug::file_fingerprint(moons);

    // replay after deleting the artifact
    fs::remove(moons);
    REQUIRE(run_tool("replay --manifest " + moons + ".manifest.json") == 0);
    CHECK(advaug::file_fingerprint(moons) == fp_before);
}

TEST_CASE("finetune chains manifests by fingerprint") {
    Workspace ws;
    std::string moons = ws.path("moons.csv");
    REQUIRE(run_tool("datagen two-moons --n 60 --std 0.15 --seed 21 --out " + moons) == 0);
    std::string base = ws.path("base.json");
    REQUIRE(run_tool("train --data " + moons + " --head beta --epochs 5 --seed 22 --out " + base) == 0);
    std::string pool = ws.path("noise.json");
    REQUIRE(run_tool("attack --model " + base +
                     " --mode noise --range-lo=-1.5,-1 --range-hi=2.5,1.5 --count 6 --seed 23 --out " +
                     pool) == 0);
    std::string tuned = ws.path("tuned.json");
    REQUIRE(run_tool("finetune --model " + base + " --data " + moons + " --schedule perturb-only " +
                     "--pool-perturb " + pool + " --pool-noise " + pool +
                     " --epochs 3 --seed 24 --allow-foreign-pools --out " + tuned) == 2);
    // perturbed pool records carry label 0 here (noise), so the schedule's
    // perturbed slot rejects them; use the right pools instead
    std::string pert = ws.path("pert.json");
    REQUIRE(run_tool("attack --model " + base + " --mode patch --data " + moons +
                     " --count 6 --seed 25 --out " + pert) == 0);
    REQUIRE(run_tool("finetune --model " + base + " --data " + moons + " --schedule perturb-only " +
                     "--pool-perturb " + pert + " --pool-noise " + pool +
                     " --epochs 3 --seed 24 --out " + tuned) == 0);

    json base_manifest = slurp_json(base + ".manifest.json");
    json tuned_manifest = slurp_json(tuned + ".manifest.json");
    CHECK(tuned_manifest["config"]["baseline_fingerprint"] ==
          base_manifest["config"]["fingerprint"]);

    advaug::CheckpointMeta meta;
    advaug::load_classifier(tuned, &meta);
    CHECK(meta.baseline_path == base);
}
