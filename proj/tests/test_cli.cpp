#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "glucolens/cli.hpp"
#include "glucolens/dataio.hpp"
#include "support.hpp"

using namespace glucolens;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary) << text;
}

struct SeedEnv {
    explicit SeedEnv(const char* value) { ::setenv("GLUCOLENS_SEED", value, 1); }
    ~SeedEnv() { ::unsetenv("GLUCOLENS_SEED"); }
};

} // namespace

TEST_CASE("usage errors")
{
    ::unsetenv("GLUCOLENS_SEED");
    Result r = run({"frob"});
    CHECK(r.code == cli::kUsage);
    CHECK(r.err == "glucolens: error[usage]: unknown subcommand 'frob'\n");

    r = run({"gen-images", "--out", "x", "--bogus", "1"});
    CHECK(r.code == cli::kUsage);
    CHECK(r.err.rfind("glucolens: error[usage]: ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

    CHECK(run({"train", "--out", "m.glm"}).code == cli::kUsage);
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"--help"}).code == cli::kOk);
}

TEST_CASE("io and validation errors")
{
    testing::TempDir dir("cli-err");
    Result r = run({"augment", "--manifest", (dir / "none.csv").string(), "--out", (dir / "o.csv").string()});
    CHECK(r.code == cli::kIo);
    CHECK(r.err.rfind("glucolens: error[io]: ", 0) == 0);

    r = run({"gen-images", "--out", dir.path().string(), "--min", "200", "--max", "70"});
    CHECK(r.code == cli::kValidation);
    CHECK(r.err.rfind("glucolens: error[validation]: ", 0) == 0);

    spit(dir / "bad.csv", "a,b\n1,2\n");
    CHECK(run({"featurize", "--manifest", (dir / "bad.csv").string(), "--out", (dir / "f.csv").string()}).code ==
          cli::kIo);
}

TEST_CASE("gen-images row count")
{
    testing::TempDir dir("cli-gen");
    const Result r = run({"gen-images", "--out", dir.path().string(), "--min", "70", "--max", "200", "--step", "2",
                          "--per-level", "10", "--width", "8", "--height", "8", "--threads", "1"});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.find("images=2640") != std::string::npos);
    CHECK(read_manifest(dir / "manifest.csv").size() == 2640);
}

TEST_CASE("evaluate on a perfect fixture")
{
    testing::TempDir dir("cli-eval");
    write_predictions({{"a", 100, 100}, {"b", 150, 150}, {"c", 80, 80}}, dir / "p.csv");
    const Result r = run({"evaluate", "--preds", (dir / "p.csv").string(), "--out", (dir / "m.csv").string(),
                          "--model-name", "M1", "--wavelength", "650"});
    REQUIRE(r.code == cli::kOk);
    const CsvTable t = read_csv(dir / "m.csv");
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0][t.column("rmse")] == "0");
    CHECK(t.rows[0][t.column("mape")] == "0");
    CHECK(t.rows[0][t.column("zone_A")] == "100");
    CHECK(t.rows[0][t.column("zone_E")] == "0");

    CHECK(run({"evaluate", "--preds", (dir / "p.csv").string(), "--out", (dir / "m.csv").string(), "--model-name",
               "M2", "--wavelength", "650", "--append"})
              .code == cli::kOk);
    CHECK(read_csv(dir / "m.csv").rows.size() == 2);
}

TEST_CASE("seed precedence")
{
    testing::TempDir dir("cli-seed");
    auto volts = [&](const std::string& name, std::vector<std::string> extra) {
        std::vector<std::string> args{"gen-voltages", "--count", "8", "--out", (dir / name).string()};
        args.insert(args.end(), extra.begin(), extra.end());
        REQUIRE(run(args).code == cli::kOk);
        return slurp(dir / name);
    };
    ::unsetenv("GLUCOLENS_SEED");
    spit(dir / "seven.cfg", "# comment\nseed = 7\n\ncount = 8\n");
    spit(dir / "nine.cfg", "seed=9\n");

    const std::string seven = volts("a.csv", {"--seed", "7"});
    const std::string nine = volts("b.csv", {"--seed", "9"});
    CHECK(seven != nine);
    CHECK(volts("c.csv", {"--config", (dir / "seven.cfg").string()}) == seven);
    CHECK(volts("d.csv", {"--seed", "7", "--config", (dir / "nine.cfg").string()}) == seven);
    {
        SeedEnv env("9");
        CHECK(volts("e.csv", {}) == nine);
        CHECK(volts("f.csv", {"--config", (dir / "seven.cfg").string()}) == seven);
        CHECK(volts("g.csv", {"--seed", "7"}) == seven);
    }
    CHECK(volts("h.csv", {}) == volts("i.csv", {"--seed", "42"}));

    // Config keys a subcommand does not have are ignored.
    spit(dir / "mixed.cfg", "seed = 7\nepochs = 3\n");
    CHECK(volts("j.csv", {"--config", (dir / "mixed.cfg").string()}) == seven);
    CHECK(run({"gen-voltages", "--out", (dir / "k.csv").string(), "--config", (dir / "none.cfg").string()}).code ==
          cli::kIo);
}

TEST_CASE("image pipeline chain")
{
    ::unsetenv("GLUCOLENS_SEED");
    testing::TempDir dir("cli-chain");
    const auto p = [&](const std::string& name) { return (dir / name).string(); };
    REQUIRE(run({"gen-images", "--out", p("raw"), "--min", "70", "--max", "90", "--per-level", "3", "--width", "16",
                 "--height", "16", "--threads", "1"})
                .code == cli::kOk);
    const Result aug = run({"augment", "--manifest", p("raw/manifest.csv"), "--out", p("data/manifest.csv")});
    REQUIRE(aug.code == cli::kOk);
    CHECK(aug.out.find("raw=132") != std::string::npos);
    CHECK(aug.out.find("augmented=198") != std::string::npos);
    REQUIRE(run({"featurize", "--manifest", p("data/manifest.csv"), "--out", p("data/features.csv"), "--size", "16"})
                .code == cli::kOk);

    for (const std::string model : {"M1", "M4"}) {
        std::vector<std::string> train{"train",       "--model", model,  "--out",  p(model + ".glm"), "--manifest",
                                       p("data/manifest.csv"), "--wavelength", "650", "--size", "16", "--epochs", "2",
                                       "--log",       p(model + ".log")};
        if (model == "M1") {
            train.push_back("--features");
            train.push_back(p("data/features.csv"));
        }
        const Result t = run(train);
        REQUIRE_MESSAGE(t.code == cli::kOk, t.err);
        const std::string first = slurp(p(model + ".glm"));
        REQUIRE(run(train).code == cli::kOk);
        CHECK(slurp(p(model + ".glm")) == first);
        CHECK(read_csv(p(model + ".log")).rows.size() == 2);

        std::vector<std::string> pred{"predict", "--model", p(model + ".glm"), "--out", p(model + "_preds.csv"),
                                      "--manifest", p("data/manifest.csv"), "--wavelength", "650", "--size", "16"};
        if (model == "M1") {
            pred.push_back("--features");
            pred.push_back(p("data/features.csv"));
        }
        const Result pr = run(pred);
        REQUIRE_MESSAGE(pr.code == cli::kOk, pr.err);
        const auto preds = read_predictions(p(model + "_preds.csv"));
        const auto rows = read_manifest(p("data/manifest.csv"));
        CHECK(preds.size() == static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) {
                  return r.wavelength_nm == 650 && r.split == Split::test;
              })));

        std::vector<std::string> ev{"evaluate",     "--preds", p(model + "_preds.csv"), "--out",
                                    p("metrics.csv"), "--model-name", model, "--wavelength", "650"};
        if (model == "M4")
            ev.push_back("--append");
        REQUIRE(run(ev).code == cli::kOk);
    }

    const Result c = run({"ceg", "--preds", p("M1_preds.csv"), "--svg", p("ceg.svg"), "--label", "650 nm Laser"});
    REQUIRE(c.code == cli::kOk);
    CHECK(c.out.rfind("650 nm Laser: ", 0) == 0);
    CHECK(slurp(p("ceg.svg")).find("</svg>") != std::string::npos);

    const Result rep = run({"report", "--metrics", p("metrics.csv"), "--out", p("report.csv")});
    REQUIRE(rep.code == cli::kOk);
    CHECK(rep.out.find("M4") != std::string::npos);
    CHECK(read_csv(p("report.csv")).rows.size() == 2);

    // Image models need a wavelength.
    CHECK(run({"train", "--model", "M1", "--out", p("x.glm"), "--manifest", p("data/manifest.csv"), "--features",
               p("data/features.csv")})
              .code == cli::kValidation);
}

TEST_CASE("voltage pipeline chain")
{
    ::unsetenv("GLUCOLENS_SEED");
    testing::TempDir dir("cli-volt");
    const auto p = [&](const std::string& name) { return (dir / name).string(); };
    REQUIRE(run({"gen-voltages", "--count", "120", "--out", p("v.csv")}).code == cli::kOk);
    for (const std::string model : {"LR", "MLR", "RFR"}) {
        const Result t = run({"train", "--mode", "voltage", "--model", model, "--data", p("v.csv"), "--out",
                              p(model + ".glm"), "--n-estimators", "10"});
        REQUIRE_MESSAGE(t.code == cli::kOk, t.err);
        const Result pr = run({"predict", "--mode", "voltage", "--model", p(model + ".glm"), "--data", p("v.csv"),
                               "--out", p(model + ".csv")});
        REQUIRE_MESSAGE(pr.code == cli::kOk, pr.err);
        CHECK(read_predictions(p(model + ".csv")).size() == 36);
    }
    CHECK(run({"train", "--mode", "voltage", "--model", "M1", "--data", p("v.csv"), "--out", p("x.glm")}).code ==
          cli::kValidation);
}

TEST_CASE("installed binary reports exit codes")
{
    const char* exe = std::getenv("GLUCOLENS_CLI");
    if (exe == nullptr)
        return;
    const std::string quiet = " >/dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system((std::string(exe) + " frob" + quiet).c_str())) == 2);
    CHECK(WEXITSTATUS(std::system((std::string(exe) + " featurize --manifest /nonexistent/m.csv --out /tmp/x" + quiet)
                                      .c_str())) == 3);
    CHECK(WEXITSTATUS(std::system((std::string(exe) + " --help" + quiet).c_str())) == 0);
}
