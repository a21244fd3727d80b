#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "qdlab/report.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_qdcli;
fs::path g_base;

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const fs::path& p, const std::string& body) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << body;
}

RunResult run_cli(const std::string& args, const std::string& env = "") {
    static int seq = 0;
    fs::path so = g_base / ("stdout" + std::to_string(seq) + ".txt");
    fs::path se = g_base / ("stderr" + std::to_string(seq) + ".txt");
    ++seq;
    std::string cmd = env + (env.empty() ? "" : " ") + "\"" + g_qdcli + "\" " + args + " >" +
                      so.string() + " 2>" + se.string();
    int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(so);
    r.err = slurp(se);
    return r;
}

fs::path case_dir(const std::string& name) {
    fs::path d = g_base / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

const char* kSmallConfig = R"({
  "dimension": 2,
  "grid": {"h": 0.1, "half": [1.5, 1.0]},
  "measure": {"kind": "const_disk", "value": 1.0, "radius": 0.8},
  "solver": {"tol": 1e-9}
})";

const char* kEllipseConfig = R"({
  "dimension": 2,
  "grid": {"h": 0.1, "half": [6.4, 4.0]},
  "measure": {"kind": "ellipse_focal", "a": 5.0, "b": 3.0},
  "solver": {"tol": 1e-9}
})";

}  // namespace

TEST_CASE("config faults exit with code two and name the problem") {
    fs::path d = case_dir("badcfg");

    RunResult none = run_cli("solve --out " + d.string());
    CHECK(none.code == 2);
    CHECK(none.err.find("--config is required") != std::string::npos);

    fs::path absent = d / "absent.json";
    RunResult missing = run_cli("solve --config " + absent.string() + " --out " + d.string());
    CHECK(missing.code == 2);
    CHECK(missing.err.find("absent.json") != std::string::npos);

    fs::path broken = d / "broken.json";
    write_text(broken, "{ nope");
    RunResult bad = run_cli("solve --config " + broken.string() + " --out " + d.string());
    CHECK(bad.code == 2);
    CHECK(bad.err.find("invalid JSON") != std::string::npos);

    fs::path empty = d / "empty.json";
    write_text(empty, "{}");
    RunResult nodim = run_cli("solve --config " + empty.string() + " --out " + d.string());
    CHECK(nodim.code == 2);
    CHECK(nodim.err.find("dimension") != std::string::npos);

    fs::path relax = d / "relax.json";
    write_text(relax, R"({"dimension": 2, "grid": {"h": 0.1, "half": [1.5, 1.0]},
                          "measure": {"kind": "point", "mass": 1.0},
                          "solver": {"relax": 2.5}})");
    RunResult badrelax = run_cli("solve --config " + relax.string() + " --out " + d.string());
    CHECK(badrelax.code == 2);
    CHECK(badrelax.err.find("relax") != std::string::npos);

    fs::path wrongdim = d / "wrongdim.json";
    write_text(wrongdim, R"({"dimension": 3, "grid": {"h": 0.1, "half": [1.5, 1.5, 1.0]},
                             "measure": {"kind": "ellipse_focal", "a": 5.0, "b": 3.0}})");
    RunResult ellipse3 = run_cli("solve --config " + wrongdim.string() + " --out " + d.string());
    CHECK(ellipse3.code == 2);
    CHECK(ellipse3.err.find("dimension 2") != std::string::npos);
}

TEST_CASE("solve reports are byte identical across thread counts") {
    fs::path d = case_dir("threads");
    fs::path cfg = d / "cfg.json";
    write_text(cfg, kSmallConfig);

    std::string uref, jref;
    for (int t : {1, 2, 8}) {
        fs::path out = d / ("t" + std::to_string(t));
        fs::create_directories(out);
        RunResult r = run_cli("solve --config " + cfg.string() + " --out " + out.string() +
                              " --threads " + std::to_string(t));
        REQUIRE(r.code == 0);
        std::string u = slurp(out / "u.qdf");
        std::string j = slurp(out / "solve.json");
        REQUIRE(!u.empty());
        REQUIRE(!j.empty());
        if (t == 1) {
            uref = u;
            jref = j;
        } else {
            CHECK(u == uref);
            CHECK(j == jref);
        }
    }

    qdlab::Json rep = qdlab::read_json_file((d / "t1" / "solve.json").string());
    CHECK(rep.contains("config_hash"));
    CHECK(rep["solution"]["converged"].get<bool>());
    CHECK(rep["complementarity"].get<double>() <= 1e-9);
}

TEST_CASE("the output directory honors the environment override") {
    fs::path d = case_dir("envout");
    fs::path cfg = d / "cfg.json";
    write_text(cfg, kSmallConfig);
    fs::path envdir = d / "from_env";
    RunResult r = run_cli("solve --config " + cfg.string(),
                          "QDLAB_OUT=" + envdir.string());
    CHECK(r.code == 0);
    CHECK(fs::exists(envdir / "u.qdf"));
    CHECK(fs::exists(envdir / "solve.json"));
}

TEST_CASE("unconverged solves keep the report and exit three") {
    fs::path d = case_dir("stall");
    fs::path cfg = d / "cfg.json";
    write_text(cfg, R"({
      "dimension": 2,
      "grid": {"h": 0.1, "half": [1.5, 1.0]},
      "measure": {"kind": "const_disk", "value": 1.0, "radius": 0.8},
      "solver": {"tol": 1e-9, "max_sweeps": 2}
    })");
    RunResult r = run_cli("solve --config " + cfg.string() + " --out " + d.string());
    CHECK(r.code == 3);
    CHECK(r.err.find("did not converge") != std::string::npos);
    qdlab::Json rep = qdlab::read_json_file((d / "solve.json").string());
    CHECK(!rep["solution"]["converged"].get<bool>());
}

TEST_CASE("analytic surface checks gate exit four") {
    fs::path d = case_dir("check");
    fs::path fail = d / "cap.json";
    write_text(fail, R"({"dimension": 2, "grid": {"h": 0.1, "half": [1.5, 1.0]},
                         "surface": {"kind": "tall_cap"}})");
    RunResult r = run_cli("check --config " + fail.string() + " --out " + d.string());
    CHECK(r.code == 4);
    CHECK(r.err.find("criteria failed") != std::string::npos);
    CHECK(r.err.find("vii") != std::string::npos);
    CHECK(fs::exists(d / "criteria.json"));
    std::string csv = slurp(d / "criteria.csv");
    CHECK(csv.rfind("# config_hash=", 0) == 0);

    fs::path ok = d / "hemi.json";
    write_text(ok, R"({"dimension": 2, "grid": {"h": 0.1, "half": [1.5, 1.0]},
                       "surface": {"kind": "hemisphere", "R": 2.0}})");
    RunResult good = run_cli("check --config " + ok.string() + " --out " + d.string());
    CHECK(good.code == 0);
}

TEST_CASE("degree scans gate on conclusiveness") {
    fs::path d = case_dir("degree");
    fs::path shallow = d / "shallow.json";
    write_text(shallow, std::string(kEllipseConfig).insert(1, R"("degree": {"t_samples": [0.5]},)"));
    RunResult r = run_cli("degree --config " + shallow.string() + " --out " + d.string());
    CHECK(r.code == 6);
    CHECK(r.err.find("inconclusive") != std::string::npos);

    fs::path deep = d / "deep.json";
    write_text(deep, std::string(kEllipseConfig).insert(1, R"("degree": {"t_samples": [2.0, 4.0]},)"));
    RunResult good = run_cli("degree --config " + deep.string() + " --out " + d.string());
    CHECK(good.code == 0);
    CHECK(fs::exists(d / "degree.json"));
    CHECK(fs::exists(d / "mesh.csv"));
    qdlab::Json rep = qdlab::read_json_file((d / "degree.json").string());
    for (const auto& v : rep["degree"]["boundary_degrees"]) CHECK(v.get<int>() == -1);
}

TEST_CASE("schwarz residual bars gate exit five") {
    fs::path d = case_dir("schwarz");
    fs::path tight = d / "tight.json";
    write_text(tight, std::string(kEllipseConfig)
                          .insert(1, R"("tolerances": {"schwarz_residual_max": 1e-12},)"));
    RunResult r = run_cli("schwarz --config " + tight.string() + " --out " + d.string());
    CHECK(r.code == 5);
    CHECK(r.err.find("exceeds bar") != std::string::npos);

    fs::path plain = d / "plain.json";
    write_text(plain, kEllipseConfig);
    RunResult good = run_cli("schwarz --config " + plain.string() + " --out " + d.string());
    CHECK(good.code == 0);
    qdlab::Json rep = qdlab::read_json_file((d / "schwarz.json").string());
    CHECK(rep["cr"]["components_clean"]["max"].get<double>() <= 1.0);
    CHECK(rep["residual_bar"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("sphere balayage support violations exit seven") {
    fs::path d = case_dir("spherebal");
    fs::path touch = d / "touch.json";
    write_text(touch, R"({"dimension": 2, "grid": {"h": 0.1, "half": [1.5, 1.0]},
                          "measure": {"kind": "const_disk", "value": 1.0, "radius": 1.2},
                          "spherebal": {"R": 1.0}})");
    RunResult r = run_cli("spherebal --config " + touch.string() + " --out " + d.string());
    CHECK(r.code == 7);
    CHECK(r.err.find("support touches") != std::string::npos);

    fs::path ok = d / "ok.json";
    write_text(ok, R"({"dimension": 2, "grid": {"h": 0.1, "half": [1.5, 1.0]},
                       "measure": {"kind": "const_disk", "value": 1.0, "radius": 1.2},
                       "spherebal": {"R": 5.0}})");
    RunResult good = run_cli("spherebal --config " + ok.string() + " --out " + d.string());
    CHECK(good.code == 0);
    qdlab::Json rep = qdlab::read_json_file((d / "spherebal.json").string());
    CHECK(rep["mass_error"].get<double>() <= 1e-8);
    CHECK(fs::exists(d / "spherebal.csv"));
}

TEST_CASE("verify audits the config hash across every artifact") {
    fs::path d = case_dir("verify");
    fs::path cfg = d / "cfg.json";
    write_text(cfg, kEllipseConfig);
    fs::path out = d / "reports";
    fs::create_directories(out);
    RunResult g = run_cli("gamma --config " + cfg.string() + " --out " + out.string());
    REQUIRE(g.code == 0);
    CHECK(fs::exists(out / "gamma.json"));
    CHECK(fs::exists(out / "gamma.csv"));

    RunResult ver = run_cli("verify --out " + out.string());
    CHECK(ver.code == 0);
    CHECK(ver.out.find("gamma.json") != std::string::npos);
    CHECK(ver.out.find("gamma.csv") != std::string::npos);

    fs::path other = d / "othercfg.json";
    write_text(other, kSmallConfig);
    RunResult s = run_cli("solve --config " + other.string() + " --out " + out.string());
    REQUIRE(s.code == 0);
    RunResult bad = run_cli("verify --out " + out.string());
    CHECK(bad.code == 1);
    CHECK(bad.err.find("mismatch") != std::string::npos);

    qdlab::Json a = qdlab::read_json_file((out / "gamma.json").string());
    qdlab::Json b = qdlab::read_json_file((out / "solve.json").string());
    CHECK(a["config_hash"].get<std::string>() != b["config_hash"].get<std::string>());
}

int main(int argc, char** argv) {
    std::vector<char*> pass;
    pass.push_back(argv[0]);
    for (int i = 1; i < argc; ++i) {
        if (g_qdcli.empty() && argv[i][0] != '-') {
            g_qdcli = argv[i];
            continue;
        }
        pass.push_back(argv[i]);
    }
    if (g_qdcli.empty()) {
        std::fprintf(stderr, "usage: test_cli <path-to-qdcli> [doctest options]\n");
        return 64;
    }
    g_base = fs::temp_directory_path() / "qdcli_tests";
    fs::remove_all(g_base);
    fs::create_directories(g_base);
    doctest::Context ctx(static_cast<int>(pass.size()), pass.data());
    return ctx.run();
}
