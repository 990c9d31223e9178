#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "cwlate/inference.hpp"
#include "cwlate/simulation.hpp"
#include "doctest.h"

using json = nlohmann::json;
using namespace cwlate;

namespace {

std::string cli_path() {
    const char* p = std::getenv("CLI_PATH");
    REQUIRE(p != nullptr);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_sharp_csv(const std::string& path) {
    std::ofstream f(path);
    f << "y,x,z,cell\n";
    for (int i = 0; i < 60; ++i) {
        const double z = (i % 2 ? 1.0 : -1.0) * (0.02 + 0.02 * (i / 2));
        const double x = z >= 0 ? 1.0 : 0.0;
        const double y = z >= 0 ? 3.0 + 0.1 * z : 1.0 + 0.1 * z;
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,a\n", y, x, z);
        f << buf;
    }
}

void write_dataset_csv(const std::string& path, const RddDataset& d) {
    std::ofstream f(path);
    f << "y,x,z,cell\n";
    char buf[160];
    for (std::size_t i = 0; i < d.n(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,", d.y[i], d.x[i], d.z[i]);
        f << buf << d.cell[i] << "\n";
    }
}

}  // namespace

TEST_CASE("estimate on a sharp step reproduces the outcome jump") {
    const std::string in = "/tmp/cwlate_sharp.csv";
    const std::string out = "/tmp/cwlate_sharp.json";
    write_sharp_csv(in);
    REQUIRE(run_cli("estimate --input " + in + " --h 1.0 --output " + out) == 0);
    json doc = json::parse(slurp(out));
    REQUIRE(doc["results"].size() == 1);
    const auto& row = doc["results"][0];
    CHECK(row["beta_hat"].get<double>() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(row["se"].get<double>() >= 0.0);
    CHECK(row["cells"][0]["delta_x"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("single cell makes every estimand coincide") {
    const std::string in = "/tmp/cwlate_sharp.csv";
    const std::string out = "/tmp/cwlate_two.json";
    write_sharp_csv(in);
    REQUIRE(run_cli("estimate --input " + in +
                    " --estimand cwlate --estimand unconditional_wald --h 1.0 --output " +
                    out) == 0);
    json doc = json::parse(slurp(out));
    REQUIRE(doc["results"].size() == 2);
    CHECK(doc["results"][0]["beta_hat"].get<double>() ==
          doctest::Approx(doc["results"][1]["beta_hat"].get<double>()).epsilon(1e-12));
    CHECK(doc.contains("selection_on_gains"));
}

TEST_CASE("standard errors shrink as the window widens") {
    McConfig cfg;
    cfg.alpha_dw = 1.0;
    cfg.beta_xw = 2.0;
    cfg.n = 10000;
    cfg.seed = 404;
    RddDataset d = dgp_sample(cfg, 0);
    const std::string in = "/tmp/cwlate_sim.csv";
    const std::string out = "/tmp/cwlate_grid.json";
    write_dataset_csv(in, d);
    REQUIRE(run_cli("estimate --input " + in +
                    " --estimand cwlate --h 0.2 --h 0.4 --h 0.8 --output " + out) == 0);
    json doc = json::parse(slurp(out));
    REQUIRE(doc["results"].size() == 3);
    const double s0 = doc["results"][0]["se"].get<double>();
    const double s1 = doc["results"][1]["se"].get<double>();
    const double s2 = doc["results"][2]["se"].get<double>();
    CHECK(s0 > s1);
    CHECK(s1 > s2);
}

TEST_CASE("csv round trip matches the in-memory estimate bit for bit") {
    McConfig cfg;
    cfg.alpha_dw = 1.0;
    cfg.beta_xw = 2.0;
    cfg.n = 3000;
    cfg.seed = 17;
    RddDataset d = dgp_sample(cfg, 1);
    const std::string in = "/tmp/cwlate_round.csv";
    const std::string out = "/tmp/cwlate_round.json";
    write_dataset_csv(in, d);
    REQUIRE(run_cli("estimate --input " + in + " --h 0.5 --b 0.7 --output " + out) == 0);
    json doc = json::parse(slurp(out));

    CellPartition part = build_partition(d, 5);
    RbcEstimate ref = rbc_estimate(d, part, EstimandSpec{EstimandKind::cwlate}, 0.5, 0.7,
                                   KernelSpec{});
    CHECK(doc["results"][0]["beta_hat"].get<double>() == ref.beta_hat);
    CHECK(doc["results"][0]["beta_bc"].get<double>() == ref.beta_bc);
    CHECK(doc["results"][0]["se"].get<double>() == std::sqrt(ref.var_rbc));
}

TEST_CASE("bandwidth reports are byte-identical across runs") {
    const std::string in = "/tmp/cwlate_sim.csv";
    if (!std::ifstream(in).good()) {
        McConfig cfg;
        cfg.n = 10000;
        cfg.seed = 404;
        write_dataset_csv(in, dgp_sample(cfg, 0));
    }
    REQUIRE(run_cli("bandwidth --input " + in + " --output /tmp/cwlate_bw1.json") == 0);
    REQUIRE(run_cli("bandwidth --input " + in + " --output /tmp/cwlate_bw2.json") == 0);
    CHECK(slurp("/tmp/cwlate_bw1.json") == slurp("/tmp/cwlate_bw2.json"));
    json doc = json::parse(slurp("/tmp/cwlate_bw1.json"));
    CHECK(doc["h_n"].get<double>() > 0.0);
    CHECK(doc["b_n"].get<double>() > 0.0);
}

TEST_CASE("policy subcommand") {
    REQUIRE(run_cli("policy --p 1,0 --f 0.5,0.5 --delta-x 0.5,0.2 --beta 4,0 "
                    "--output /tmp/cwlate_pol.json") == 0);
    json doc = json::parse(slurp("/tmp/cwlate_pol.json"));
    CHECK(doc["lape"].get<double>() == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(doc["p_c"].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(doc["ape"].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("schema violations exit nonzero") {
    const std::string in = "/tmp/cwlate_sharp.csv";
    write_sharp_csv(in);
    CHECK(run_cli("estimate --input " + in + " --y missing --h 1.0 --output /dev/null") != 0);
    CHECK(run_cli("estimate --input /tmp/does_not_exist.csv --h 1.0 --output /dev/null") != 0);
    CHECK(run_cli("estimate --input " + in + " --output /dev/null") != 0);  // no h, no auto
}

TEST_CASE("csv output format") {
    const std::string in = "/tmp/cwlate_sharp.csv";
    const std::string out = "/tmp/cwlate_table.csv";
    write_sharp_csv(in);
    REQUIRE(run_cli("estimate --input " + in + " --h 1.0 --format csv --output " + out) == 0);
    std::string text = slurp(out);
    CHECK(text.find("estimand") != std::string::npos);
    CHECK(text.find("cwlate") != std::string::npos);
}
