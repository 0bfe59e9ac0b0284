#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

std::string cli_path() { return FILIPPOV_CLI_PATH; }

struct RunResult {
    int exit_code = -1;
    std::string stdout_text;
};

RunResult run_cli(const std::string& args) {
    std::string out_file = std::string(std::tmpnam(nullptr)) + ".out";
    std::string cmd = cli_path() + " " + args + " > " + out_file + " 2>/dev/null";
    int rc = std::system(cmd.c_str());
    RunResult res;
    res.exit_code = WEXITSTATUS(rc);
    std::ifstream in(out_file, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    res.stdout_text = ss.str();
    std::remove(out_file.c_str());
    return res;
}

std::string strip_timestamp(const std::string& json_text) {
    std::string out;
    std::stringstream ss(json_text);
    std::string line;
    while (std::getline(ss, line))
        if (line.find("\"timestamp\"") == std::string::npos) out += line + "\n";
    return out;
}

}  // namespace

TEST_CASE("classify emits one CSV row per sample, all sliding for z1") {
    RunResult res = run_cli("classify --scenario z1 --surface 0 --samples 64");
    REQUIRE(res.exit_code == 0);
    std::stringstream ss(res.stdout_text);
    std::string line;
    std::getline(ss, line);
    CHECK(line == "param,x,y,f_plus_h,f_minus_h,label");
    int rows = 0;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        CHECK(line.find("sliding") != std::string::npos);
        ++rows;
    }
    CHECK(rows == 64);
}

TEST_CASE("density-solve emits the normalized stripe densities") {
    RunResult res = run_cli(
        "density-solve --stripes '{\"mode\":\"torus\",\"b\":[1,2,4]}'");
    REQUIRE(res.exit_code == 0);
    nlohmann::json doc = nlohmann::json::parse(res.stdout_text);
    CHECK(doc.at("schema_version") == 1);
    CHECK(doc.at("feasible") == true);
    auto alpha = doc.at("alpha");
    REQUIRE(alpha.size() == 3);
    CHECK(alpha[0].get<double>() == Catch::Approx(12.0 / 7.0).margin(1e-14));
    CHECK(alpha[1].get<double>() == Catch::Approx(6.0 / 7.0).margin(1e-14));
    CHECK(alpha[2].get<double>() == Catch::Approx(3.0 / 7.0).margin(1e-14));
}

TEST_CASE("missing subcommand is a usage error") {
    RunResult res = run_cli("");
    CHECK(res.exit_code == 2);
}

TEST_CASE("unknown scenario produces machine-readable error JSON and exit 1") {
    RunResult res = run_cli("classify --scenario nope --surface 0 --samples 16");
    CHECK(res.exit_code == 1);
    nlohmann::json doc = nlohmann::json::parse(res.stdout_text);
    CHECK(doc.at("error").at("kind") == "unknown-name");
}

TEST_CASE("outputs are byte-identical across reruns (timestamp excluded)") {
    std::vector<std::string> commands = {
        "density-solve --stripes '{\"mode\":\"torus\",\"b\":[1,2,4]}'",
        "return-map --scenario foldfold_center --point 0,0 --offsets 0.1,0.2",
        "satnz --scenario ex42 --grid 12x12 --horizon 2",
        "flowset --scenario z1 --box 0,0.3,0.2,0.5 --time 1 --res 6",
        "catalog",
    };
    for (const auto& cmd : commands) {
        RunResult a = run_cli(cmd);
        RunResult b = run_cli(cmd);
        REQUIRE(a.exit_code == 0);
        REQUIRE(b.exit_code == 0);
        CHECK(strip_timestamp(a.stdout_text) == strip_timestamp(b.stdout_text));
    }
}

TEST_CASE("config echo carries the resolved run configuration") {
    RunResult res = run_cli("satnz --scenario ex42 --grid 8x8 --horizon 2");
    REQUIRE(res.exit_code == 0);
    nlohmann::json doc = nlohmann::json::parse(res.stdout_text);
    CHECK(doc.at("config").at("scenario") == "ex42");
    CHECK(doc.at("config").at("grid") == "8x8");
    CHECK(doc.at("config").at("horizon") == 2.0);
    CHECK(doc.at("fraction") == 1.0);
}

TEST_CASE("integrate writes trajectory CSV and SVG") {
    std::string csv = std::string(std::tmpnam(nullptr)) + ".csv";
    std::string svg = std::string(std::tmpnam(nullptr)) + ".svg";
    RunResult res = run_cli("integrate --scenario z1 --start 0,0.5 --time 2 --policy det --out " +
                            csv + " --svg " + svg);
    REQUIRE(res.exit_code == 0);
    std::ifstream in(csv);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x,y,mode,branch_id");
    bool has_sliding = false;
    std::string line;
    while (std::getline(in, line))
        if (line.find("sliding") != std::string::npos) has_sliding = true;
    CHECK(has_sliding);
    std::ifstream svg_in(svg);
    REQUIRE(svg_in.good());
    std::string first;
    std::getline(svg_in, first);
    CHECK(first.find("xml") != std::string::npos);
    std::remove(csv.c_str());
    std::remove(svg.c_str());
}

TEST_CASE("check-measure reports the z2 discrepancy pair") {
    RunResult printed = run_cli("check-measure --scenario z2_as_printed");
    REQUIRE(printed.exit_code == 0);
    nlohmann::json doc = nlohmann::json::parse(printed.stdout_text);
    CHECK(doc.at("verdict") == "violation-detected");

    RunResult fixed = run_cli("check-measure --scenario z2_refractive");
    nlohmann::json doc2 = nlohmann::json::parse(fixed.stdout_text);
    CHECK(doc2.at("verdict") == "consistent-with-invariance");
}

TEST_CASE("check-measure can attach stripe balance densities") {
    RunResult res = run_cli("check-measure --scenario striped_torus_lebesgue "
                            "--density-from-prop41");
    REQUIRE(res.exit_code == 0);
    nlohmann::json doc = nlohmann::json::parse(res.stdout_text);
    CHECK(doc.at("verdict") == "consistent-with-invariance");
}
