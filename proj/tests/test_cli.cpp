// End-to-end checks of the command-line tool: spawns the installed binary
// (path in the CAPMIN_CLI environment variable) and inspects its outputs.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string cli_path() {
    const char* env = std::getenv("CAPMIN_CLI");
    REQUIRE_MESSAGE(env != nullptr, "CAPMIN_CLI must point at the capmin binary");
    return env;
}

int run(const std::string& args) {
    const std::string command = cli_path() + " " + args + " >cli_stdout.txt 2>cli_stderr.txt";
    const int status = std::system(command.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct CsvRow {
    long iter;
    double lower, upper, gap, seconds;
};

std::vector<CsvRow> read_bounds_csv(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "iter,c_lower_bits,c_upper_bits,gap_bits,seconds");
    std::vector<CsvRow> rows;
    while (std::getline(in, line)) {
        CsvRow row{};
        REQUIRE(std::sscanf(line.c_str(), "%ld,%lf,%lf,%lf,%lf", &row.iter, &row.lower,
                            &row.upper, &row.gap, &row.seconds) == 5);
        rows.push_back(row);
    }
    return rows;
}

struct TempDir {
    fs::path previous = fs::current_path();
    fs::path dir;
    TempDir() {
        dir = fs::temp_directory_path() / "capmin_cli_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
        fs::current_path(dir);
    }
    ~TempDir() {
        fs::current_path(previous);
        fs::remove_all(dir);
    }
};

} // namespace

TEST_CASE("generate then solve: records, csv and exit codes") {
    TempDir tmp;
    REQUIRE(run("generate planar 8 4 proc.json") == 0);
    REQUIRE(run("solve proc.json --xi 1e-6 --threads 1") == 0);

    json record = json::parse(slurp("proc.record.json"));
    CHECK(record["schema"] == 1);
    CHECK(record["result"]["converged"] == true);
    CHECK(record["result"]["termination"] == "converged");
    const double value = record["result"]["value_bits"].get<double>();
    CHECK(value > 1.12);
    CHECK(value < 1.14);
    CHECK(record["config"]["xi_bits"].get<double>() == 1e-6);
    CHECK(record["result"]["history"].size() ==
          record["result"]["iterations"].get<std::size_t>());

    // Run records survive a serialization round trip unchanged.
    json reparsed = json::parse(record.dump());
    CHECK(reparsed == record);

    std::vector<CsvRow> rows = read_bounds_csv("proc.bounds.csv");
    REQUIRE_FALSE(rows.empty());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].lower <= rows[i].upper + 1e-12);
        if (i > 0) CHECK(rows[i].upper <= rows[i - 1].upper + 1e-9);
    }
    CHECK(rows.back().gap <= 1e-6);
}

TEST_CASE("malformed process files exit with code 2 and name the bad row") {
    TempDir tmp;
    {
        std::ofstream out("malformed.json");
        out << R"({"schema":1,"num_inputs":1,"num_measurements":1,"num_outcomes":2,)"
            << R"("prob":[0.5,0.4]})";
    }
    CHECK(run("solve malformed.json") == 2);
    const std::string err = slurp("cli_stderr.txt");
    CHECK(err.find("(a=0, b=0)") != std::string::npos);

    CHECK(run("solve missing.json") == 2);
    {
        std::ofstream out("garbage.json");
        out << "not json at all";
    }
    CHECK(run("solve garbage.json") == 2);
}

TEST_CASE("usage errors exit with code 1") {
    TempDir tmp;
    CHECK(run("") == 1);
    CHECK(run("frobnicate") == 1);
    CHECK(run("generate planar") == 1);
    CHECK(run("solve") == 1);
}

TEST_CASE("budget failures exit with code 3") {
    TempDir tmp;
    REQUIRE(run("generate planar 4 40 big.json") == 0);
    CHECK(run("solve big.json") == 3);
}

TEST_CASE("nonplanar generation reports merged dimensions") {
    TempDir tmp;
    REQUIRE(run("generate nonplanar 4 np.json") == 0);
    const std::string out = slurp("cli_stdout.txt");
    CHECK(out.find("|A|=18") != std::string::npos);
    CHECK(out.find("|B|=9") != std::string::npos);
    CHECK(run("generate nonplanar 5 odd.json") == 2);
}

TEST_CASE("capacity subcommand on a channel file") {
    TempDir tmp;
    {
        std::ofstream out("bsc.json");
        out << R"({"num_inputs":2,"num_outputs":2,"prob":[0.89,0.11,0.11,0.89]})";
    }
    REQUIRE(run("capacity bsc.json --tol 1e-9") == 0);
    const std::string out = slurp("cli_stdout.txt");
    CHECK(out.find("capacity 0.5") != std::string::npos); // 1 - H2(0.11) = 0.5002...
    CHECK(run("capacity missing.json") == 2);
}

TEST_CASE("oracle subcommand") {
    TempDir tmp;
    REQUIRE(run("generate planar 4 2 small.json") == 0);
    REQUIRE(run("oracle small.json --tol 1e-6") == 0);
    const std::string out = slurp("cli_stdout.txt");
    CHECK(out.find("complexity 1.000") != std::string::npos);
    // Oversized instances are a validation failure.
    REQUIRE(run("generate planar 8 4 large.json") == 0);
    CHECK(run("oracle large.json") == 2);
}

TEST_CASE("bench writes the timing csv") {
    TempDir tmp;
    REQUIRE(run("bench planar --bmin 3 --bmax 4 --repeats 1 --out sweep.csv") == 0);
    std::ifstream in("sweep.csv");
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "num_measurements,seconds,value_bits");
    int rows = 0;
    for (std::string line; std::getline(in, line);) {
        int b = 0;
        double seconds = 0, value = 0;
        REQUIRE(std::sscanf(line.c_str(), "%d,%lf,%lf", &b, &seconds, &value) == 3);
        CHECK(seconds > 0.0);
        CHECK(value > 0.9);
        ++rows;
    }
    CHECK(rows == 2);
}

TEST_CASE("rerunning solve reproduces the value bit-exactly") {
    TempDir tmp;
    REQUIRE(run("generate planar 12 6 proc.json") == 0);
    REQUIRE(run("solve proc.json --threads 2 --record a.json --csv a.csv") == 0);
    REQUIRE(run("solve proc.json --threads 2 --record b.json --csv b.csv") == 0);
    const json a = json::parse(slurp("a.json"));
    const json b = json::parse(slurp("b.json"));
    CHECK(a["result"]["value_bits"].dump() == b["result"]["value_bits"].dump());
    CHECK(a["result"]["history"].size() == b["result"]["history"].size());
}
