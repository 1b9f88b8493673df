#include <doctest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <string>

#include "parkcast/common/fingerprint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }

  // Runs the CLI with stdout captured to out.txt; returns the exit code.
  int run(const std::string& args) const {
    const std::string cmd = "cd '" + dir.string() + "' && '" PARKCAST_BIN "' " + args + " > out.txt 2> err.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string out() const { return parkcast::read_file(dir / "out.txt"); }
  std::string err() const { return parkcast::read_file(dir / "err.txt"); }
};

int lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("the full pipeline prints a four-row comparison table") {
  Workspace ws("parkcast_cli_full");
  REQUIRE(ws.run("--out o synth --noise 4") == 0);
  REQUIRE(ws.run("--out o join") == 0);
  REQUIRE(ws.run("--out o build-dataset") == 0);
  REQUIRE(ws.run("--out o evaluate") == 0);
  const auto table = parkcast::read_file(ws.dir / "o/report.txt");
  CHECK(lines(table) == 6);
  for (const char* name : {"Linear Regression", "SVR", "LSTM", "RFR"}) CHECK(table.find(name) != std::string::npos);
  CHECK(ws.out().find(table) != std::string::npos);

  REQUIRE(ws.run("--out o evaluate --from-report o/report.json") == 0);
  CHECK(ws.out() == table);

  REQUIRE(ws.run("--out o --format json train --family linear") == 0);
  const auto summary = json::parse(ws.out());
  CHECK(summary["stage"] == "train");
  CHECK(summary["summary"]["family"] == "linear");
}

TEST_CASE("reruns reproduce every artifact") {
  Workspace a("parkcast_cli_rerun_a"), b("parkcast_cli_rerun_b");
  for (const auto* ws : {&a, &b}) {
    REQUIRE(ws->run("--seed 9 --out o synth --noise 2") == 0);
    REQUIRE(ws->run("--seed 9 --out o join") == 0);
    REQUIRE(ws->run("--seed 9 --out o build-dataset") == 0);
    REQUIRE(ws->run("--seed 9 --out o train --family rfr") == 0);
  }
  for (const char* f : {"observations.csv", "joined.csv", "dataset.csv", "dataset.sidecar.json", "model.json"}) {
    CHECK(parkcast::read_file(a.dir / "o" / f) == parkcast::read_file(b.dir / "o" / f));
  }
}

TEST_CASE("analysis finds the planted afternoon recovery") {
  Workspace ws("parkcast_cli_analyze");
  REQUIRE(ws.run("--out o synth") == 0);
  REQUIRE(ws.run("--out o join") == 0);
  REQUIRE(ws.run("--out o build-dataset") == 0);
  REQUIRE(ws.run("--out o analyze") == 0);
  const auto report = json::parse(parkcast::read_file(ws.dir / "o/correlation.json"));
  bool found = false;
  for (const auto& c : report["correlations"]) {
    if (c["x"] == "hour") {
      found = true;
      CHECK(c["rho"].get<double>() > 0);
      CHECK(c["p_value"].get<double>() < 0.05);
    }
  }
  CHECK(found);
}

TEST_CASE("exit codes distinguish usage, validation and runtime failures") {
  Workspace ws("parkcast_cli_errors");
  CHECK(ws.run("--bogus") == 2);
  CHECK(ws.run("--format yaml synth") == 2);
  CHECK(ws.run("train --family xgboost") == 2);
  CHECK(ws.run("--out o join --campus missing.geojson") == 3);
  CHECK(ws.err().find("missing.geojson") != std::string::npos);
  parkcast::write_file(ws.dir / "bad.json", "{\"sede\": 3}");
  CHECK(ws.run("--config bad.json synth") == 3);
  parkcast::write_file(ws.dir / "raw.csv", "vehicle_key,lon,lat,timestamp_iso8601,speed_kmh\nv,999,0,2022-09-05T07:00:00Z,\n");
  CHECK(ws.run("--out o ingest --input raw.csv") == 3);
  CHECK(ws.run("--version") == 0);
  CHECK(ws.out().find("0.3.0") != std::string::npos);
}

TEST_CASE("environment variables stand in for flags") {
  Workspace ws("parkcast_cli_env");
  REQUIRE(ws.run("--out envout synth") == 0);
  CHECK(fs::exists(ws.dir / "envout/observations.csv"));
  const std::string cmd = "cd '" + ws.dir.string() + "' && PARKCAST_OUT=viaenv PARKCAST_SEED=3 '" PARKCAST_BIN
                          "' synth > /dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(ws.dir / "viaenv/observations.csv"));
  CHECK(parkcast::read_file(ws.dir / "viaenv/observations.csv") != parkcast::read_file(ws.dir / "envout/observations.csv"));
}
