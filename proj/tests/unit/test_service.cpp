#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include "unit/helpers.hpp"
#include "parkcast/common/error.hpp"
#include "parkcast/common/fingerprint.hpp"
#include "parkcast/pipeline/config.hpp"
#include "parkcast/pipeline/stages.hpp"
#include "parkcast/pipeline/synth.hpp"
#include "parkcast/service/http.hpp"
#include "parkcast/service/service.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>

using namespace parkcast;
using namespace parkcast::service;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

const Timestamp kDay = parse_iso8601("2022-09-08T00:00:00Z");

Timestamp at(int hour, int minute = 0) { return kDay + std::chrono::hours(hour) + std::chrono::minutes(minute); }

struct ManualClock {
  std::shared_ptr<Timestamp> now = std::make_shared<Timestamp>(at(6));
  ParkingService::Clock fn() const {
    return [n = now] { return *n; };
  }
};

// A linear model whose output is a per-segment constant: the numeric weights
// are zero and the one-hot weights carry the availability.
std::unique_ptr<ParkingService> fixed_service(const std::vector<double>& by_segment, std::map<int, int> occupancy = {},
                                              ParkingService::Clock clock = {}) {
  features::Sidecar sidecar;
  sidecar.encoder = features::FeatureEncoder(5, kDay, std::vector<double>(7, 1.0), std::vector<double>(7, 1.0));
  sidecar.dataset_csv_fingerprint = "0000000000000000";
  models::LinearParams p;
  p.weights = Eigen::VectorXd::Zero(12);
  for (int s = 0; s < 5; ++s) p.weights(7 + s) = by_segment[static_cast<std::size_t>(s)];
  models::RegressionModel m;
  m.family = models::Family::linear;
  m.parameters = p;
  m.feature_layout = {sidecar.encoder.columns(), sidecar.encoder.layout_hash(), sidecar.fingerprint()};
  m.train_fingerprint = "feedfacefeedface";
  ServiceOptions opts;
  opts.initial_occupancy = std::move(occupancy);
  return std::make_unique<ParkingService>(pipeline::synthetic_campus(), std::move(m), std::move(sidecar), opts,
                                          std::move(clock));
}

PredictionRequest request(int gate, Timestamp t, std::optional<int> segment = std::nullopt) {
  return {gate, t, segment};
}

// One vehicle as three sightings along `seg`, moving toward its gate when inbound.
std::vector<spatial::VehicleObservation> vehicle(const spatial::Segment& seg, const std::string& key, Timestamp t0,
                                                 bool inbound) {
  std::vector<spatial::VehicleObservation> out;
  const double fr[3] = {0.2, 0.5, 0.8};
  for (int i = 0; i < 3; ++i) {
    const double f = inbound ? fr[i] : fr[2 - i];
    out.push_back({key, testing::at_fraction(seg, f), t0 + std::chrono::seconds(20 * i), 25.0});
  }
  return out;
}

struct PipelineFixture {
  fs::path dir = fs::temp_directory_path() / "parkcast_service_fixture";
  ServiceConfig config;

  PipelineFixture() {
    fs::remove_all(dir);
    auto c = pipeline::PipelineConfig::from_json(
        nlohmann::ordered_json::parse(R"({"seed": 5, "hyperparameters": {"rfr": {"n_trees": 25}}, "synth": {"noise_m": 2.0}})"));
    c.out = dir;
    pipeline::run_synth(c);
    pipeline::run_join(c);
    pipeline::run_build_dataset(c);
    pipeline::run_train(c);
    config.model = dir / "model.json";
    config.sidecar = dir / "dataset.sidecar.json";
    config.campus = dir / "campus.geojson";
  }
  ~PipelineFixture() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("occupancy states follow the thresholds") {
  CHECK(occupancy_state(0.0) == OccupancyState::low);
  CHECK(occupancy_state(0.49) == OccupancyState::low);
  CHECK(occupancy_state(0.5) == OccupancyState::moderate);
  CHECK(occupancy_state(0.85) == OccupancyState::moderate);
  CHECK(occupancy_state(0.9) == OccupancyState::high);
  CHECK(occupancy_state(1.0) == OccupancyState::high);
  CHECK(occupancy_state(0.3, {0.2, 0.25}) == OccupancyState::high);
  CHECK_THROWS_AS(occupancy_state(1.01), DomainError);
  CHECK_THROWS_AS(occupancy_state(-0.1), DomainError);
  CHECK(to_string(OccupancyState::moderate) == "moderate");
}

TEST_CASE("sections report the campus layout") {
  const auto svc = fixed_service({0.5, 0.5, 0.5, 0.5, 0.5});
  const auto s = svc->sections();
  CHECK(s["total_capacity"] == 945);
  int sum = 0;
  for (const auto& sec : s["sections"]) sum += sec["capacity"].get<int>();
  CHECK(sum == 945);
  CHECK(s["sections"].size() == 3);
  CHECK(s["gates"].size() == 5);
  CHECK(s["sections"][0]["gates"] == json::array({1, 2}));
  CHECK(svc->health()["status"] == "ok");
  CHECK(svc->health()["model_fingerprint"] == "feedfacefeedface");
}

TEST_CASE("the section with most predicted vacancies wins") {
  // Gate 2 serves sections 1 and 2; segment 2 books into 1, segment 3 into 2.
  const auto svc = fixed_service({0.1, 0.5, 0.7, 0.2, 0.3});
  const auto r = svc->predict(request(2, at(9, 30)));
  REQUIRE(r.candidates.size() == 2);
  CHECK(r.candidates[0].section_id == 1);
  CHECK(r.candidates[0].segment_id == 2);
  CHECK(r.candidates[0].vacant == 158);
  CHECK(r.candidates[1].section_id == 2);
  CHECK(r.candidates[1].segment_id == 3);
  CHECK(r.candidates[1].vacant == 221);
  CHECK(r.recommended_section_id == 2);
  CHECK(r.predicted_availability == doctest::Approx(0.7));
  CHECK(r.occupancy_state == OccupancyState::low);
  CHECK(r.model_fingerprint == "feedfacefeedface");
  const auto one = svc->predict(request(1, at(9)));
  REQUIRE(one.candidates.size() == 1);
  CHECK(one.recommended_section_id == 1);
  CHECK(one.occupancy_state == OccupancyState::high);
}

TEST_CASE("equal vacancies go to the lowest section id") {
  const auto svc = fixed_service({0.5, 0.5, 0.5001, 0.5, 0.5});
  const auto r = svc->predict(request(2, at(8)));
  CHECK(r.candidates[0].vacant == r.candidates[1].vacant);
  CHECK(r.recommended_section_id == 1);
}

TEST_CASE("predictions are clamped to the unit interval") {
  const auto svc = fixed_service({1.4, -0.3, 0.5, 0.5, 0.5});
  CHECK(svc->predict(request(1, at(8))).predicted_vacant == 315);
  CHECK(svc->predict(request(1, at(8))).predicted_availability == 1.0);
  const auto r = svc->predict(request(2, at(8)));
  CHECK(r.candidates[0].availability == 0.0);
  CHECK(r.candidates[0].vacant == 0);
}

TEST_CASE("a requested segment is used for its own section") {
  const auto svc = fixed_service({0.1, 0.5, 0.7, 0.9, 0.3});
  const auto r = svc->predict(request(2, at(8), 1));
  CHECK(r.candidates[0].segment_id == 1);
  CHECK(r.candidates[1].segment_id == 3);
  CHECK_THROWS_AS(svc->predict(request(2, at(8), 8)), LookupError);
}

TEST_CASE("bad gates and hours are rejected with a helpful message") {
  const auto svc = fixed_service({0.5, 0.5, 0.5, 0.5, 0.5});
  try {
    svc->predict(request(9, at(9)));
    FAIL("expected LookupError");
  } catch (const LookupError& e) {
    CHECK(std::string(e.what()) == "unknown gate 9; valid gates: 1, 2, 3, 4, 5");
  }
  CHECK_THROWS_AS(svc->predict(request(1, at(2))), ArgumentError);
  CHECK_THROWS_AS(svc->predict(request(1, at(15))), ArgumentError);
  CHECK_NOTHROW(svc->predict(request(1, at(14, 59))));
  CHECK_NOTHROW(svc->predict(request(1, at(7))));
}

TEST_CASE("prediction requests are validated") {
  CHECK_THROWS_AS(PredictionRequest::from_json(json::parse(R"({"gate_id": "2", "arrival_time": "2022-09-08T09:00:00Z"})")),
                  SchemaError);
  CHECK_THROWS_AS(PredictionRequest::from_json(json::parse(R"({"gate_id": 2})")), SchemaError);
  CHECK_THROWS_AS(PredictionRequest::from_json(json::parse(R"({"gate_id": 2, "arrival_time": "soon"})")), SchemaError);
  CHECK_THROWS_AS(
      PredictionRequest::from_json(json::parse(R"({"gate_id": 2, "arrival_time": "2022-09-08T09:00:00Z", "x": 1})")),
      SchemaError);
  const auto r = PredictionRequest::from_json(json::parse(R"({"gate_id": 2, "arrival_time": "2022-09-08T09:00:00Z", "segment_id": 3})"));
  CHECK(r.segment_id == 3);
}

TEST_CASE("service answers match offline model predictions") {
  PipelineFixture fx;
  const auto svc = ParkingService::load(fx.config);
  const auto snap = svc->snapshot();
  for (int gate = 1; gate <= 5; ++gate) {
    for (int hour = 7; hour < 15; ++hour) {
      const auto r = svc->predict(request(gate, at(hour, 15)));
      for (const auto& c : r.candidates) {
        const features::FeatureRow row = svc->feature_row(c.segment_id, at(hour, 15), *snap);
        const auto frame = svc->sidecar().encoder.encode(std::span<const features::FeatureRow>(&row, 1));
        const double raw = models::predict(svc->model(), frame)(0);
        CHECK(c.availability == std::clamp(raw, 0.0, 1.0));
        CHECK(svc->campus().home_section(c.segment_id) == c.section_id);
      }
    }
  }
}

TEST_CASE("startup refuses a model trained on another sidecar") {
  PipelineFixture fx;
  auto text = read_file(fx.config.model);
  auto j = json::parse(text);
  j["feature_layout"]["sidecar_fingerprint"] = "0123456789abcdef";
  write_file(fx.config.model, j.dump(1));
  try {
    ParkingService::load(fx.config);
    FAIL("expected FingerprintMismatch");
  } catch (const FingerprintMismatch& e) {
    CHECK(e.actual() == features::Sidecar::parse(read_file(fx.config.sidecar)).fingerprint());
    CHECK(e.expected() == "0123456789abcdef");
  }
}

TEST_CASE("ingest moves the balance and records flows") {
  ManualClock clock;
  const auto svc = fixed_service({0.5, 0.5, 0.5, 0.5, 0.5}, {{1, 10}}, clock.fn());
  const auto segs = spatial::segment_roads(svc->campus());
  std::vector<spatial::VehicleObservation> batch;
  for (int v = 0; v < 3; ++v) {
    const auto obs = vehicle(segs[0], "in" + std::to_string(v), at(9, v), true);
    batch.insert(batch.end(), obs.begin(), obs.end());
  }
  *clock.now = at(9, 5);
  const auto r = svc->ingest(batch);
  CHECK(r.applied);
  CHECK(r.warnings.empty());
  CHECK(r.snapshot->find(1)->occupied == 13);
  CHECK(r.snapshot->version == 1);
  CHECK(r.snapshot->influx.at(1) == 3);
  CHECK(r.snapshot->flow_bucket == at(9));
  CHECK(svc->snapshot() == r.snapshot);
  // Flows from the current hour feed the prediction row.
  const auto row = svc->feature_row(1, at(9, 30), *svc->snapshot());
  CHECK(row.n_vehicles == 3);
  CHECK(svc->feature_row(1, at(10, 30), *svc->snapshot()).n_vehicles == 0);
}

TEST_CASE("departures from an empty section clamp at zero with a warning") {
  const auto svc = fixed_service({0.5, 0.5, 0.5, 0.5, 0.5});
  const auto segs = spatial::segment_roads(svc->campus());
  const auto r = svc->ingest(vehicle(segs[0], "out", at(10), false));
  CHECK(r.applied);
  CHECK(r.snapshot->find(1)->occupied == 0);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("clamped") != std::string::npos);
  CHECK(r.snapshot->outflux.at(1) == 1);
}

TEST_CASE("an empty batch advances the timestamp only") {
  ManualClock clock;
  const auto svc = fixed_service({0.5, 0.5, 0.5, 0.5, 0.5}, {{2, 100}}, clock.fn());
  const auto before = svc->snapshot();
  *clock.now = at(11);
  const auto r = svc->ingest({});
  CHECK(r.applied);
  CHECK(r.snapshot->version == before->version + 1);
  CHECK(r.snapshot->timestamp == at(11));
  CHECK(r.snapshot->find(2)->occupied == 100);
  *clock.now = at(8);
  CHECK(svc->ingest({}).snapshot->timestamp == at(11));
}

TEST_CASE("a batch with any bad row changes nothing") {
  const auto svc = fixed_service({0.5, 0.5, 0.5, 0.5, 0.5}, {{1, 10}});
  const auto segs = spatial::segment_roads(svc->campus());
  auto batch = vehicle(segs[0], "a", at(9), true);
  batch[1].point.lon = 500;
  const auto before = svc->snapshot();
  const auto r = svc->ingest(batch);
  CHECK_FALSE(r.applied);
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].row == 1);
  CHECK(svc->snapshot() == before);

  auto swapped = vehicle(segs[0], "b", at(9), true);
  std::swap(swapped[0], swapped[2]);
  const auto r2 = svc->ingest(swapped);
  CHECK_FALSE(r2.applied);
  CHECK(svc->snapshot()->version == 0);
  CHECK(svc->snapshot()->find(1)->occupied == 10);
}

TEST_CASE("identical queries between ingests give identical answers") {
  const auto svc = fixed_service({0.2, 0.4, 0.6, 0.8, 0.3});
  const auto a = svc->predict(request(4, at(12))).to_json();
  const auto b = svc->predict(request(4, at(12))).to_json();
  CHECK(a == b);
  svc->ingest({});
  const auto c = svc->predict(request(4, at(12))).to_json();
  CHECK(c["snapshot_version"] == 1);
  CHECK(c["recommended_section_id"] == a["recommended_section_id"]);
}

TEST_CASE("readers never observe a half-applied ingest") {
  const auto svc = fixed_service({0.5, 0.5, 0.5, 0.5, 0.5}, {{1, 10}});
  const auto segs = spatial::segment_roads(svc->campus());
  std::atomic<bool> done{false};
  std::atomic<int> torn{0}, reads{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 3; ++t) {
    readers.emplace_back([&] {
      while (!done) {
        const auto snap = svc->snapshot();
        // Every batch adds exactly two vehicles to section 1.
        if (snap->find(1)->occupied != 10 + 2 * static_cast<int>(snap->version)) ++torn;
        const auto r = svc->predict(request(1, at(9)));
        if (r.snapshot_version > svc->snapshot()->version) ++torn;
        ++reads;
      }
    });
  }
  while (reads == 0) std::this_thread::yield();
  for (int b = 0; b < 60; ++b) {
    std::this_thread::yield();
    auto batch = vehicle(segs[0], "x" + std::to_string(b), at(9), true);
    const auto more = vehicle(segs[0], "y" + std::to_string(b), at(9, 1), true);
    batch.insert(batch.end(), more.begin(), more.end());
    CHECK(svc->ingest(batch).applied);
  }
  done = true;
  for (auto& t : readers) t.join();
  CHECK(torn == 0);
  CHECK(reads > 0);
  CHECK(svc->snapshot()->find(1)->occupied == 130);
}

TEST_CASE("observation batches parse from either shape") {
  const auto arr = parse_observation_batch(json::parse(
      R"([{"vehicle_key": "a", "lon": 55.48, "lat": 25.285, "timestamp": "2022-09-08T09:00:00Z"},
          {"vehicle_key": "b", "lon": "x", "lat": 25.285, "timestamp": "2022-09-08T09:00:00Z"}])"));
  CHECK(arr.observations.size() == 1);
  REQUIRE(arr.errors.size() == 1);
  CHECK(arr.errors[0].row == 1);
  const auto obj = parse_observation_batch(json::parse(R"({"observations": []})"));
  CHECK(obj.observations.empty());
  CHECK_THROWS_AS(parse_observation_batch(json::parse(R"({"rows": []})")), SchemaError);
}

TEST_CASE("the HTTP front end serves the endpoints") {
  const auto svc = fixed_service({0.1, 0.5, 0.7, 0.2, 0.3}, {{1, 10}});
  HttpServer server(*svc, "http://localhost:5173");
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread th([&] { server.serve(); });
  httplib::Client cli("127.0.0.1", port);
  for (int i = 0; i < 100 && !server.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));

  auto health = cli.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["model_fingerprint"] == "feedfacefeedface");
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");

  auto sections = cli.Get("/sections");
  REQUIRE(sections);
  CHECK(json::parse(sections->body)["total_capacity"] == 945);

  auto ok = cli.Post("/predict", R"({"gate_id": 2, "arrival_time": "2022-09-08T09:30:00Z"})", "application/json");
  REQUIRE(ok);
  CHECK(ok->status == 200);
  CHECK(json::parse(ok->body)["recommended_section_id"] == 2);

  auto unknown = cli.Post("/predict", R"({"gate_id": 9, "arrival_time": "2022-09-08T09:30:00Z"})", "application/json");
  REQUIRE(unknown);
  CHECK(unknown->status == 422);
  CHECK(json::parse(unknown->body)["error"] == "unknown gate 9; valid gates: 1, 2, 3, 4, 5");

  auto night = cli.Post("/predict", R"({"gate_id": 2, "arrival_time": "2022-09-08T02:00:00Z"})", "application/json");
  REQUIRE(night);
  CHECK(night->status == 422);

  auto garbled = cli.Post("/predict", "{gate", "application/json");
  REQUIRE(garbled);
  CHECK(garbled->status == 400);

  auto pre = cli.Options("/predict");
  REQUIRE(pre);
  CHECK(pre->status == 204);
  CHECK(pre->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

  const auto segs = spatial::segment_roads(svc->campus());
  json rows = json::array();
  for (const auto& o : vehicle(segs[0], "h1", at(9), true)) {
    rows.push_back({{"vehicle_key", o.vehicle_key}, {"lon", o.point.lon}, {"lat", o.point.lat},
                    {"timestamp", format_iso8601(o.timestamp)}, {"speed_kmh", 25}});
  }
  auto ingest = cli.Post("/observations", json{{"observations", rows}}.dump(), "application/json");
  REQUIRE(ingest);
  CHECK(ingest->status == 200);
  CHECK(json::parse(ingest->body)["snapshot"]["version"] == 1);

  rows[1]["lat"] = 999;
  auto bad = cli.Post("/observations", rows.dump(), "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 422);
  CHECK(json::parse(bad->body)["rows"][0]["row"] == 1);

  auto occ = cli.Get("/occupancy");
  REQUIRE(occ);
  const auto body = json::parse(occ->body);
  CHECK(body["version"] == 1);
  CHECK(body["sections"][0]["occupied"] == 11);
  CHECK(body["thresholds"]["low"] == 0.5);

  server.stop();
  th.join();
}
