#pragma once

#include <memory>
#include <string>

#include "parkcast/service/service.hpp"

namespace parkcast::service {

// JSON-over-HTTP front end for a ParkingService.
//   GET  /health        GET /sections      GET /occupancy
//   POST /predict       POST /observations
// Validation failures answer 422, malformed JSON 400, model failures 500.
class HttpServer {
public:
  HttpServer(ParkingService& service, std::string cors_origin = "*");
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds without serving; port 0 picks a free port. Returns the bound port
  // or throws Error.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void serve();
  void stop();
  bool running() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Parses the POST /observations body: either an array of rows or an object
// with an "observations" array. Rows carry vehicle_key, lon, lat, timestamp
// and an optional speed_kmh. Rows that cannot be read land in `errors` with
// their index. Throws SchemaError when the body has neither shape.
spatial::ObservationParse parse_observation_batch(const nlohmann::json& body);

}  // namespace parkcast::service
