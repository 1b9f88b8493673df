#include "parkcast/service/http.hpp"

#include <httplib.h>

#include "parkcast/common/error.hpp"

namespace parkcast::service {

using nlohmann::json;
using nlohmann::ordered_json;

spatial::ObservationParse parse_observation_batch(const json& body) {
  const json* rows = nullptr;
  if (body.is_array()) {
    rows = &body;
  } else if (body.is_object() && body.contains("observations") && body["observations"].is_array()) {
    rows = &body["observations"];
  } else {
    throw SchemaError("expected an array of observations or an object with an \"observations\" array");
  }
  spatial::ObservationParse out;
  for (std::size_t i = 0; i < rows->size(); ++i) {
    const json& r = (*rows)[i];
    try {
      if (!r.is_object()) throw SchemaError("row is not an object");
      spatial::VehicleObservation obs;
      obs.vehicle_key = r.at("vehicle_key").get<std::string>();
      obs.point = {r.at("lon").get<double>(), r.at("lat").get<double>()};
      obs.timestamp = parse_iso8601(r.at("timestamp").get<std::string>());
      if (r.contains("speed_kmh") && !r["speed_kmh"].is_null()) obs.speed_kmh = r["speed_kmh"].get<double>();
      out.observations.push_back(std::move(obs));
    } catch (const json::exception& e) {
      out.errors.push_back({i, e.what()});
    } catch (const Error& e) {
      out.errors.push_back({i, e.what()});
    }
  }
  return out;
}

struct HttpServer::Impl {
  ParkingService& service;
  std::string cors_origin;
  httplib::Server server;
  int port = 0;

  Impl(ParkingService& s, std::string origin) : service(s), cors_origin(std::move(origin)) {}
};

namespace {

void reply(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

ordered_json error_body(const std::string& message) { return {{"error", message}}; }

template <typename F>
void guarded(httplib::Response& res, const std::string& fingerprint, F&& body) {
  try {
    body();
  } catch (const json::parse_error& e) {
    reply(res, 400, error_body(std::string("malformed JSON: ") + e.what()));
  } catch (const InputError& e) {
    reply(res, 422, error_body(e.what()));
  } catch (const LookupError& e) {
    reply(res, 422, error_body(e.what()));
  } catch (const ArgumentError& e) {
    reply(res, 422, error_body(e.what()));
  } catch (const std::exception& e) {
    auto b = error_body(e.what());
    b["model_fingerprint"] = fingerprint;
    reply(res, 500, b);
  }
}

}  // namespace

HttpServer::HttpServer(ParkingService& service, std::string cors_origin)
    : impl_(std::make_unique<Impl>(service, std::move(cors_origin))) {
  auto& svr = impl_->server;
  auto* impl = impl_.get();
  svr.set_default_headers({{"Access-Control-Allow-Origin", impl->cors_origin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  svr.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  svr.Get("/health", [impl](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, impl->service.health());
  });
  svr.Get("/sections", [impl](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, impl->service.sections());
  });
  svr.Get("/occupancy", [impl](const httplib::Request&, httplib::Response& res) {
    auto body = impl->service.snapshot()->to_json();
    const auto& t = impl->service.options().thresholds;
    body["thresholds"] = {{"low", t.low}, {"high", t.high}};
    reply(res, 200, body);
  });
  svr.Post("/predict", [impl](const httplib::Request& req, httplib::Response& res) {
    guarded(res, impl->service.model_fingerprint(), [&] {
      const auto request = PredictionRequest::from_json(json::parse(req.body));
      reply(res, 200, impl->service.predict(request).to_json());
    });
  });
  svr.Post("/observations", [impl](const httplib::Request& req, httplib::Response& res) {
    guarded(res, impl->service.model_fingerprint(), [&] {
      const auto parsed = parse_observation_batch(json::parse(req.body));
      std::vector<spatial::RowError> errors = parsed.errors;
      IngestResult result;
      if (errors.empty()) {
        result = impl->service.ingest(parsed.observations);
        errors = result.errors;
      }
      if (!errors.empty()) {
        ordered_json list = ordered_json::array();
        for (const auto& e : errors) list.push_back({{"row", e.row}, {"error", e.message}});
        ordered_json body = error_body("batch rejected; no rows were applied");
        body["rows"] = std::move(list);
        reply(res, 422, body);
        return;
      }
      reply(res, 200, {{"applied", true},
                       {"accepted", parsed.observations.size()},
                       {"warnings", result.warnings},
                       {"snapshot", result.snapshot->to_json()}});
    });
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
    if (impl_->port < 0) throw Error("cannot bind " + host);
  } else {
    if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    impl_->port = port;
  }
  return impl_->port;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace parkcast::service
