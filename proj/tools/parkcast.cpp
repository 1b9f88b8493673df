#include <CLI11.hpp>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <thread>

#include "parkcast/common/error.hpp"
#include "parkcast/common/fingerprint.hpp"
#include "parkcast/evaltune/report.hpp"
#include "parkcast/pipeline/config.hpp"
#include "parkcast/pipeline/stages.hpp"
#include "parkcast/service/http.hpp"
#include "parkcast/service/service.hpp"

using namespace parkcast;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitRuntime = 4;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "text";
};

pipeline::PipelineConfig load_config(const Globals& g) {
  pipeline::PipelineConfig c = g.config.empty() ? pipeline::PipelineConfig{} : pipeline::PipelineConfig::load(g.config);
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.out = g.out;
  return c;
}

void emit(const Globals& g, const pipeline::StageResult& r) {
  if (g.format == "json") {
    std::cout << r.to_json().dump(2) << "\n";
    return;
  }
  if (r.summary.contains("table")) std::cout << r.summary["table"].get<std::string>();
  for (const auto& p : r.outputs) std::cout << r.stage << ": wrote " << p.string() << "\n";
}

void print_error(const Globals& g, const std::exception& e, int code) {
  if (g.format == "json") {
    ordered_json j = {{"error", e.what()}, {"exit_code", code}};
    if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
      ordered_json list = ordered_json::array();
      for (const auto& x : v->violations()) list.push_back({{"field", x.field}, {"rule", x.rule}, {"message", x.message}});
      j["violations"] = std::move(list);
    }
    if (const auto* f = dynamic_cast<const FingerprintMismatch*>(&e)) {
      j["expected"] = f->expected();
      j["actual"] = f->actual();
    }
    std::cout << j.dump(2) << "\n";
  }
  std::cerr << "parkcast: " << e.what() << "\n";
  if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
    for (const auto& x : v->violations()) std::cerr << "  " << x.field << ": " << x.message << "\n";
  }
}

std::vector<models::Family> parse_families(const std::vector<std::string>& names) {
  std::vector<models::Family> out;
  for (const auto& n : names) out.push_back(models::parse_family(n));
  return out;
}

evaltune::SearchKind parse_search(const std::string& s) {
  if (s == "grid") return evaltune::SearchKind::grid;
  if (s == "random") return evaltune::SearchKind::random;
  throw ArgumentError("search must be grid or random");
}

int serve(const Globals& g, const service::ServiceConfig& sc) {
  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  auto svc = service::ParkingService::load(sc);
  service::HttpServer server(*svc, sc.cors_origin);
  const int port = server.bind(sc.host, sc.port);
  if (g.format == "json") {
    std::cout << ordered_json{{"listening", sc.host + ":" + std::to_string(port)},
                              {"model_fingerprint", svc->model_fingerprint()}}
                     .dump()
              << std::endl;
  } else {
    std::cout << "serving on http://" << sc.host << ":" << port << " (model " << svc->model_fingerprint() << ")"
              << std::endl;
  }
  std::thread worker([&] { server.serve(); });
  int sig = 0;
  sigwait(&stop_signals, &sig);
  server.stop();
  worker.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parking availability pipeline and prediction service"};
  app.set_version_flag("--version", pipeline::tool_version());
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Pipeline config (JSON)")->envname("PARKCAST_CONFIG");
  app.add_option("--seed", g.seed, "Seed for every stochastic step")->envname("PARKCAST_SEED");
  app.add_option("--out", g.out, "Artifact directory")->envname("PARKCAST_OUT");
  app.add_option("--format", g.format, "Output format")
      ->check(CLI::IsMember({"text", "json"}))
      ->envname("PARKCAST_FORMAT");

  std::map<std::string, std::string> paths;
  auto path_option = [&](CLI::App* cmd, const std::string& key, const std::string& flag, const std::string& help) {
    std::string env = "PARKCAST_" + key;
    std::transform(env.begin(), env.end(), env.begin(), [](unsigned char c) { return c == '-' ? '_' : std::toupper(c); });
    cmd->add_option_function<std::string>(flag, [&paths, key](const std::string& v) { paths[key] = v; }, help)
        ->envname(env);
  };

  auto* synth = app.add_subcommand("synth", "Generate synthetic campus, observations and ground truth");
  std::optional<double> noise;
  std::optional<int> days;
  synth->add_option("--noise", noise, "GPS noise standard deviation in meters")->envname("PARKCAST_NOISE");
  synth->add_option("--days", days, "Number of simulated days")->envname("PARKCAST_DAYS");

  auto* ingest = app.add_subcommand("ingest", "Validate a raw observation CSV");
  std::string raw_input;
  ingest->add_option("--input", raw_input, "Raw observation CSV")->required()->envname("PARKCAST_INPUT");
  path_option(ingest, "observations", "--observations", "Accepted observations output");

  auto* join = app.add_subcommand("join", "Snap observations to segments and sections");
  path_option(join, "campus", "--campus", "Campus GeoJSON");
  path_option(join, "observations", "--observations", "Observation CSV");
  std::optional<double> snap_threshold;
  join->add_option("--snap-threshold", snap_threshold, "Snap threshold in meters")->envname("PARKCAST_SNAP_THRESHOLD");

  auto* build = app.add_subcommand("build-dataset", "Aggregate, clean, split and scale");
  path_option(build, "campus", "--campus", "Campus GeoJSON");
  path_option(build, "joined", "--joined", "Joined observation CSV");
  std::optional<std::string> split_mode;
  std::optional<double> train_ratio;
  build->add_option("--split", split_mode, "chronological or random")
      ->check(CLI::IsMember({"chronological", "random"}))->envname("PARKCAST_SPLIT");
  build->add_option("--train-ratio", train_ratio, "Training fraction")->envname("PARKCAST_TRAIN_RATIO");

  auto* analyze = app.add_subcommand("analyze", "Correlation report");
  path_option(analyze, "dataset", "--dataset", "Dataset CSV");

  auto* train = app.add_subcommand("train", "Fit one model family");
  std::optional<std::string> family;
  train->add_option("--family", family, "linear, svr, rfr or lstm")
      ->check(CLI::IsMember({"linear", "lr", "svr", "rfr", "forest", "lstm"}))->envname("PARKCAST_FAMILY");
  path_option(train, "dataset", "--dataset", "Dataset CSV");
  path_option(train, "sidecar", "--sidecar", "Dataset sidecar");
  path_option(train, "model", "--model", "Model output");

  std::vector<std::string> families;
  std::optional<std::string> search;
  std::optional<int> budget, cv_k;
  auto search_options = [&](CLI::App* cmd) {
    cmd->add_option("--families", families, "Model families")
        ->delimiter(',')
        ->check(CLI::IsMember({"linear", "lr", "svr", "rfr", "forest", "lstm"}))->envname("PARKCAST_FAMILIES");
    cmd->add_option("--search", search, "grid or random")->check(CLI::IsMember({"grid", "random"}))->envname("PARKCAST_SEARCH");
    cmd->add_option("--budget", budget, "Random search budget")->envname("PARKCAST_BUDGET");
    cmd->add_option("--cv-k", cv_k, "Number of folds")->envname("PARKCAST_CV_K");
    path_option(cmd, "dataset", "--dataset", "Dataset CSV");
    path_option(cmd, "sidecar", "--sidecar", "Dataset sidecar");
  };
  auto* tune = app.add_subcommand("tune", "Cross-validated hyperparameter search");
  search_options(tune);

  auto* evaluate = app.add_subcommand("evaluate", "Tune, refit and score every family on the test partition");
  search_options(evaluate);
  std::optional<double> vehicle_scale;
  std::string from_report;
  evaluate->add_option("--vehicle-scale", vehicle_scale, "Vehicles per unit availability")
      ->envname("PARKCAST_VEHICLE_SCALE");
  evaluate->add_option("--from-report", from_report, "Render an existing report instead of evaluating");

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP prediction service");
  std::optional<std::string> host, model_path, sidecar_path, campus_path, cors;
  std::optional<int> port;
  std::optional<double> low, high;
  serve_cmd->add_option("--host", host, "Listen address")->envname("PARKCAST_HOST");
  serve_cmd->add_option("--port", port, "Listen port (0 picks one)")->envname("PARKCAST_PORT");
  serve_cmd->add_option("--model", model_path, "Model artifact")->envname("PARKCAST_MODEL");
  serve_cmd->add_option("--sidecar", sidecar_path, "Dataset sidecar")->envname("PARKCAST_SIDECAR");
  serve_cmd->add_option("--campus", campus_path, "Campus GeoJSON")->envname("PARKCAST_CAMPUS");
  serve_cmd->add_option("--low-threshold", low, "Occupancy rate below which a section is low")
      ->envname("PARKCAST_LOW_THRESHOLD");
  serve_cmd->add_option("--high-threshold", high, "Occupancy rate above which a section is high")
      ->envname("PARKCAST_HIGH_THRESHOLD");
  serve_cmd->add_option("--cors-origin", cors, "Allowed CORS origin")->envname("PARKCAST_CORS_ORIGIN");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    auto config = load_config(g);
    for (const auto& [k, v] : paths) config.paths[k] = v;
    if (!families.empty()) config.families = parse_families(families);
    if (search) config.search = parse_search(*search);
    if (budget) config.budget = *budget;
    if (cv_k) config.cv.k = *cv_k;

    if (synth->parsed()) {
      if (noise) config.synth.noise_m = *noise;
      if (days) config.synth.days = *days;
      emit(g, pipeline::run_synth(config));
    } else if (ingest->parsed()) {
      emit(g, pipeline::run_ingest(config, raw_input));
    } else if (join->parsed()) {
      if (snap_threshold) config.snap_threshold_m = *snap_threshold;
      emit(g, pipeline::run_join(config));
    } else if (build->parsed()) {
      if (split_mode) config.split_mode = evaltune::parse_split_mode(*split_mode);
      if (train_ratio) config.train_ratio = *train_ratio;
      emit(g, pipeline::run_build_dataset(config));
    } else if (analyze->parsed()) {
      emit(g, pipeline::run_analyze(config));
    } else if (train->parsed()) {
      std::optional<models::Family> f;
      if (family) f = models::parse_family(*family);
      emit(g, pipeline::run_train(config, f));
    } else if (tune->parsed()) {
      emit(g, pipeline::run_tune(config));
    } else if (evaluate->parsed()) {
      if (vehicle_scale) config.vehicle_scale = *vehicle_scale;
      if (!from_report.empty()) {
        const auto report = evaltune::EvaluationReport::from_json(nlohmann::ordered_json::parse(read_file(from_report)));
        if (g.format == "json") std::cout << report.to_json().dump(2) << "\n";
        else std::cout << evaltune::render_table(report);
      } else {
        emit(g, pipeline::run_evaluate(config));
      }
    } else if (serve_cmd->parsed()) {
      auto sc = service::ServiceConfig::from_json(config.service, g.config.empty()
                                                                      ? std::filesystem::path{}
                                                                      : std::filesystem::path(g.config).parent_path());
      if (sc.model.empty()) sc.model = config.path("model", "model.json");
      if (sc.sidecar.empty()) sc.sidecar = config.path("sidecar", "dataset.sidecar.json");
      if (sc.campus.empty()) sc.campus = config.path("campus", "campus.geojson");
      if (host) sc.host = *host;
      if (port) sc.port = *port;
      if (model_path) sc.model = *model_path;
      if (sidecar_path) sc.sidecar = *sidecar_path;
      if (campus_path) sc.campus = *campus_path;
      if (cors) sc.cors_origin = *cors;
      if (low) sc.options.thresholds.low = *low;
      if (high) sc.options.thresholds.high = *high;
      if (sc.options.initial_occupancy.empty()) sc.options.initial_occupancy = config.initial_occupancy;
      const auto& t = sc.options.thresholds;
      if (!(0.0 <= t.low && t.low <= t.high && t.high <= 1.0)) {
        throw SchemaError("thresholds must satisfy 0 <= low <= high <= 1");
      }
      return serve(g, sc);
    }
  } catch (const InputError& e) {
    print_error(g, e, kExitValidation);
    return kExitValidation;
  } catch (const json::parse_error& e) {
    print_error(g, e, kExitValidation);
    return kExitValidation;
  } catch (const std::exception& e) {
    print_error(g, e, kExitRuntime);
    return kExitRuntime;
  }
  return 0;
}
