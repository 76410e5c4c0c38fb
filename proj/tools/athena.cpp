// athena command-line entry point.
#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "athena/bundle.hpp"
#include "athena/catalog.hpp"
#include "athena/error.hpp"
#include "athena/eval.hpp"
#include "athena/hybrid.hpp"
#include "athena/notify.hpp"
#include "athena/service.hpp"

namespace {

using namespace athena;
namespace fs = std::filesystem;

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

std::int64_t unix_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// "1..10", "1,3,7" or "4".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  auto to_u64 = [&](const std::string& s) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != s.size()) throw CLI::ValidationError("--seeds", "bad seed '" + s + "'");
    return static_cast<std::uint64_t>(v);
  };
  if (auto dots = text.find(".."); dots != std::string::npos) {
    auto lo = to_u64(text.substr(0, dots)), hi = to_u64(text.substr(dots + 2));
    if (lo > hi) throw CLI::ValidationError("--seeds", "empty range " + text);
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) seeds.push_back(to_u64(part));
  if (seeds.empty()) throw CLI::ValidationError("--seeds", "no seeds given");
  return seeds;
}

std::pair<std::string, int> parse_addr(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw CLI::ValidationError("--addr", "expected HOST:PORT, got '" + addr + "'");
  std::string host = addr.substr(0, colon);
  int port = -1;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
  }
  if (port < 0 || port > 65535) throw CLI::ValidationError("--addr", "bad port in '" + addr + "'");
  return {host.empty() ? "0.0.0.0" : host, port};
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

std::int64_t newest_timestamp(const catalog::Dataset& data) {
  return data.events.empty() ? 0 : data.events.back().timestamp;
}

struct Options {
  catalog::SynthConfig synth;
  std::uint64_t seed = 1;
  std::string out;
  std::string data;
  std::string model;
  std::optional<std::size_t> k;
  std::string user;
  std::size_t n = 10;
  double alpha = 0.5;
  std::string preference_mode = "filter";
  std::string configs = "hybrid:0.5,cf,cbf";
  double test_fraction = 0.2;
  std::string seeds = "1..10";
  std::string averaging = "macro";
  std::string format = "table";
  std::string json_out;
  std::string csv_out;
  std::string addr;
  std::int64_t tick_seconds = 60;
  std::int64_t retrain_every = 0;
  std::optional<std::int64_t> now;
  std::string outbox;
  std::string sink = "file";
  std::size_t digest_size = 5;
};

hybrid::BlendConfig blend_from(const Options& o) {
  hybrid::BlendConfig blend;
  blend.alpha = o.alpha;
  blend.n_default = o.n;
  if (o.preference_mode == "boost") blend.preference_mode = hybrid::PreferenceMode::boost;
  blend.validate();
  return blend;
}

int cmd_gen_data(const Options& o) {
  auto data = catalog::generate_synthetic(o.synth, o.seed);
  catalog::save_dataset(o.out, data);
  std::cout << "wrote " << data.items.size() << " items, " << data.users.size() << " users, " << data.events.size()
            << " events to " << o.out << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  auto data = catalog::load_dataset(o.data);
  cf::TrainConfig config;
  config.k = o.k;
  const auto t0 = std::chrono::steady_clock::now();
  auto bundle = cf::train_bundle(data.items, data.users, data.events, config, newest_timestamp(data));
  const double elapsed = seconds_since(t0);
  cf::save_bundle(o.out, bundle);

  std::size_t observed = 0;
  for (const auto& s : bundle.cf.seen) observed += s.size();
  const double cells = static_cast<double>(bundle.cf.users.ids.size()) * bundle.cf.items.ids.size();
  std::cout << "k: " << bundle.cf.k << '\n'
            << "matrix: " << bundle.cf.users.ids.size() << " x " << bundle.cf.items.ids.size() << '\n'
            << "density: " << fixed(cells > 0 ? observed / cells : 0.0, 6) << '\n'
            << "train_seconds: " << fixed(elapsed, 3) << '\n'
            << "model: " << o.out << '\n';
  return 0;
}

int cmd_recommend(const Options& o) {
  auto data = catalog::load_dataset(o.data);
  auto bundle = cf::load_bundle(o.model);
  hybrid::Context ctx(data, bundle.cf, bundle.tfidf);
  const auto recs = hybrid::recommend(o.user, o.n, ctx, blend_from(o));
  std::unordered_map<std::string, const catalog::Item*> by_id;
  for (const auto& item : data.items) by_id.emplace(item.id, &item);

  std::cout << "user " << o.user << ", model version " << bundle.version << ", alpha " << o.alpha << '\n';
  std::cout << std::left << std::setw(5) << "rank" << std::setw(14) << "item_id" << std::setw(8) << "score"
            << std::setw(12) << "source" << "title / reason\n";
  std::size_t rank = 1;
  for (const auto& r : recs) {
    std::cout << std::left << std::setw(5) << rank++ << std::setw(14) << r.item_id << std::setw(8)
              << fixed(r.score, 4) << std::setw(12) << hybrid::to_string(r.source) << by_id.at(r.item_id)->title
              << "  (" << r.reason << ")\n";
  }
  return 0;
}

int cmd_evaluate(const Options& o) {
  const auto configs = eval::parse_filters(o.configs);
  const auto seeds = parse_seeds(o.seeds);
  std::optional<catalog::Dataset> fixed_data;
  if (!o.data.empty()) fixed_data = catalog::load_dataset(o.data);

  eval::EvalOptions options;
  options.n = o.n;
  options.test_fraction = o.test_fraction;
  options.averaging = o.averaging == "micro" ? eval::Averaging::micro : eval::Averaging::macro;
  options.train.k = o.k;
  options.blend = blend_from(o);

  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  std::string csv;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    options.seed = seeds[i];
    const auto data = fixed_data ? *fixed_data : catalog::generate_synthetic(o.synth, seeds[i]);
    const auto report = eval::compare_filters(data, configs, options);
    if (o.format == "table") std::cout << eval::to_text(report) << '\n';
    all.push_back(eval::to_json(report));
    csv += eval::to_csv(report, i == 0);
  }
  if (o.format == "json") std::cout << all.dump(2) << '\n';
  if (o.format == "csv") std::cout << csv;
  if (!o.json_out.empty()) std::ofstream(o.json_out) << all.dump(2) << '\n';
  if (!o.csv_out.empty()) std::ofstream(o.csv_out) << csv;
  return 0;
}

int cmd_serve(const Options& o) {
  std::string addr = o.addr;
  if (addr.empty()) {
    const char* env = std::getenv("ATHENA_ADDR");
    addr = env && *env ? env : "127.0.0.1:8080";
  }
  const auto [host, port] = parse_addr(addr);

  service::ServiceConfig config;
  config.data_dir = o.data;
  if (!o.model.empty()) config.model_path = o.model;
  if (!o.outbox.empty()) config.outbox = o.outbox;
  config.train.k = o.k;
  config.blend = blend_from(o);
  config.tick_seconds = o.tick_seconds;
  config.retrain_every = o.retrain_every;
  config.digest_size = o.digest_size;

  service::Service svc(config);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const int bound = svc.start(host, port);
  std::cout << "listening on " << host << ':' << bound << " (model version " << svc.model_version() << ")"
            << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  svc.stop();
  std::cout << "stopped" << std::endl;
  return 0;
}

int cmd_notify_run(const Options& o) {
  auto data = catalog::load_dataset(o.data);
  auto bundle = cf::load_bundle(o.model);
  hybrid::Context ctx(data, bundle.cf, bundle.tfidf);
  notify::DeliveryLog log(fs::path(o.data) / "deliveries.jsonl");

  std::unique_ptr<notify::DeliverySink> sink;
  if (o.sink == "stdout")
    sink = std::make_unique<notify::StdoutSink>(std::cout);
  else if (o.sink == "smtp")
    sink = std::make_unique<notify::SmtpSink>(notify::SmtpConfig::from_env());
  else
    sink = std::make_unique<notify::FileSink>(o.outbox.empty() ? fs::path(o.data) / "outbox" : fs::path(o.outbox));

  const std::int64_t now = o.now.value_or(unix_now());
  const auto records = notify::scheduler_tick(now, data.users, ctx, log, *sink, o.digest_size);
  std::size_t delivered = 0;
  for (const auto& r : records) {
    if (r.status == notify::DeliveryStatus::delivered) ++delivered;
    std::cerr << r.user_id << ' ' << notify::to_string(r.status) << ' ' << r.item_ids.size() << " items\n";
  }
  std::cerr << "tick at " << now << ": " << delivered << " delivered, " << records.size() - delivered
            << " failed\n";
  return 0;
}

int cmd_bench(const Options& o) {
  const auto data = o.data.empty() ? catalog::generate_synthetic(o.synth, o.seed) : catalog::load_dataset(o.data);
  cf::TrainConfig config;
  config.k = o.k;
  auto t0 = std::chrono::steady_clock::now();
  auto bundle = cf::train_bundle(data.items, data.users, data.events, config, newest_timestamp(data));
  const double train = seconds_since(t0);

  hybrid::Context ctx(data, bundle.cf, bundle.tfidf);
  const auto blend = blend_from(o);
  t0 = std::chrono::steady_clock::now();
  std::size_t produced = 0;
  for (const auto& user : data.users) produced += hybrid::recommend(user.id, o.n, ctx, blend).size();
  const double recommend = seconds_since(t0);

  std::cout << "train_seconds: " << fixed(train, 6) << '\n'
            << "recommend_all_seconds: " << fixed(recommend, 6) << " (" << data.users.size() << " users, "
            << produced << " recommendations)\n";
  return 0;
}

void synth_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--users", o.synth.n_users, "synthetic users")->capture_default_str();
  cmd->add_option("--items", o.synth.n_items, "synthetic items")->capture_default_str();
  cmd->add_option("--events", o.synth.n_events, "synthetic events")->capture_default_str();
  cmd->add_option("--cold-frac", o.synth.cold_item_fraction, "share of items with no events")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--empty-frac", o.synth.empty_description_fraction, "share of items with empty descriptions")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--pref-frac", o.synth.preference_fraction, "share of users with a community preference")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
}

void blend_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--alpha", o.alpha, "CF weight in the blend")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--preference-mode", o.preference_mode, "filter or boost")
      ->capture_default_str()
      ->check(CLI::IsMember({"filter", "boost"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"athena: hybrid recommender and notification digests"};
  app.set_config("--config", "athena.toml", "read flag defaults from a TOML/INI file");
  app.require_subcommand(1);
  Options o;
  std::function<int()> run;

  auto* gen = app.add_subcommand("gen-data", "write a synthetic library as JSONL");
  synth_flags(gen, o);
  gen->add_option("--seed", o.seed, "generator seed")->capture_default_str();
  gen->add_option("--out", o.out, "output directory")->required();
  gen->callback([&] { run = [&] { return cmd_gen_data(o); }; });

  auto* train = app.add_subcommand("train", "train CF and TF-IDF models into a bundle");
  train->add_option("--data", o.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--k", o.k, "SVD rank (default min(20, min(m,n)-1))");
  train->add_option("--out", o.out, "bundle path")->required();
  train->callback([&] { run = [&] { return cmd_train(o); }; });

  auto* rec = app.add_subcommand("recommend", "print recommendations for one user");
  rec->add_option("--model", o.model, "bundle path")->required()->check(CLI::ExistingFile);
  rec->add_option("--data", o.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  rec->add_option("--user", o.user, "user id")->required();
  rec->add_option("--n", o.n, "list length")->capture_default_str()->check(CLI::PositiveNumber);
  blend_flags(rec, o);
  rec->callback([&] { run = [&] { return cmd_recommend(o); }; });

  auto* ev = app.add_subcommand("evaluate", "compare filters by precision / recall / F");
  ev->add_option("--data", o.data, "dataset directory (default: synthetic data per seed)")
      ->check(CLI::ExistingDirectory);
  ev->add_option("--configs", o.configs, "comma-separated: hybrid:ALPHA, cf, cbf")->capture_default_str();
  ev->add_option("--n", o.n, "list length")->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_option("--test-frac", o.test_fraction, "held-out share per user")->capture_default_str();
  ev->add_option("--seeds", o.seeds, "A..B or comma list")->capture_default_str();
  ev->add_option("--k", o.k, "SVD rank");
  ev->add_option("--averaging", o.averaging, "macro or micro")
      ->capture_default_str()
      ->check(CLI::IsMember({"macro", "micro"}));
  ev->add_option("--format", o.format, "table, json or csv")
      ->capture_default_str()
      ->check(CLI::IsMember({"table", "json", "csv"}));
  ev->add_option("--json-out", o.json_out, "also write the JSON report here");
  ev->add_option("--csv-out", o.csv_out, "also write the CSV report here");
  synth_flags(ev, o);
  ev->add_option("--preference-mode", o.preference_mode, "filter or boost")
      ->capture_default_str()
      ->check(CLI::IsMember({"filter", "boost"}));
  ev->callback([&] { run = [&] { return cmd_evaluate(o); }; });

  auto* serve = app.add_subcommand("serve", "run the HTTP API and the digest scheduler");
  serve->add_option("--data", o.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--model", o.model, "bundle path (loaded if present, rewritten by retrains)");
  serve->add_option("--addr", o.addr, "HOST:PORT (default $ATHENA_ADDR or 127.0.0.1:8080)");
  serve->add_option("--k", o.k, "SVD rank for retrains");
  serve->add_option("--tick", o.tick_seconds, "scheduler period in seconds, 0 disables")->capture_default_str();
  serve->add_option("--retrain-every", o.retrain_every, "retrain period in seconds, 0 disables")
      ->capture_default_str();
  serve->add_option("--outbox", o.outbox, "digest outbox (default DATA/outbox)");
  serve->add_option("--digest-size", o.digest_size, "items per digest")->capture_default_str();
  serve->add_option("--n", o.n, "default list length")->capture_default_str()->check(CLI::PositiveNumber);
  blend_flags(serve, o);
  serve->callback([&] { run = [&] { return cmd_serve(o); }; });

  auto* notify_cmd = app.add_subcommand("notify", "notification digests");
  notify_cmd->require_subcommand(1);
  auto* notify_run = notify_cmd->add_subcommand("run", "one scheduler pass");
  notify_run->add_option("--now", o.now, "unix seconds (default: wall clock)");
  notify_run->add_option("--data", o.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  notify_run->add_option("--model", o.model, "bundle path")->required()->check(CLI::ExistingFile);
  notify_run->add_option("--outbox", o.outbox, "outbox directory (default DATA/outbox)");
  notify_run->add_option("--sink", o.sink, "file, stdout or smtp")
      ->capture_default_str()
      ->check(CLI::IsMember({"file", "stdout", "smtp"}));
  notify_run->add_option("--digest-size", o.digest_size, "items per digest")->capture_default_str();
  notify_run->callback([&] { run = [&] { return cmd_notify_run(o); }; });

  auto* bench = app.add_subcommand("bench", "time training and recommending for every user");
  bench->add_option("--data", o.data, "dataset directory (default: synthetic)")->check(CLI::ExistingDirectory);
  bench->add_option("--k", o.k, "SVD rank");
  bench->add_option("--seed", o.seed, "synthetic seed")->capture_default_str();
  bench->add_option("--n", o.n, "list length")->capture_default_str()->check(CLI::PositiveNumber);
  synth_flags(bench, o);
  bench->callback([&] { run = [&] { return cmd_bench(o); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    return run ? run() : kUsageError;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
}
