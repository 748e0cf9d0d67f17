#include "sumvln/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "sumvln/codec.hpp"
#include "sumvln/error.hpp"
#include "sumvln/log.hpp"
#include "sumvln/memory_bank.hpp"

namespace fs = std::filesystem;

namespace sumvln {

using nlohmann::json;

namespace {

std::vector<SceneClass> parse_classes(const std::string& csv) {
  std::vector<SceneClass> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    const std::string token = csv.substr(pos, comma - pos);
    if (!token.empty()) {
      const SceneClass c = scene_class_from_string(token);
      if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    pos = comma + 1;
  }
  if (out.empty()) throw Error(ErrorCode::BadArgs, "no scene classes given");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

// Runs fn(i) for i in [0, n) on `threads` workers. Stops handing out new
// indices once fn returns false.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> halt{false};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    while (!halt.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        if (!fn(i)) halt = true;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        halt = true;
      }
    }
  };
  const int count = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

struct CommonFlags {
  std::string config;
  std::string data_dir;
  std::string bank_dir;
  std::string out_dir;
  int parallel = 1;
  bool verbose = false;
  bool quiet = false;
};

}  // namespace

void ExperimentConfig::finalize() {
  if (episodes_per_class < 1) throw Error(ErrorCode::InvalidConfig, "episodes_per_class must be at least 1");
  if (parallel < 1) throw Error(ErrorCode::InvalidConfig, "parallel must be at least 1");
  if (scene_classes.empty()) throw Error(ErrorCode::InvalidConfig, "scene_classes must not be empty");
  runner.seed = seed;
  runner.memory_selection = memory_selection;
  if (runner.reconstructor.backend == ReconstructionBackend::external) {
    if (reconstruction_endpoint) runner.reconstructor.external_endpoint = reconstruction_endpoint;
    if (!runner.reconstructor.external_endpoint) {
      throw Error(ErrorCode::InvalidConfig, "the external backend needs a reconstruction endpoint");
    }
  } else {
    runner.reconstructor.external_endpoint.reset();
  }
  if (policy == PolicyKind::remote && !policy_endpoint) {
    throw Error(ErrorCode::InvalidConfig, "the remote policy needs a policy endpoint");
  }
  runner.validate();
}

json experiment_config_to_json(const ExperimentConfig& c) {
  json classes = json::array();
  for (auto s : c.scene_classes) classes.push_back(to_string(s));
  json j = json::object();
  j["seed"] = c.seed;
  j["scene_classes"] = std::move(classes);
  j["episodes_per_class"] = c.episodes_per_class;
  j["policy"] = to_string(c.policy);
  j["memory_selection"] = to_string(c.memory_selection);
  j["runner"] = runner_config_to_json(c.runner);
  j["endpoints"] = {{"reconstruction", c.reconstruction_endpoint ? json(*c.reconstruction_endpoint) : json(nullptr)},
                    {"policy", c.policy_endpoint ? json(*c.policy_endpoint) : json(nullptr)}};
  j["data_dir"] = c.data_dir.string();
  j["bank_dir"] = c.bank_dir.string();
  j["output_dir"] = c.output_dir.string();
  j["prompt_file"] = c.prompt_file ? json(c.prompt_file->string()) : json(nullptr);
  j["parallel"] = c.parallel;
  j["policy_rate_limit"] = c.policy_rate_limit;
  j["group_by"] = to_string(c.group_by);
  j["isr_mode"] = to_string(c.isr_mode);
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  ExperimentConfig c;
  auto opt_string = [](const json& v) { return v.is_null() ? std::nullopt : std::optional<std::string>(v.get<std::string>()); };
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "scene_classes") {
        c.scene_classes.clear();
        for (const auto& s : v) c.scene_classes.push_back(scene_class_from_string(s.get<std::string>()));
      } else if (k == "episodes_per_class") c.episodes_per_class = v.get<int>();
      else if (k == "policy") c.policy = policy_kind_from_string(v.get<std::string>());
      else if (k == "memory_selection") c.memory_selection = memory_selection_from_string(v.get<std::string>());
      else if (k == "runner") c.runner = runner_config_from_json(v);
      else if (k == "endpoints") {
        for (const auto& [ek, ev] : v.items()) {
          if (ek == "reconstruction") c.reconstruction_endpoint = opt_string(ev);
          else if (ek == "policy") c.policy_endpoint = opt_string(ev);
          else throw Error(ErrorCode::InvalidConfig, "unknown endpoint '" + ek + "'");
        }
      } else if (k == "data_dir") c.data_dir = v.get<std::string>();
      else if (k == "bank_dir") c.bank_dir = v.get<std::string>();
      else if (k == "output_dir") c.output_dir = v.get<std::string>();
      else if (k == "prompt_file") {
        const auto s = opt_string(v);
        c.prompt_file = s ? std::optional<fs::path>(*s) : std::nullopt;
      } else if (k == "parallel") c.parallel = v.get<int>();
      else if (k == "policy_rate_limit") c.policy_rate_limit = v.get<double>();
      else if (k == "group_by") c.group_by = group_by_from_string(v.get<std::string>());
      else if (k == "isr_mode") c.isr_mode = isr_mode_from_string(v.get<std::string>());
      else throw Error(ErrorCode::InvalidConfig, "unknown config field '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
  // The runner section may repeat these; the top level wins.
  c.runner.seed = c.seed;
  c.runner.memory_selection = c.memory_selection;
  return c;
}

Dataset load_dataset(const fs::path& dir, const std::vector<SceneClass>& classes) {
  Dataset d;
  const fs::path worlds = dir / "worlds";
  const fs::path episodes = dir / "episodes";
  if (!fs::is_directory(worlds) || !fs::is_directory(episodes)) {
    throw Error(ErrorCode::IoFailure, "no generated data under " + dir.string() + " (run `sumvln gen` first)");
  }
  auto wanted = [&](SceneClass c) { return std::find(classes.begin(), classes.end(), c) != classes.end(); };
  for (const auto& entry : fs::directory_iterator(worlds)) {
    if (entry.path().extension() != ".json") continue;
    World w;
    try {
      w = world_from_json(json::parse(read_text_file(entry.path())));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseFailure, entry.path().string() + ": " + e.what());
    }
    if (wanted(w.scene_class)) d.worlds.emplace(w.scene_id(), std::move(w));
  }
  for (const auto& entry : fs::directory_iterator(episodes)) {
    if (entry.path().extension() != ".jsonl") continue;
    for (auto& e : episodes_from_jsonl(read_text_file(entry.path()))) {
      if (!wanted(e.scene_class)) continue;
      if (!d.worlds.count(e.scene_id())) {
        throw Error(ErrorCode::IoFailure, "episode " + e.id + " has no world file");
      }
      d.episodes.push_back(std::move(e));
    }
  }
  std::sort(d.episodes.begin(), d.episodes.end(), [](const Episode& a, const Episode& b) { return a.id < b.id; });
  return d;
}

std::string episode_file_stem(std::string_view episode_id) {
  std::string out(episode_id);
  std::replace(out.begin(), out.end(), ':', '_');
  return out;
}

namespace {

int cmd_gen(const ExperimentConfig& cfg) {
  const fs::path worlds = cfg.data_dir / "worlds";
  const fs::path episodes = cfg.data_dir / "episodes";
  ensure_dir(worlds);
  ensure_dir(episodes);
  GenerationConfig gen;
  gen.episodes = cfg.episodes_per_class;
  gen.dynamics = cfg.runner.dynamics;
  gen.success_radius = cfg.runner.success_radius;
  gen.waypoint_radius = cfg.runner.oracle.waypoint_radius;
  std::size_t total = 0;
  for (SceneClass c : cfg.scene_classes) {
    const GeneratedScene scene = generate_world(cfg.seed, c, gen);
    const std::string id = scene.world.scene_id();
    write_text(worlds / (id + ".json"), world_to_json(scene.world).dump(2) + "\n");
    write_text(episodes / (id + ".jsonl"), episodes_to_jsonl(scene.episodes));
    total += scene.episodes.size();
  }
  std::cout << "generated " << total << " episodes in " << cfg.scene_classes.size() << " worlds under "
            << cfg.data_dir.string() << "\n";
  return kExitOk;
}

int cmd_build_memory(const ExperimentConfig& cfg) {
  const Dataset data = load_dataset(cfg.data_dir, cfg.scene_classes);
  MemoryBank bank(cfg.bank_dir);
  std::vector<const Episode*> todo;
  std::set<std::string> keys;
  for (const auto& e : data.episodes) {
    if (keys.insert(memory_key(e, cfg.runner.key_mode)).second) todo.push_back(&e);
  }
  std::mutex out_mutex;
  parallel_for(todo.size(), cfg.parallel, [&](std::size_t i) {
    const Episode& e = *todo[i];
    const SpatialMemory m = pre_explore(data.worlds.at(e.scene_id()), e, cfg.runner, bank);
    std::lock_guard lock(out_mutex);
    log_info("stored " + m.scene_key + " (reconstruction " + m.reconstruction_digest.substr(0, 12) + ")");
    return true;
  });
  std::cout << "stored " << todo.size() << " memories in " << cfg.bank_dir.string() << "\n";
  return kExitOk;
}

int cmd_run(const ExperimentConfig& cfg, bool keep_going) {
  const Dataset data = load_dataset(cfg.data_dir, cfg.scene_classes);
  const fs::path results_dir = cfg.output_dir / "results";
  const fs::path traces_dir = cfg.output_dir / "traces";
  ensure_dir(results_dir);
  ensure_dir(traces_dir);
  write_text(cfg.output_dir / "config.json", experiment_config_to_json(cfg).dump(2) + "\n");

  std::optional<PromptTemplate> prompt;
  if (cfg.prompt_file) prompt = PromptTemplate::load(*cfg.prompt_file);
  MemoryBank bank(cfg.bank_dir);

  RunOptions base;
  base.policy = cfg.policy;
  base.prompt = prompt ? &*prompt : nullptr;
  base.bank = &bank;
  if (cfg.policy_endpoint) base.context.endpoint = HttpEndpoint::parse(*cfg.policy_endpoint);
  base.context.rate_limiter = std::make_shared<RateLimiter>(cfg.policy_rate_limit);

  std::atomic<int> failures{0}, successes{0}, done{0};
  parallel_for(data.episodes.size(), cfg.parallel, [&](std::size_t i) {
    const Episode& e = data.episodes[i];
    const EpisodeResult r = run_episode(data.worlds.at(e.scene_id()), e, cfg.runner, base);
    const std::string stem = episode_file_stem(e.id);
    write_text(results_dir / (stem + ".json"), episode_result_to_json(r).dump(2) + "\n");
    write_text(traces_dir / (stem + ".jsonl"), trace_jsonl(r));
    ++done;
    if (r.success) ++successes;
    if (r.failure) {
      ++failures;
      return keep_going;
    }
    return true;
  });
  std::cout << "ran " << done.load() << " episodes: " << successes.load() << " succeeded, " << failures.load()
            << " policy failures; results in " << cfg.output_dir.string() << "\n";
  if (failures.load() > 0 && !keep_going) return kExitFailure;
  return kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg, const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  std::vector<EpisodeResult> results;
  for (const auto& dir : run_dirs) {
    const fs::path results_dir = fs::path(dir) / "results";
    if (!fs::is_directory(results_dir)) throw Error(ErrorCode::IoFailure, "no results under " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(results_dir)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        results.push_back(episode_result_from_json(json::parse(read_text_file(f))));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseFailure, f.string() + ": " + e.what());
      }
    }
  }
  if (results.empty()) throw Error(ErrorCode::EmptyInput, "no episode results to evaluate");
  const Aggregate agg = aggregate(results, cfg.runner.success_radius, cfg.group_by, cfg.isr_mode);
  const fs::path out = out_dir.empty() ? fs::path(run_dirs.front()) : fs::path(out_dir);
  ensure_dir(out);
  write_report(out / "report.csv", agg, ReportFormat::csv);
  write_report(out / "report.md", agg, ReportFormat::markdown);
  std::cout << emit_report(agg, ReportFormat::markdown);
  return kExitOk;
}

int cmd_inspect_memory(const ExperimentConfig& cfg, const std::string& key, MemorySelection sel,
                       const std::string& out_dir) {
  MemoryBank bank(cfg.bank_dir);
  MemoryBank::validate_key(key);
  // load() verifies the image digests before anything is exported.
  const MemoryLoad loaded = bank.load(key, sel == MemorySelection::none ? MemorySelection::hybrid : sel);
  if (!loaded.hit) throw Error(ErrorCode::UnknownKey, "no memory stored under '" + key + "'");
  const fs::path record = fs::canonical(cfg.bank_dir / key);
  const fs::path out = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  ensure_dir(out);
  std::vector<std::string> files = {"meta.json"};
  if (sel == MemorySelection::frontal || sel == MemorySelection::hybrid) files.push_back("frontal.png");
  if (sel == MemorySelection::oblique || sel == MemorySelection::hybrid) files.push_back("oblique.png");
  for (const auto& f : files) {
    const fs::path dst = out / (key + "." + f);
    write_file_atomic(dst, read_file(record / f));
    std::cout << dst.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Vision-and-language navigation harness with spatial memory", "sumvln"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "sumvln 0.1.0");

  CommonFlags common;
  app.add_option("--config", common.config, "JSON experiment config; flags override it")->check(CLI::ExistingFile);
  app.add_flag("-v,--verbose", common.verbose, "Debug logging");
  app.add_flag("-q,--quiet", common.quiet, "Only errors on stderr");

  // Flag values land here; only options actually given override the config.
  std::uint64_t seed = 0;
  std::string classes, policy, memory, backend, recon_endpoint, policy_endpoint, key_mode, prompt, group, isr_mode;
  std::string key, selection = "hybrid";
  int per_class = 0, q = 0, max_steps = 0, tau = 0, pixel_stride = 0;
  double radius = 0.0, rate = 0.0, noise = 0.0, sensing = 0.0;
  bool keep_going = false, no_deviation = false;
  std::vector<std::string> run_dirs;
  std::string eval_out, inspect_out;

  auto add_data = [&](CLI::App* cmd) { return cmd->add_option("--data", common.data_dir, "Generated data directory"); };
  auto add_bank = [&](CLI::App* cmd) { return cmd->add_option("--bank", common.bank_dir, "Memory bank directory"); };
  auto add_classes = [&](CLI::App* cmd) {
    return cmd->add_option("--classes", classes, "Comma-separated scene classes");
  };

  CLI::App* gen = app.add_subcommand("gen", "Generate worlds and episodes");
  auto* o_seed_gen = gen->add_option("--seed", seed, "World seed");
  add_classes(gen);
  auto* o_per_class = gen->add_option("--per-class", per_class, "Episodes per scene class")->check(CLI::PositiveNumber);
  add_data(gen);

  CLI::App* build = app.add_subcommand("build-memory", "Pre-explore every episode and store its spatial memory");
  add_data(build);
  add_bank(build);
  add_classes(build);
  auto* o_backend = build->add_option("--backend", backend, "posed-depth or external");
  auto* o_recon_ep = build->add_option("--endpoint", recon_endpoint, "Reconstruction service URL");
  auto* o_q = build->add_option("--q", q, "Frames sampled per episode")->check(CLI::Range(2, 1000));
  auto* o_stride = build->add_option("--pixel-stride", pixel_stride, "Depth fusion stride")->check(CLI::PositiveNumber);
  auto* o_key_mode_b = build->add_option("--key-mode", key_mode, "scene-and-instruction or scene-only");
  auto* o_parallel_b = build->add_option("--parallel", common.parallel, "Worker threads")->check(CLI::PositiveNumber);

  CLI::App* run = app.add_subcommand("run", "Run episodes and write results and traces");
  add_data(run);
  add_bank(run);
  add_classes(run);
  auto* o_out = run->add_option("--out", common.out_dir, "Run directory");
  auto* o_seed_run = run->add_option("--seed", seed, "Policy seed");
  auto* o_policy = run->add_option("--policy", policy, "scripted-oracle, random, fixed or remote");
  auto* o_memory = run->add_option("--memory", memory, "none, frontal, oblique or hybrid");
  auto* o_policy_ep = run->add_option("--endpoint", policy_endpoint, "Policy service URL");
  auto* o_max_steps = run->add_option("--max-steps", max_steps, "Step limit")->check(CLI::PositiveNumber);
  auto* o_tau = run->add_option("--tau", tau, "Deviation window minus one")->check(CLI::PositiveNumber);
  auto* o_radius = run->add_option("--success-radius", radius, "Success radius in metres")->check(CLI::PositiveNumber);
  auto* o_no_dev = run->add_flag("--no-deviation-check", no_deviation, "Disable label-based early termination");
  auto* o_key_mode_r = run->add_option("--key-mode", key_mode, "scene-and-instruction or scene-only");
  auto* o_prompt = run->add_option("--prompt", prompt, "Prompt template file")->check(CLI::ExistingFile);
  auto* o_rate = run->add_option("--rate-limit", rate, "Remote policy calls per second")->check(CLI::NonNegativeNumber);
  auto* o_noise = run->add_option("--impair-noise", noise, "Oracle bearing noise, degrees")->check(CLI::NonNegativeNumber);
  auto* o_sensing = run->add_option("--impair-range", sensing, "Oracle sensing range, metres")->check(CLI::PositiveNumber);
  auto* o_parallel_r = run->add_option("--parallel", common.parallel, "Worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--keep-going", keep_going, "Exit 0 even when an episode hits a policy failure");

  CLI::App* eval = app.add_subcommand("eval", "Aggregate run results into CSV and markdown reports");
  eval->add_option("--runs", run_dirs, "Run directories")->required();
  auto* o_group = eval->add_option("--group", group, "none, scene, complexity or complexity-coarse");
  auto* o_isr = eval->add_option("--isr-mode", isr_mode, "mean-counts or normalized");
  auto* o_radius_e = eval->add_option("--success-radius", radius, "Success radius in metres")->check(CLI::PositiveNumber);
  eval->add_option("--out", eval_out, "Report directory (defaults to the first run)");

  CLI::App* inspect = app.add_subcommand("inspect-memory", "Export a stored memory record");
  add_bank(inspect);
  inspect->add_option("--key", key, "Memory key")->required();
  inspect->add_option("--selection", selection, "frontal, oblique, hybrid or none");
  inspect->add_option("--out", inspect_out, "Export directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  set_log_level(common.quiet ? LogLevel::error : common.verbose ? LogLevel::debug : LogLevel::info);

  try {
    ExperimentConfig cfg = load_config(common.config);
    if (!common.data_dir.empty()) cfg.data_dir = common.data_dir;
    if (!common.bank_dir.empty()) cfg.bank_dir = common.bank_dir;
    if (o_out->count()) cfg.output_dir = common.out_dir;
    if (o_seed_gen->count() || o_seed_run->count()) cfg.seed = seed;
    if (!classes.empty()) cfg.scene_classes = parse_classes(classes);
    if (o_per_class->count()) cfg.episodes_per_class = per_class;
    if (o_backend->count()) {
      std::string b = backend;
      std::replace(b.begin(), b.end(), '-', '_');
      cfg.runner.reconstructor.backend = reconstruction_backend_from_string(b);
    }
    if (o_q->count()) cfg.runner.q = static_cast<std::size_t>(q);
    if (o_stride->count()) cfg.runner.reconstructor.pixel_stride = pixel_stride;
    if (o_key_mode_b->count() || o_key_mode_r->count()) {
      if (key_mode != "scene-and-instruction" && key_mode != "scene-only") {
        throw Error(ErrorCode::BadArgs, "unknown key mode '" + key_mode + "'");
      }
      cfg.runner.key_mode = key_mode == "scene-only" ? MemoryKeyMode::scene_only : MemoryKeyMode::scene_and_instruction;
    }
    if (o_parallel_b->count() || o_parallel_r->count()) cfg.parallel = common.parallel;
    if (o_policy->count()) cfg.policy = policy_kind_from_string(policy);
    if (o_memory->count()) cfg.memory_selection = memory_selection_from_string(memory);
    if (o_max_steps->count()) cfg.runner.max_steps = max_steps;
    if (o_tau->count()) cfg.runner.tau = tau;
    if (o_radius->count() || o_radius_e->count()) cfg.runner.success_radius = radius;
    if (o_no_dev->count()) cfg.runner.deviation_check = false;
    if (o_prompt->count()) cfg.prompt_file = prompt;
    if (o_rate->count()) cfg.policy_rate_limit = rate;
    if (o_noise->count()) cfg.runner.impairment.bearing_noise_deg = noise;
    if (o_sensing->count()) cfg.runner.impairment.sensing_range = sensing;
    if (o_group->count()) cfg.group_by = group_by_from_string(group);
    if (o_isr->count()) cfg.isr_mode = isr_mode_from_string(isr_mode);

    // Endpoints: flag, then environment, then config file.
    if (auto v = env("SUMVLN_RECON_ENDPOINT")) cfg.reconstruction_endpoint = v;
    if (auto v = env("SUMVLN_POLICY_ENDPOINT")) cfg.policy_endpoint = v;
    if (o_recon_ep->count()) cfg.reconstruction_endpoint = recon_endpoint;
    if (o_policy_ep->count()) cfg.policy_endpoint = policy_endpoint;

    cfg.finalize();

    if (*gen) return cmd_gen(cfg);
    if (*build) return cmd_build_memory(cfg);
    if (*run) return cmd_run(cfg, keep_going);
    if (*eval) return cmd_eval(cfg, run_dirs, eval_out);
    if (*inspect) return cmd_inspect_memory(cfg, key, memory_selection_from_string(selection), inspect_out);
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "sumvln: " << e.what() << "\n";
    return e.code() == ErrorCode::BadArgs ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "sumvln: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace sumvln
