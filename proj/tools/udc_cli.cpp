#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "udc/bench.hpp"
#include "udc/instance_io.hpp"
#include "udc/nnet/checkpoint.hpp"
#include "udc/solve.hpp"
#include "udc/train.hpp"

using namespace udc;

namespace {

bool ends_with(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

std::vector<Instance> load_any(const std::string& path) {
  if (ends_with(path, ".tsp")) return {parse_tsplib(path)};
  return load_instances(path);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("io_error", "cannot write " + path);
  f << j.dump(2) << "\n";
}

struct SolveFlags {
  std::string mode = "greedy", conquer_mode = "greedy", backend = "neural", init;
  bool no_recycling = false;
  SolveConfig cfg;

  void add(CLI::App* app) {
    app->add_option("--stages", cfg.stages, "conquering stages r")->check(CLI::NonNegativeNumber);
    app->add_option("--alpha", cfg.alpha, "initial solutions per instance")->check(CLI::PositiveNumber);
    app->add_option("--sub-n", cfg.n, "sub-problem size n")->check(CLI::Range(2, 1000));
    app->add_option("--T", cfg.T, "heatmap revisits")->check(CLI::PositiveNumber);
    app->add_option("--k", cfg.k, "KNN size (0 = default)")->check(CLI::NonNegativeNumber);
    app->add_option("--beta", cfg.beta, "conquering rollouts (0 = default)")->check(CLI::NonNegativeNumber);
    app->add_option("--mode", mode, "dividing decode mode")->check(CLI::IsMember({"greedy", "sample"}));
    app->add_option("--conquer-mode", conquer_mode, "conquering decode mode")
        ->check(CLI::IsMember({"greedy", "sample"}));
    app->add_option("--backend", backend, "conquering backend")->check(CLI::IsMember({"neural", "exact"}));
    app->add_option("--init", init, "heuristic initializer instead of the dividing policy")
        ->check(CLI::IsMember({"random", "nearest_greedy", "random_insertion"}));
    app->add_flag("--no-recycling", no_recycling, "disable OP/PCTSP/KP margin recycling");
  }

  SolveConfig build(std::uint64_t seed) const {
    SolveConfig c = cfg;
    c.seed = seed;
    c.mode = parse_decode_mode(mode);
    c.conquer_mode = parse_decode_mode(conquer_mode);
    c.backend = parse_backend(backend);
    if (!init.empty()) c.init = parse_heuristic(init);
    c.margin_recycling = !no_recycling;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"udc: neural divide-and-conquer solver for routing and selection problems"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate random instances");
  std::string g_problem, g_out;
  int g_n = 100, g_count = 1;
  std::uint64_t g_seed = 0;
  GenerateParams g_params;
  bool g_tsplib = false;
  gen->add_option("--problem", g_problem)->required();
  gen->add_option("--n", g_n, "nodes per instance")->check(CLI::Range(2, 10'000'000));
  gen->add_option("--count", g_count)->check(CLI::PositiveNumber);
  gen->add_option("--seed", g_seed);
  gen->add_option("--capacity", g_params.capacity);
  gen->add_option("--budget", g_params.budget);
  gen->add_option("--edge-prob", g_params.edge_prob);
  gen->add_flag("--tsplib", g_tsplib, "write the first instance as TSPLib (TSP only)");
  gen->add_option("--out", g_out)->required();

  // train
  auto* tr = app.add_subcommand("train", "train dividing and conquering policies");
  TrainConfig tc;
  std::string t_problem, t_out, t_log;
  std::optional<bool> t_dcr;
  bool t_one_sided = false, t_freeze_divide = false, t_freeze_conquer = false;
  tr->add_option("--problem", t_problem)->required();
  tr->add_option("--seed", tc.seed)->required();
  tr->add_option("--n-min", tc.n_min);
  tr->add_option("--n-max", tc.n_max);
  tr->add_option("--sub-n", tc.n, "sub-problem size n");
  tr->add_option("--alpha", tc.alpha);
  tr->add_option("--beta", tc.beta);
  tr->add_option("--epochs", tc.epochs);
  tr->add_option("--epoch-size", tc.epoch_size);
  tr->add_option("--batch", tc.batch);
  tr->add_option("--lr-divide", tc.lr_divide);
  tr->add_option("--lr-conquer", tc.lr_conquer);
  tr->add_option("--T", tc.T);
  tr->add_option("--k", tc.k);
  tr->add_option("--agnn-layers", tc.agnn.layers);
  tr->add_option("--agnn-width", tc.agnn.width);
  tr->add_option("--conquer-width", tc.conquer.width);
  tr->add_option("--dcr", t_dcr, "force the Reunion step on/off");
  tr->add_flag("--one-sided", t_one_sided, "disable two-sided conquering rollouts");
  tr->add_flag("--freeze-divide", t_freeze_divide);
  tr->add_flag("--freeze-conquer", t_freeze_conquer);
  tr->add_option("--out", t_out, "checkpoint path")->required();
  tr->add_option("--log", t_log, "per-epoch CSV log");

  // solve
  auto* so = app.add_subcommand("solve", "solve one instance");
  SolveFlags s_flags;
  std::string s_problem, s_instance, s_model, s_out;
  int s_n = 100;
  std::uint64_t s_seed = 0;
  so->add_option("--problem", s_problem);
  so->add_option("--instance", s_instance, "instance JSON or TSPLib .tsp file");
  so->add_option("--n", s_n, "nodes of the generated instance when --instance is absent")
      ->check(CLI::Range(2, 10'000'000));
  so->add_option("--seed", s_seed)->required();
  so->add_option("--model", s_model, "checkpoint");
  so->add_option("--out", s_out, "result JSON (default stdout)");
  s_flags.add(so);

  // bench
  auto* be = app.add_subcommand("bench", "run a benchmark over a test set");
  SolveFlags b_flags;
  std::string b_problem, b_test, b_refs, b_model, b_out;
  std::uint64_t b_seed = 0;
  int b_threads = 0;
  be->add_option("--problem", b_problem)->required();
  be->add_option("--test-set", b_test, "instance JSON array or TSPLib .tsp file")->required();
  be->add_option("--refs", b_refs, "JSON array of reference objectives (null = none)");
  be->add_option("--model", b_model, "checkpoint");
  be->add_option("--seed", b_seed);
  be->add_option("--threads", b_threads, "pool size (default UDC_THREADS or 1)");
  be->add_option("--out", b_out, "report stem; writes <stem>.csv and <stem>.json")->required();
  b_flags.add(be);

  // inspect-checkpoint
  auto* ins = app.add_subcommand("inspect-checkpoint", "print a checkpoint header and tensor shapes");
  std::string i_path;
  ins->add_option("path", i_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*gen) {
      const ProblemKind kind = parse_kind(g_problem);
      std::vector<Instance> out;
      for (int i = 0; i < g_count; ++i) out.push_back(generate_instance(kind, g_n, derive_seed(g_seed, i), g_params));
      if (g_tsplib) {
        write_tsplib(g_out, out.front());
      } else {
        save_instances(g_out, out);
      }
      std::cerr << "wrote " << out.size() << " " << to_string(kind) << " instance(s) to " << g_out << "\n";
    } else if (*tr) {
      tc.kind = parse_kind(t_problem);
      tc.dcr = t_dcr;
      tc.two_sided = !t_one_sided;
      tc.train_divide = !t_freeze_divide;
      tc.train_conquer = !t_freeze_conquer;
      validate(tc);
      std::cerr << "problem " << to_string(tc.kind) << ", reunion " << (tc.dcr_enabled() ? "enabled" : "disabled")
                << ", alpha " << tc.alpha << ", beta " << tc.beta << ", n " << tc.n << "\n";
      Policy policy(tc.kind, tc.agnn, tc.conquer, derive_seed(tc.seed, 0xfeed));
      TrainOutputs outs;
      outs.checkpoint = t_out;
      outs.log_csv = t_log;
      outs.on_epoch = [](const EpochLog& e) { std::cerr << "epoch " << csv_row(e) << "\n"; };
      train(policy, tc, outs);
      std::cerr << "checkpoint " << t_out << "\n";
    } else if (*so) {
      std::vector<Instance> insts;
      if (!s_instance.empty()) {
        insts = load_any(s_instance);
        if (insts.size() != 1) throw Error("invalid_argument", "solve expects exactly one instance");
        if (!s_problem.empty() && parse_kind(s_problem) != insts[0].kind)
          throw Error("kind_mismatch", "--problem disagrees with the instance file");
      } else {
        if (s_problem.empty()) throw CLI::RequiredError("--problem or --instance");
        insts.push_back(generate_instance(parse_kind(s_problem), s_n, derive_seed(s_seed, 0x1257)));
      }
      const SolveConfig cfg = s_flags.build(s_seed);
      std::optional<Policy> policy;
      if (!s_model.empty()) {
        policy.emplace(load_policy(s_model));
      } else if (!cfg.init || cfg.backend == Backend::kNeural) {
        throw CLI::RequiredError("--model (or --init with --backend exact)");
      }
      const SolveResult res = solve(insts[0], policy ? &*policy : nullptr, cfg);
      nlohmann::json j = to_json(res);
      j["config"] = to_json(cfg);
      j["instance"] = {{"kind", to_string(insts[0].kind)}, {"n", insts[0].n}, {"scale", insts[0].scale}};
      if (!insts[0].name.empty()) j["instance"]["name"] = insts[0].name;
      write_json(s_out, j);
      std::cerr << "objective " << res.best.objective << " (" << res.wall_ms << " ms)\n";
    } else if (*be) {
      BenchConfig bc;
      bc.kind = parse_kind(b_problem);
      bc.instances = load_any(b_test);
      if (!b_refs.empty()) {
        std::ifstream f(b_refs);
        if (!f) throw Error("io_error", "cannot read " + b_refs);
        const auto j = nlohmann::json::parse(f);
        for (const auto& v : j) bc.references.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
      }
      bc.solve = b_flags.build(b_seed);
      bc.checkpoint = b_model;
      bc.threads = b_threads;
      const RunReport r = run_benchmark(bc);
      write_report(r, b_out);
      std::cerr << r.rows.size() << " rows, mean obj " << r.mean_obj << ", mean gap " << r.mean_gap << "%\n";
    } else if (*ins) {
      const auto ck = nn::read_checkpoint(i_path);
      nlohmann::json tensors = nlohmann::json::array();
      for (const auto& e : ck.entries) tensors.push_back({{"name", e.name}, {"shape", {e.value.rows, e.value.cols}}});
      char hash[32];
      std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(ck.config_hash));
      write_json("-", {{"config_hash", hash}, {"header", ck.header}, {"tensors", tensors}});
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
