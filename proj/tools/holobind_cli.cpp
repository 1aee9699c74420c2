// holobind: command-line front end. Every subcommand parses flags, calls one
// library entry point and writes its result.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>

#include "holobind/alt_bindings.hpp"
#include "holobind/audit.hpp"
#include "holobind/backbone.hpp"
#include "holobind/errors.hpp"
#include "holobind/protocol.hpp"
#include "holobind/tensor_io.hpp"
#include "holobind/trainer.hpp"
#include "holobind/vsa.hpp"

namespace hb = holobind;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool verbose = false;
};

// "-" means standard output.
void with_output(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path == "-") {
    body(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw hb::Error("cannot open '" + path + "' for writing");
  body(out);
  if (!out) throw hb::Error("write to '" + path + "' failed");
}

void log(const Globals& g, const std::string& line) {
  if (g.verbose) std::cerr << line << '\n';
}

void add_op_flag(CLI::App* cmd, std::string& op) {
  cmd->add_option("--op", op, "Binding operator")
      ->check(CLI::IsMember({"hrr2d", "hrr1d", "vtb", "ivtb", "hilbert"}))
      ->capture_default_str();
}

hb::BackboneSpec spec_from(const std::string& spec_path, const std::string& model_path) {
  if (!model_path.empty()) return hb::load_model(model_path).backbone;
  return hb::load_backbone_spec(spec_path);
}

// Blocks SIGINT/SIGTERM in every thread and returns once one arrives.
void wait_for_shutdown_signal(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"holobind: HRR binding as a pseudo one-time pad for split inference"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->envname("HOLOBIND_SEED")->capture_default_str();
  app.add_flag("--verbose,-v", g.verbose, "Log progress to stderr");

  std::map<std::string, std::function<void()>> actions;

  {
    auto* cmd = app.add_subcommand("gen-secret", "Sample a projected secret (or an operator key)");
    static std::string dims, out, op = "hrr2d";
    cmd->add_option("--dims", dims, "Shape, e.g. 16x16x1")->required();
    cmd->add_option("--out", out, "Output tensor file")->required();
    add_op_flag(cmd, op);
    actions["gen-secret"] = [&g] {
      const auto key = hb::secret_for(hb::parse_binding_op(op), hb::parse_dims(dims), hb::RngStream(g.seed));
      hb::write_tensor(out, key.value);
      log(g, "wrote " + std::string(op) + " key " + hb::dims_to_string(key.value.dims()) + " to " + out);
    };
  }
  {
    auto* cmd = app.add_subcommand("bind", "Bind a tensor with a secret");
    static std::string in, secret, out, op = "hrr2d";
    cmd->add_option("--in", in, "Input tensor file")->required();
    cmd->add_option("--secret", secret, "Secret tensor file")->required();
    cmd->add_option("--out", out, "Output tensor file")->required();
    add_op_flag(cmd, op);
    actions["bind"] = [] {
      hb::write_tensor(out, hb::bind_op(hb::parse_binding_op(op), hb::read_tensor(in), hb::read_tensor(secret)));
    };
  }
  {
    auto* cmd = app.add_subcommand("unbind", "Unbind a tensor with its secret");
    static std::string in, secret, out, op = "hrr2d", dims;
    cmd->add_option("--in", in, "Bound tensor file")->required();
    cmd->add_option("--secret", secret, "Secret tensor file")->required();
    cmd->add_option("--out", out, "Output tensor file")->required();
    cmd->add_option("--dims", dims, "Original shape (needed by --op hilbert)");
    add_op_flag(cmd, op);
    actions["unbind"] = [] {
      const auto kind = hb::parse_binding_op(op);
      const hb::Tensor bound = hb::read_tensor(in);
      if (kind == hb::BindingOp::hilbert && dims.empty())
        throw hb::ParameterError("unbind --op hilbert needs --dims");
      const hb::Dims original = dims.empty() ? bound.dims() : hb::parse_dims(dims);
      hb::write_tensor(out, hb::unbind_op(kind, bound, hb::read_tensor(secret), original));
    };
  }
  {
    auto* cmd = app.add_subcommand("probe", "Presence/absence probe curves as CSV");
    static std::size_t d = 1024, kmax = 32, trials = 100;
    static std::string mode = "both", out = "-";
    cmd->add_option("--d", d, "Dimension (a perfect square)")->capture_default_str();
    cmd->add_option("--kmax", kmax, "Largest bundle size; k runs over powers of two")->capture_default_str();
    cmd->add_option("--trials", trials, "Trials per k")->capture_default_str();
    cmd->add_option("--mode", mode)->check(CLI::IsMember({"both", "projected", "naive"}))->capture_default_str();
    cmd->add_option("--out", out, "CSV path or -")->capture_default_str();
    actions["probe"] = [&g] {
      hb::ProbeConfig cfg;
      cfg.side = 0;
      while ((cfg.side + 1) * (cfg.side + 1) <= d) ++cfg.side;
      if (cfg.side * cfg.side != d || d == 0) throw hb::ParameterError("--d must be a positive perfect square");
      if (kmax == 0) throw hb::ParameterError("--kmax must be at least 1");
      cfg.term_counts.clear();
      for (std::size_t k = 1; k <= kmax; k *= 2) cfg.term_counts.push_back(k);
      if (mode == "projected") cfg.modes = {hb::ProbeMode::projected};
      if (mode == "naive") cfg.modes = {hb::ProbeMode::naive};
      cfg.trials = trials;
      cfg.seed = g.seed;
      const auto rows = hb::run_probe_experiment(cfg);
      with_output(out, [&](std::ostream& os) { hb::write_probe_csv(os, rows); });
    };
  }
  {
    auto* cmd = app.add_subcommand("serve", "Run the untrusted worker over TCP");
    static std::string spec, model, listen = "127.0.0.1:7070";
    auto* spec_opt = cmd->add_option("--spec", spec, "Backbone spec file");
    auto* model_opt = cmd->add_option("--model", model, "Trained toy model (serves its backbone)");
    spec_opt->excludes(model_opt);
    cmd->add_option("--listen", listen, "host:port; port 0 picks a free port")->capture_default_str();
    actions["serve"] = [&g] {
      if (spec.empty() && model.empty()) throw hb::ParameterError("serve needs --spec or --model");
      hb::RequestLogger logger;
      if (g.verbose)
        logger = [](const hb::RequestLog& e) {
          std::fprintf(stderr, "request %llu %s %.1fus %s\n", static_cast<unsigned long long>(e.request_id),
                       hb::dims_to_string(e.dims).c_str(), e.micros, hb::to_string(e.status));
        };
      const hb::Worker worker(spec_from(spec, model), logger);
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);
      hb::WorkerServer server(worker);
      const auto bound = server.start(hb::Endpoint::parse(listen));
      std::cout << "listening on " << bound.to_string() << std::endl;
      wait_for_shutdown_signal(set);
      server.stop();
    };
  }
  {
    auto* cmd = app.add_subcommand("query", "Client inference against a remote worker");
    static std::string in, endpoint, model, out = "-";
    static std::size_t k = 1;
    cmd->add_option("--in", in, "Input tensor file")->required();
    cmd->add_option("--endpoint", endpoint, "Worker host:port")->required();
    cmd->add_option("--model", model, "Toy model holding the prediction head")->required();
    cmd->add_option("--k", k, "Replicates to average")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--out", out, "CSV path or -")->capture_default_str();
    actions["query"] = [&g] {
      const auto toy = hb::load_model(model);
      hb::TcpTransport transport(hb::Endpoint::parse(endpoint));
      const auto dist = hb::client_infer(hb::read_tensor(in), hb::QueryPlan{k, hb::RngStream(g.seed)},
                                         transport, toy.predictor);
      with_output(out, [&](std::ostream& os) {
        os << "class,probability\n";
        char buf[32];
        for (std::size_t c = 0; c < dist.size(); ++c) {
          std::snprintf(buf, sizeof buf, "%.9g", dist[c]);
          os << c << ',' << buf << '\n';
        }
      });
    };
  }
  {
    auto* cmd = app.add_subcommand("bench", "Remote/local cost split as CSV");
    static std::string spec, dims, out = "-";
    static std::size_t k = 1, classes = 4;
    cmd->add_option("--spec", spec, "Backbone spec file (default: toy f_W)");
    cmd->add_option("--dims", dims, "Input shape; must match --spec when both are given");
    cmd->add_option("--k", k)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--classes", classes, "Classes of the local prediction head")->capture_default_str();
    cmd->add_option("--out", out, "CSV path or -")->capture_default_str();
    actions["bench"] = [&g] {
      if (spec.empty() && dims.empty()) throw hb::ParameterError("bench needs --spec or --dims");
      const hb::BackboneSpec s = spec.empty() ? hb::toy_fw_spec(hb::parse_dims(dims), g.seed)
                                              : hb::load_backbone_spec(spec);
      if (!dims.empty() && hb::parse_dims(dims) != s.input_dims)
        throw hb::ShapeError("--dims " + dims + " does not match the spec input " + hb::dims_to_string(s.input_dims));
      const hb::Head head = hb::make_head(hb::element_count(s.input_dims), hb::kHeadHidden, classes, 0);
      const auto report = hb::cost_report(s, k, &head);
      with_output(out, [&](std::ostream& os) { hb::write_cost_csv(os, k, report); });
    };
  }
  {
    auto* cmd = app.add_subcommand("train-toy", "Train the toy model on the synthetic task");
    static std::string out, metrics;
    static std::size_t epochs = 60;
    cmd->add_option("--out", out, "Model file")->required();
    cmd->add_option("--metrics", metrics, "Per-epoch CSV");
    cmd->add_option("--epochs", epochs)->check(CLI::PositiveNumber)->capture_default_str();
    actions["train-toy"] = [&g] {
      hb::TrainConfig cfg;
      cfg.seed = g.seed;
      cfg.epochs = epochs;
      const auto data = hb::synth_dataset(g.seed);
      const auto result = hb::train_csps(data, cfg, [&g](const hb::EpochMetrics& m) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "epoch %zu loss %.4f pred %.3f adv %.3f", m.epoch, m.train_loss,
                      m.pred_acc, m.adv_acc);
        log(g, buf);
      });
      hb::save_model(out, result.model);
      if (!metrics.empty()) with_output(metrics, [&](std::ostream& os) { hb::write_metrics_csv(os, result.metrics); });
    };
  }
  {
    auto* cmd = app.add_subcommand("attack", "Run an attack against a trained toy model");
    static std::string kind, model, out = "-";
    cmd->add_option("--kind", kind)->required()->check(CLI::IsMember({"cluster", "strong", "invert", "regress"}));
    cmd->add_option("--model", model, "Toy model file")->required();
    cmd->add_option("--out", out, "CSV path or -")->capture_default_str();
    actions["attack"] = [&g] {
      const auto toy = hb::load_model(model);
      // The model file echoes its training seed, which also fixes the dataset.
      const auto data = hb::synth_dataset(toy.config.seed);
      const auto reports = hb::run_attack(hb::parse_attack_kind(kind), toy, data, g.seed);
      with_output(out, [&](std::ostream& os) { hb::write_attack_csv(os, reports); });
    };
  }
  {
    auto* cmd = app.add_subcommand("ablate", "Compare binding operators as CSV");
    static std::size_t count = 32;
    static std::string out = "-";
    cmd->add_option("--count", count, "Synthetic test images to use")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--out", out, "CSV path or -")->capture_default_str();
    actions["ablate"] = [&g] {
      auto data = hb::synth_dataset(g.seed);
      if (count > data.test_images.size()) throw hb::ParameterError("--count exceeds the synthetic test split");
      data.test_images.resize(count);
      const auto rows = hb::run_ablation(data.test_images, g.seed);
      with_output(out, [&](std::ostream& os) { hb::write_ablation_csv(os, rows); });
    };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (auto* sub : app.get_subcommands()) actions.at(sub->get_name())();
  } catch (const hb::Error& e) {
    std::cerr << "holobind: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "holobind: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
