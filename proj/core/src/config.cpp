#include "muse/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace muse {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return std::string(s);
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Parser {
  std::map<std::string, std::string> kv;
  std::vector<std::string> errors;

  bool has(const std::string& key) const { return kv.contains(key); }

  template <typename Fn>
  void take(const std::string& key, Fn&& fn) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    fn(it->second);
    kv.erase(it);
  }

  void bad(const std::string& key, const std::string& why) {
    errors.push_back(key + ": " + why);
  }

  void number(const std::string& key, double lo, double hi, double& out) {
    take(key, [&](const std::string& v) {
      try {
        std::size_t used = 0;
        double parsed = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        if (parsed < lo || parsed > hi) {
          bad(key, "value " + v + " outside [" + fmt_double(lo) + ", " + fmt_double(hi) + "]");
          return;
        }
        out = parsed;
      } catch (const std::exception&) {
        bad(key, "not a number: '" + v + "'");
      }
    });
  }

  void integer(const std::string& key, std::int64_t lo, std::int64_t hi, std::int64_t& out) {
    take(key, [&](const std::string& v) {
      try {
        std::size_t used = 0;
        std::int64_t parsed = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        if (parsed < lo || parsed > hi) {
          bad(key, "value " + v + " outside [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
          return;
        }
        out = parsed;
      } catch (const std::exception&) {
        bad(key, "not an integer: '" + v + "'");
      }
    });
  }

  void unsigned64(const std::string& key, std::uint64_t& out) {
    take(key, [&](const std::string& v) {
      try {
        std::size_t used = 0;
        out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        bad(key, "not an unsigned integer: '" + v + "'");
      }
    });
  }

  void boolean(const std::string& key, bool& out) {
    take(key, [&](const std::string& v) {
      if (v == "true")
        out = true;
      else if (v == "false")
        out = false;
      else
        bad(key, "expected true|false, got '" + v + "'");
    });
  }

  void string(const std::string& key, std::string& out) {
    take(key, [&](const std::string& v) { out = v; });
  }
};

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  Parser p;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv(line);
    if (auto h = sv.find('#'); h != std::string_view::npos) sv = sv.substr(0, h);
    std::string stripped = trim(sv);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      p.errors.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    std::string key = trim(std::string_view(stripped).substr(0, eq));
    std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty()) {
      p.errors.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (p.kv.contains(key)) p.errors.push_back("duplicate key '" + key + "'");
    p.kv[key] = value;
  }

  RunConfig cfg;
  p.string("graph", cfg.graph);
  p.string("train_bundle", cfg.train_bundle);
  p.string("val_bundle", cfg.val_bundle);
  p.string("test_bundle", cfg.test_bundle);
  p.string("checkpoint", cfg.checkpoint);
  p.string("metrics", cfg.metrics);
  p.boolean("eval_train", cfg.eval_train);

  p.integer("epochs", 1, 1000000, cfg.train.epochs);
  p.integer("hidden_dim", 1, 65536, cfg.train.hidden_dim);
  p.integer("unfold_layers", 1, 4096, cfg.train.energy.K);
  p.number("lambda", 0.0, 1e12, cfg.train.energy.lambda);
  p.number("gamma", 0.0, 1e12, cfg.train.energy.gamma);
  p.number("rho", 0.0, 1.0, cfg.train.energy.rho);
  p.take("alpha", [&](const std::string& v) {
    if (v == "auto") {
      cfg.train.alpha_auto = true;
      return;
    }
    try {
      std::size_t used = 0;
      double parsed = std::stod(v, &used);
      if (used != v.size() || parsed <= 0.0) throw std::invalid_argument("");
      cfg.train.alpha_auto = false;
      cfg.train.energy.alpha = parsed;
    } catch (const std::exception&) {
      p.bad("alpha", "expected 'auto' or a positive number, got '" + v + "'");
    }
  });
  p.take("penalty", [&](const std::string& v) {
    if (v == "none")
      cfg.train.energy.penalty = Penalty::none;
    else if (v == "nonneg")
      cfg.train.energy.penalty = Penalty::nonneg_indicator;
    else
      p.bad("penalty", "expected none|nonneg, got '" + v + "'");
  });
  p.number("dropout", 0.0, 0.999, cfg.train.dropout);
  p.take("model", [&](const std::string& v) {
    if (v == "muse")
      cfg.train.model = ModelKind::muse;
    else if (v == "mlp")
      cfg.train.model = ModelKind::mlp;
    else
      p.bad("model", "expected muse|mlp, got '" + v + "'");
  });
  p.take("optimizer", [&](const std::string& v) {
    if (v == "adam")
      cfg.train.optimizer = OptimizerKind::adam;
    else if (v == "sgd")
      cfg.train.optimizer = OptimizerKind::sgd;
    else
      p.bad("optimizer", "expected adam|sgd, got '" + v + "'");
  });
  p.number("lr", 0.0, 1e6, cfg.train.lr);
  p.number("eta0", 0.0, 1e6, cfg.train.eta0);
  p.integer("eval_every", 1, 1000000, cfg.train.eval_every);
  p.unsigned64("seed", cfg.train.seed);
  p.boolean("eval_mutates_summary", cfg.train.eval_mutates_summary);
  p.integer("batch_subgraphs", 1, 65536, cfg.train.batch_subgraphs);
  p.integer("workers", 1, 4096, cfg.train.workers);
  p.boolean("dry_run", cfg.train.dry_run);

  for (const auto& [key, value] : p.kv) p.errors.push_back("unknown key '" + key + "'");
  for (const char* req : {"graph", "train_bundle", "checkpoint", "metrics"}) {
    const std::string* v = nullptr;
    if (std::string(req) == "graph") v = &cfg.graph;
    if (std::string(req) == "train_bundle") v = &cfg.train_bundle;
    if (std::string(req) == "checkpoint") v = &cfg.checkpoint;
    if (std::string(req) == "metrics") v = &cfg.metrics;
    if (v && v->empty()) p.errors.push_back(std::string("missing required key '") + req + "'");
  }

  if (!p.errors.empty()) {
    std::string msg = origin + ": invalid configuration:";
    for (const auto& e : p.errors) msg += "\n  " + e;
    throw Error(msg);
  }
  cfg.train.checkpoint_path = cfg.checkpoint;
  return cfg;
}

RunConfig parse_run_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

std::string render_run_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "graph = " << cfg.graph << '\n';
  out << "train_bundle = " << cfg.train_bundle << '\n';
  if (!cfg.val_bundle.empty()) out << "val_bundle = " << cfg.val_bundle << '\n';
  if (!cfg.test_bundle.empty()) out << "test_bundle = " << cfg.test_bundle << '\n';
  out << "checkpoint = " << cfg.checkpoint << '\n';
  out << "metrics = " << cfg.metrics << '\n';
  out << "eval_train = " << (cfg.eval_train ? "true" : "false") << '\n';
  out << "epochs = " << cfg.train.epochs << '\n';
  out << "hidden_dim = " << cfg.train.hidden_dim << '\n';
  out << "unfold_layers = " << cfg.train.energy.K << '\n';
  out << "lambda = " << fmt_double(cfg.train.energy.lambda) << '\n';
  out << "gamma = " << fmt_double(cfg.train.energy.gamma) << '\n';
  out << "rho = " << fmt_double(cfg.train.energy.rho) << '\n';
  if (cfg.train.alpha_auto)
    out << "alpha = auto\n";
  else
    out << "alpha = " << fmt_double(cfg.train.energy.alpha) << '\n';
  out << "penalty = " << (cfg.train.energy.penalty == Penalty::none ? "none" : "nonneg") << '\n';
  out << "dropout = " << fmt_double(cfg.train.dropout) << '\n';
  out << "model = " << (cfg.train.model == ModelKind::muse ? "muse" : "mlp") << '\n';
  out << "optimizer = " << (cfg.train.optimizer == OptimizerKind::adam ? "adam" : "sgd") << '\n';
  out << "lr = " << fmt_double(cfg.train.lr) << '\n';
  out << "eta0 = " << fmt_double(cfg.train.eta0) << '\n';
  out << "eval_every = " << cfg.train.eval_every << '\n';
  out << "seed = " << cfg.train.seed << '\n';
  out << "eval_mutates_summary = " << (cfg.train.eval_mutates_summary ? "true" : "false") << '\n';
  out << "batch_subgraphs = " << cfg.train.batch_subgraphs << '\n';
  out << "workers = " << cfg.train.workers << '\n';
  out << "dry_run = " << (cfg.train.dry_run ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace muse
