#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "taxflow/cli_io.hpp"
#include "taxflow/efficient_strategies.hpp"
#include "taxflow/error.hpp"
#include "taxflow/fixtures.hpp"

namespace taxflow {

namespace {

struct FieldError {
  std::string message;
};

using Check = std::optional<std::string>;

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const YAML::Node&)> set;
  std::function<Check(const ExperimentConfig&)> check;
};

double read_number(const YAML::Node& n) {
  if (!n.IsScalar()) throw FieldError{"expects a number"};
  try {
    const double v = n.as<double>();
    if (!std::isfinite(v)) throw FieldError{"expects a finite number"};
    return v;
  } catch (const YAML::Exception&) {
    throw FieldError{fmt::format("expects a number, got '{}'", n.Scalar())};
  }
}

std::uint64_t read_unsigned(const YAML::Node& n) {
  if (!n.IsScalar()) throw FieldError{"expects a nonnegative integer"};
  const std::string& s = n.Scalar();
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw FieldError{fmt::format("expects a nonnegative integer, got '{}'", s)};
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw FieldError{fmt::format("integer '{}' is out of range", s)};
  }
}

std::string read_string(const YAML::Node& n) {
  if (!n.IsScalar()) throw FieldError{"expects a string"};
  return n.Scalar();
}

std::vector<double> read_list(const YAML::Node& n) {
  if (!n.IsSequence()) throw FieldError{"expects a list of numbers"};
  std::vector<double> out;
  for (const auto& item : n) out.push_back(read_number(item));
  return out;
}

template <class T>
using Ref = T& (*)(ExperimentConfig&);

template <class T>
const T& get(Ref<T> ref, const ExperimentConfig& c) {
  return ref(const_cast<ExperimentConfig&>(c));
}

Field number(std::string key, Ref<double> ref, std::function<Check(double)> rule) {
  return {key, [ref](ExperimentConfig& c, const YAML::Node& n) { ref(c) = read_number(n); },
          [ref, rule](const ExperimentConfig& c) { return rule(get(ref, c)); }};
}

Field count(std::string key, Ref<std::size_t> ref, std::size_t lo, std::size_t hi) {
  return {key, [ref](ExperimentConfig& c, const YAML::Node& n) { ref(c) = static_cast<std::size_t>(read_unsigned(n)); },
          [ref, key, lo, hi](const ExperimentConfig& c) -> Check {
            const std::size_t v = get(ref, c);
            if (v < lo || v > hi) return fmt::format("{} must lie in [{}, {}], got {}", key, lo, hi, v);
            return std::nullopt;
          }};
}

Field choice(std::string key, Ref<std::string> ref, std::vector<std::string> allowed) {
  return {key, [ref](ExperimentConfig& c, const YAML::Node& n) { ref(c) = read_string(n); },
          [ref, key, allowed](const ExperimentConfig& c) -> Check {
            const std::string& v = get(ref, c);
            for (const auto& a : allowed)
              if (a == v) return std::nullopt;
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            return fmt::format("{} must be one of {}, got '{}'", key, list, v);
          }};
}

Field list(std::string key, Ref<std::vector<double>> ref) {
  return {key, [ref](ExperimentConfig& c, const YAML::Node& n) { ref(c) = read_list(n); },
          [ref, key](const ExperimentConfig& c) -> Check {
            for (double v : get(ref, c))
              if (v < 0.0) return fmt::format("{} entries must be nonnegative", key);
            return std::nullopt;
          }};
}

std::function<Check(double)> open_interval(std::string key, double lo, double hi) {
  return [=](double v) -> Check {
    if (!(v > lo && v < hi)) return fmt::format("{} must lie in ({}, {}), got {}", key, lo, hi, v);
    return std::nullopt;
  };
}

std::function<Check(double)> half_open(std::string key, double lo, double hi) {
  return [=](double v) -> Check {
    if (!(v >= lo && v < hi)) return fmt::format("{} must lie in [{}, {}), got {}", key, lo, hi, v);
    return std::nullopt;
  };
}

std::function<Check(double)> closed(std::string key, double lo, double hi) {
  return [=](double v) -> Check {
    if (!(v >= lo && v <= hi)) return fmt::format("{} must lie in [{}, {}], got {}", key, lo, hi, v);
    return std::nullopt;
  };
}

std::function<Check(double)> positive(std::string key) {
  return [=](double v) -> Check {
    if (!(v > 0.0)) return fmt::format("{} must be positive, got {}", key, v);
    return std::nullopt;
  };
}

std::function<Check(double)> nonnegative(std::string key) {
  return [=](double v) -> Check {
    if (!(v >= 0.0)) return fmt::format("{} must be nonnegative, got {}", key, v);
    return std::nullopt;
  };
}

std::function<Check(double)> any() {
  return [](double) -> Check { return std::nullopt; };
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"experiment", [](ExperimentConfig& c, const YAML::Node& n) {
                   const std::string name = read_string(n);
                   const auto kind = parse_experiment_kind(name);
                   if (!kind)
                     throw FieldError{fmt::format(
                         "unknown experiment '{}' (ledger, simulate, compare-dividends, efficient, converge, verify)",
                         name)};
                   c.kind = *kind;
                 },
                 [](const ExperimentConfig&) -> Check { return std::nullopt; }});
    f.push_back(number("alpha", +[](ExperimentConfig& c) -> double& { return c.alpha; }, open_interval("alpha", 0, 1)));
    f.push_back(number("rate", +[](ExperimentConfig& c) -> double& { return c.rate; }, nonnegative("rate")));
    f.push_back(number("v0", +[](ExperimentConfig& c) -> double& { return c.v0; }, any()));
    f.push_back({"seed", [](ExperimentConfig& c, const YAML::Node& n) { c.seed = read_unsigned(n); },
                 [](const ExperimentConfig&) -> Check { return std::nullopt; }});
    f.push_back(count("batch", +[](ExperimentConfig& c) -> std::size_t& { return c.batch; }, 1, 1'000'000));
    f.push_back(count("threads", +[](ExperimentConfig& c) -> std::size_t& { return c.threads; }, 1, 256));
    f.push_back({"output", [](ExperimentConfig& c, const YAML::Node& n) { c.output = read_string(n); },
                 [](const ExperimentConfig& c) -> Check {
                   if (c.output.empty()) return std::string("output must not be empty");
                   return std::nullopt;
                 }});

    f.push_back(choice("model.name", +[](ExperimentConfig& c) -> std::string& { return c.model.name; },
                       {"crr", "gbm", "jump_diffusion"}));
    f.push_back(number("model.s0", +[](ExperimentConfig& c) -> double& { return c.model.s0; }, positive("model.s0")));
    f.push_back(number("model.mu", +[](ExperimentConfig& c) -> double& { return c.model.mu; }, any()));
    f.push_back(
        number("model.sigma", +[](ExperimentConfig& c) -> double& { return c.model.sigma; }, nonnegative("model.sigma")));
    f.push_back(count("model.steps", +[](ExperimentConfig& c) -> std::size_t& { return c.model.steps; }, 1, 10'000'000));
    f.push_back(
        number("model.horizon", +[](ExperimentConfig& c) -> double& { return c.model.horizon; }, positive("model.horizon")));
    f.push_back(number("model.jump_intensity", +[](ExperimentConfig& c) -> double& { return c.model.jump_intensity; },
                       nonnegative("model.jump_intensity")));
    f.push_back(number("model.jump_up", +[](ExperimentConfig& c) -> double& { return c.model.jump_up; },
                       nonnegative("model.jump_up")));
    f.push_back(number("model.jump_down", +[](ExperimentConfig& c) -> double& { return c.model.jump_down; },
                       closed("model.jump_down", 0, 1)));
    f.push_back(number("model.jump_p_up", +[](ExperimentConfig& c) -> double& { return c.model.jump_p_up; },
                       closed("model.jump_p_up", 0, 1)));

    f.push_back(choice("strategy.kind", +[](ExperimentConfig& c) -> std::string& { return c.strategy.kind; },
                       {"fixture", "explicit", "feedback", "random"}));
    f.push_back({"strategy.fixture", [](ExperimentConfig& c, const YAML::Node& n) { c.strategy.fixture = read_string(n); },
                 [](const ExperimentConfig&) -> Check { return std::nullopt; }});
    f.push_back(list("strategy.positions", +[](ExperimentConfig& c) -> std::vector<double>& { return c.strategy.positions; }));
    f.push_back(list("strategy.prices", +[](ExperimentConfig& c) -> std::vector<double>& { return c.strategy.prices; }));
    f.push_back(choice("strategy.rule", +[](ExperimentConfig& c) -> std::string& { return c.strategy.rule; },
                       {"linear", "power", "tabulated"}));
    f.push_back(number("strategy.slope", +[](ExperimentConfig& c) -> double& { return c.strategy.slope; },
                       nonnegative("strategy.slope")));
    f.push_back(number("strategy.intercept", +[](ExperimentConfig& c) -> double& { return c.strategy.intercept; },
                       nonnegative("strategy.intercept")));
    f.push_back(number("strategy.scale", +[](ExperimentConfig& c) -> double& { return c.strategy.scale; },
                       nonnegative("strategy.scale")));
    f.push_back(number("strategy.exponent", +[](ExperimentConfig& c) -> double& { return c.strategy.exponent; },
                       positive("strategy.exponent")));
    f.push_back(
        list("strategy.table_prices", +[](ExperimentConfig& c) -> std::vector<double>& { return c.strategy.table_prices; }));
    f.push_back(
        list("strategy.table_shares", +[](ExperimentConfig& c) -> std::vector<double>& { return c.strategy.table_shares; }));

    f.push_back(number("dividends.step_return", +[](ExperimentConfig& c) -> double& { return c.dividends.step_return; },
                       half_open("dividends.step_return", 0, 1)));
    f.push_back(number("dividends.probability", +[](ExperimentConfig& c) -> double& { return c.dividends.probability; },
                       closed("dividends.probability", 0, 1)));
    f.push_back(number("dividends.max_yield", +[](ExperimentConfig& c) -> double& { return c.dividends.max_yield; },
                       closed("dividends.max_yield", 0, 1)));
    f.push_back(number("dividends.max_shares", +[](ExperimentConfig& c) -> double& { return c.dividends.max_shares; },
                       closed("dividends.max_shares", 0, 1e6)));

    f.push_back(count("convergence.levels", +[](ExperimentConfig& c) -> std::size_t& { return c.convergence.levels; }, 2, 12));
    f.push_back(count("convergence.base_steps",
                      +[](ExperimentConfig& c) -> std::size_t& { return c.convergence.base_steps; }, 1, 100'000));
    f.push_back(count("convergence.coarse_steps",
                      +[](ExperimentConfig& c) -> std::size_t& { return c.convergence.coarse_steps; }, 1, 100'000));
    f.push_back(count("convergence.fine_factor",
                      +[](ExperimentConfig& c) -> std::size_t& { return c.convergence.fine_factor; }, 1, 1024));
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

bool is_section(const std::string& key) {
  return key == "model" || key == "strategy" || key == "dividends" || key == "convergence";
}

int line_of(const YAML::Node& n) { return n.Mark().line + 1; }

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Ledger: return "ledger";
    case ExperimentKind::Simulate: return "simulate";
    case ExperimentKind::CompareDividends: return "compare-dividends";
    case ExperimentKind::Efficient: return "efficient";
    case ExperimentKind::Converge: return "converge";
    case ExperimentKind::Verify: return "verify";
  }
  return "ledger";
}

std::optional<ExperimentKind> parse_experiment_kind(const std::string& name) {
  for (auto k : {ExperimentKind::Ledger, ExperimentKind::Simulate, ExperimentKind::CompareDividends,
                 ExperimentKind::Efficient, ExperimentKind::Converge, ExperimentKind::Verify})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::Ledger: c.strategy.kind = "fixture"; break;
    case ExperimentKind::Simulate: break;
    case ExperimentKind::CompareDividends:
      c.strategy.kind = "random";
      c.model.steps = 20;
      c.rate = 0.02;
      c.batch = 200;
      break;
    case ExperimentKind::Efficient: c.model.steps = 1000; break;
    case ExperimentKind::Converge: break;
    case ExperimentKind::Verify: c.batch = 200; break;
  }
  return c;
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  for (const auto& f : fields())
    if (auto e = f.check(c)) errors.push_back(*e);

  const auto& s = c.strategy;
  const bool grid_free = c.kind == ExperimentKind::Verify;
  if (!grid_free) {
    if (s.kind == "fixture") {
      if (c.kind != ExperimentKind::Ledger) errors.push_back("strategy.kind 'fixture' is only available for ledger");
      bool known = false;
      for (const auto& n : fixture_names()) known = known || n == s.fixture;
      if (!known) errors.push_back(fmt::format("strategy.fixture '{}' does not exist (figure2, figure3)", s.fixture));
    }
    if (s.kind == "explicit") {
      if (s.positions.empty()) errors.push_back("strategy.positions is required for strategy.kind 'explicit'");
      if (!s.prices.empty() && s.prices.size() != s.positions.size())
        errors.push_back(fmt::format("strategy.prices has {} entries but strategy.positions has {}", s.prices.size(),
                                     s.positions.size()));
      if (!s.prices.empty() && c.kind != ExperimentKind::Ledger)
        errors.push_back("strategy.prices is only used by ledger; other experiments generate prices from model");
      if (c.kind != ExperimentKind::Ledger && !s.positions.empty() && s.positions.size() != c.model.steps + 1)
        errors.push_back(fmt::format("strategy.positions needs model.steps + 1 = {} entries, got {}", c.model.steps + 1,
                                     s.positions.size()));
    }
    if ((c.kind == ExperimentKind::Efficient || c.kind == ExperimentKind::Converge) && s.kind != "feedback")
      errors.push_back(fmt::format("{} requires strategy.kind 'feedback'", to_string(c.kind)));
    if (s.kind == "feedback") {
      try {
        if (s.rule == "tabulated") FeedbackRule::tabulated(s.table_prices, s.table_shares);
      } catch (const Error& e) {
        errors.push_back(e.what());
      }
    }
  }
  if (c.kind == ExperimentKind::Converge && c.model.name != "crr")
    errors.push_back("converge runs on binomial paths only; set model.name to 'crr'");
  return errors;
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    fail(ErrorCode::Validation, fmt::format("line {}: malformed document: {}", e.mark.line + 1, e.msg));
  }
  if (!root.IsMap()) fail(ErrorCode::Validation, "line 1: the configuration must be a mapping of keys to values");

  std::vector<std::string> errors;
  ExperimentConfig config;
  const YAML::Node kind_node = root["experiment"];
  if (!kind_node) {
    errors.push_back("line 1: missing required key 'experiment'");
  } else {
    try {
      ExperimentConfig probe;
      find_field("experiment")->set(probe, kind_node);
      config = default_config(probe.kind);
    } catch (const FieldError& e) {
      errors.push_back(fmt::format("line {}: experiment {}", line_of(kind_node), e.message));
    }
  }

  auto apply = [&](const std::string& key, const YAML::Node& value, int line) {
    const Field* f = find_field(key);
    if (f == nullptr) {
      errors.push_back(fmt::format("line {}: unknown key '{}'", line, key));
      return;
    }
    try {
      f->set(config, value);
      if (auto e = f->check(config)) errors.push_back(fmt::format("line {}: {}", line, *e));
    } catch (const FieldError& e) {
      errors.push_back(fmt::format("line {}: {} {}", line, key, e.message));
    }
  };

  for (const auto& entry : root) {
    const std::string key = entry.first.as<std::string>();
    const int line = line_of(entry.first);
    if (key == "experiment") continue;
    if (is_section(key)) {
      if (!entry.second.IsMap()) {
        if (!entry.second.IsNull()) errors.push_back(fmt::format("line {}: section '{}' must be a mapping", line, key));
        continue;
      }
      for (const auto& sub : entry.second) apply(key + "." + sub.first.as<std::string>(), sub.second, line_of(sub.first));
    } else {
      apply(key, entry.second, line);
    }
  }
  if (errors.empty())
    for (const auto& e : validate_config(config)) errors.push_back("config: " + e);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    fail(ErrorCode::Validation, msg);
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorCode::Validation, fmt::format("cannot read configuration file '{}'", file.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (f == nullptr) fail(ErrorCode::Validation, fmt::format("unknown key '{}'", key));
  YAML::Node node;
  try {
    node = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::Validation, fmt::format("{}: cannot parse value '{}'", key, value));
  }
  ExperimentConfig next = config;
  try {
    f->set(next, node);
  } catch (const FieldError& e) {
    fail(ErrorCode::Validation, fmt::format("{} {}", key, e.message));
  }
  if (const Check bad = f->check(next)) fail(ErrorCode::Validation, *bad);
  config = std::move(next);
}

void require_valid(const ExperimentConfig& config) {
  const auto errors = validate_config(config);
  if (errors.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& e : errors) msg += "\n  " + e;
  fail(ErrorCode::Validation, msg);
}

namespace {

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["experiment"] = to_string(c.kind);
  j["alpha"] = c.alpha;
  j["rate"] = c.rate;
  j["v0"] = c.v0;
  j["seed"] = c.seed;
  j["batch"] = c.batch;
  j["threads"] = c.threads;
  j["output"] = c.output;
  j["model"] = {{"name", c.model.name},
                {"s0", c.model.s0},
                {"mu", c.model.mu},
                {"sigma", c.model.sigma},
                {"steps", c.model.steps},
                {"horizon", c.model.horizon},
                {"jump_intensity", c.model.jump_intensity},
                {"jump_up", c.model.jump_up},
                {"jump_down", c.model.jump_down},
                {"jump_p_up", c.model.jump_p_up}};
  j["strategy"] = {{"kind", c.strategy.kind},
                   {"fixture", c.strategy.fixture},
                   {"positions", c.strategy.positions},
                   {"prices", c.strategy.prices},
                   {"rule", c.strategy.rule},
                   {"slope", c.strategy.slope},
                   {"intercept", c.strategy.intercept},
                   {"scale", c.strategy.scale},
                   {"exponent", c.strategy.exponent},
                   {"table_prices", c.strategy.table_prices},
                   {"table_shares", c.strategy.table_shares}};
  j["dividends"] = {{"step_return", c.dividends.step_return},
                    {"probability", c.dividends.probability},
                    {"max_yield", c.dividends.max_yield},
                    {"max_shares", c.dividends.max_shares}};
  j["convergence"] = {{"levels", c.convergence.levels},
                      {"base_steps", c.convergence.base_steps},
                      {"coarse_steps", c.convergence.coarse_steps},
                      {"fine_factor", c.convergence.fine_factor}};
  return j;
}

void emit_json(YAML::Emitter& out, const nlohmann::ordered_json& j) {
  if (j.is_object()) {
    out << YAML::BeginMap;
    for (auto it = j.begin(); it != j.end(); ++it) {
      out << YAML::Key << it.key() << YAML::Value;
      emit_json(out, it.value());
    }
    out << YAML::EndMap;
  } else if (j.is_array()) {
    out << YAML::Flow << YAML::BeginSeq;
    for (const auto& v : j) emit_json(out, v);
    out << YAML::EndSeq;
  } else if (j.is_string()) {
    out << j.get<std::string>();
  } else if (j.is_number_unsigned()) {
    out << j.get<std::uint64_t>();
  } else if (j.is_number()) {
    out << fmt::format("{}", j.get<double>());
  } else {
    out << j.dump();
  }
}

}  // namespace

std::string config_json(const ExperimentConfig& config) { return to_json(config).dump(2); }

std::string config_yaml(const ExperimentConfig& config) {
  YAML::Emitter out;
  emit_json(out, to_json(config));
  return std::string(out.c_str()) + "\n";
}

}  // namespace taxflow
