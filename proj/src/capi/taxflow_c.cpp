#include "taxflow/taxflow.h"

#include <exception>
#include <memory>
#include <new>
#include <string>

#include "taxflow/cli_io.hpp"
#include "taxflow/efficient_strategies.hpp"
#include "taxflow/error.hpp"
#include "taxflow/fixtures.hpp"
#include "taxflow/lot_ledger.hpp"
#include "taxflow/tax_flow.hpp"

struct taxflow_market {
  taxflow::PricePath prices;
  taxflow::DividendPath dividends;
};

struct taxflow_strategy {
  taxflow::ElementaryStrategy phi;
};

struct taxflow_flow {
  taxflow::TaxFlow flow;
};

struct taxflow_config {
  taxflow::ExperimentConfig config;
  std::string experiment, output, yaml;
};

struct taxflow_report {
  taxflow::RunReport report;
};

namespace {

thread_local std::string last_error;

taxflow_status status_of(taxflow::ErrorCode code) {
  switch (code) {
    case taxflow::ErrorCode::InvalidArgument: return TAXFLOW_INVALID_ARGUMENT;
    case taxflow::ErrorCode::Validation: return TAXFLOW_VALIDATION;
    case taxflow::ErrorCode::PropertyViolation: return TAXFLOW_PROPERTY_VIOLATION;
    case taxflow::ErrorCode::BudgetExceeded: return TAXFLOW_BUDGET_EXCEEDED;
    case taxflow::ErrorCode::Runtime: return TAXFLOW_RUNTIME;
  }
  return TAXFLOW_RUNTIME;
}

template <class Fn>
taxflow_status guarded(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return TAXFLOW_OK;
  } catch (const taxflow::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return TAXFLOW_RUNTIME;
  } catch (const std::exception& e) {
    last_error = e.what();
    return TAXFLOW_RUNTIME;
  } catch (...) {
    last_error = "unknown failure";
    return TAXFLOW_RUNTIME;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) taxflow::fail(taxflow::ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

void refresh(taxflow_config* c) {
  c->experiment = taxflow::to_string(c->config.kind);
  c->output = c->config.output;
}

}  // namespace

extern "C" {

const char* taxflow_version(void) { return taxflow::library_version(); }
const char* taxflow_last_error(void) { return last_error.c_str(); }

taxflow_status taxflow_market_create(const double* times, const double* prices, const double* dividends, size_t count,
                                     taxflow_market** out) {
  return guarded([&] {
    need(times, "times");
    need(prices, "prices");
    need(out, "out");
    taxflow::TimeGrid g(std::vector<double>(times, times + count));
    taxflow::PricePath s(g, std::vector<double>(prices, prices + count));
    taxflow::DividendPath d = dividends ? taxflow::DividendPath(g, std::vector<double>(dividends, dividends + count))
                                        : taxflow::DividendPath::zero(g);
    *out = new taxflow_market{std::move(s), std::move(d)};
  });
}

taxflow_status taxflow_market_crr(double s0, double sigma, size_t steps, double horizon, uint64_t seed,
                                  taxflow_market** out) {
  return guarded([&] {
    need(out, "out");
    auto s = taxflow::gen_crr(s0, sigma, steps, horizon, seed);
    auto d = taxflow::DividendPath::zero(s.grid);
    *out = new taxflow_market{std::move(s), std::move(d)};
  });
}

taxflow_status taxflow_market_fixture(const char* name, taxflow_market** market, taxflow_strategy** strategy) {
  return guarded([&] {
    need(name, "name");
    need(market, "market");
    auto fx = taxflow::fixture_by_name(name);
    auto m = std::make_unique<taxflow_market>(taxflow_market{fx.prices, fx.dividends});
    if (strategy) *strategy = new taxflow_strategy{fx.strategy};
    *market = m.release();
  });
}

size_t taxflow_market_size(const taxflow_market* m) { return m ? m->prices.size() : 0; }

taxflow_status taxflow_market_prices(const taxflow_market* m, double* out, size_t count) {
  return guarded([&] {
    need(m, "market");
    need(out, "out");
    if (count < m->prices.size()) taxflow::fail(taxflow::ErrorCode::InvalidArgument, "output buffer too small");
    for (std::size_t k = 0; k < m->prices.size(); ++k) out[k] = m->prices[k];
  });
}

void taxflow_market_free(taxflow_market* m) { delete m; }

taxflow_status taxflow_strategy_from_after_trade(const taxflow_market* m, const double* after, size_t count,
                                                 taxflow_strategy** out) {
  return guarded([&] {
    need(m, "market");
    need(after, "after");
    need(out, "out");
    if (count != m->prices.size())
      taxflow::fail(taxflow::ErrorCode::InvalidArgument, "strategy length must equal the market size");
    *out = new taxflow_strategy{
        taxflow::ElementaryStrategy::from_after_trade(m->prices.grid, std::vector<double>(after, after + count))};
  });
}

taxflow_status taxflow_strategy_linear_feedback(const taxflow_market* m, double slope, double intercept,
                                                taxflow_strategy** out) {
  return guarded([&] {
    need(m, "market");
    need(out, "out");
    *out = new taxflow_strategy{taxflow::feedback_strategy(taxflow::FeedbackRule::linear(slope, intercept), m->prices)};
  });
}

void taxflow_strategy_free(taxflow_strategy* s) { delete s; }

taxflow_status taxflow_tax_flow(const taxflow_market* m, const taxflow_strategy* s, double alpha, taxflow_flow** out) {
  return guarded([&] {
    need(m, "market");
    need(s, "strategy");
    need(out, "out");
    if (!(alpha > 0.0 && alpha < 1.0)) taxflow::fail(taxflow::ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    *out = new taxflow_flow{taxflow::tax_process_elementary(s->phi, m->prices, m->dividends, alpha)};
  });
}

size_t taxflow_flow_size(const taxflow_flow* f) { return f ? f->flow.size() : 0; }

taxflow_status taxflow_flow_values(const taxflow_flow* f, taxflow_side side, double* out, size_t count) {
  return guarded([&] {
    need(f, "flow");
    need(out, "out");
    if (count < f->flow.size()) taxflow::fail(taxflow::ErrorCode::InvalidArgument, "output buffer too small");
    const auto& v = side == TAXFLOW_SIDE_LEFT ? f->flow.left : side == TAXFLOW_SIDE_AT ? f->flow.at : f->flow.right;
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k];
  });
}

taxflow_status taxflow_flow_distance(const taxflow_flow* a, const taxflow_flow* b, double* out) {
  return guarded([&] {
    need(a, "a");
    need(b, "b");
    need(out, "out");
    *out = taxflow::up_distance(a->flow, b->flow);
  });
}

void taxflow_flow_free(taxflow_flow* f) { delete f; }

taxflow_status taxflow_discrete_tax(const double* prices, const double* after, size_t count, double alpha,
                                    double* out) {
  return guarded([&] {
    need(prices, "prices");
    need(after, "after");
    need(out, "out");
    if (count < 1) taxflow::fail(taxflow::ErrorCode::InvalidArgument, "need at least one date");
    const taxflow::PricePath s(taxflow::TimeGrid::integer(count - 1), std::vector<double>(prices, prices + count));
    const taxflow::DiscreteStrategy phi(std::vector<double>(after, after + count));
    const auto pi = taxflow::tax_payments(taxflow::wash_optimal_strategy(phi, s), s, alpha);
    for (std::size_t t = 0; t < count; ++t) out[t] = pi[t];
  });
}

taxflow_status taxflow_discrete_min_tax(const double* prices, const double* after, size_t count, double alpha,
                                        double quantum, double* out) {
  return guarded([&] {
    need(prices, "prices");
    need(after, "after");
    need(out, "out");
    if (count < 1) taxflow::fail(taxflow::ErrorCode::InvalidArgument, "need at least one date");
    const taxflow::PricePath s(taxflow::TimeGrid::integer(count - 1), std::vector<double>(prices, prices + count));
    const taxflow::DiscreteStrategy phi(std::vector<double>(after, after + count));
    const auto best = taxflow::brute_force_min_tax_all(phi, s, alpha, quantum);
    for (std::size_t t = 0; t < count; ++t) out[t] = best[t];
  });
}

taxflow_status taxflow_config_parse(const char* text, taxflow_config** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    auto c = std::make_unique<taxflow_config>();
    c->config = taxflow::parse_config(text);
    refresh(c.get());
    *out = c.release();
  });
}

taxflow_status taxflow_config_load(const char* path, taxflow_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto c = std::make_unique<taxflow_config>();
    c->config = taxflow::load_config(path);
    refresh(c.get());
    *out = c.release();
  });
}

taxflow_status taxflow_config_default(const char* experiment, taxflow_config** out) {
  return guarded([&] {
    need(experiment, "experiment");
    need(out, "out");
    const auto kind = taxflow::parse_experiment_kind(experiment);
    if (!kind) taxflow::fail(taxflow::ErrorCode::Validation, std::string("unknown experiment '") + experiment + "'");
    auto c = std::make_unique<taxflow_config>();
    c->config = taxflow::default_config(*kind);
    refresh(c.get());
    *out = c.release();
  });
}

taxflow_status taxflow_config_set(taxflow_config* c, const char* key, const char* value) {
  return guarded([&] {
    need(c, "config");
    need(key, "key");
    need(value, "value");
    taxflow::apply_override(c->config, key, value);
    refresh(c);
  });
}

taxflow_status taxflow_config_validate(const taxflow_config* c) {
  return guarded([&] {
    need(c, "config");
    taxflow::require_valid(c->config);
  });
}

const char* taxflow_config_experiment(const taxflow_config* c) { return c ? c->experiment.c_str() : ""; }
const char* taxflow_config_output(const taxflow_config* c) { return c ? c->output.c_str() : ""; }

const char* taxflow_config_yaml(taxflow_config* c) {
  if (!c) return "";
  c->yaml = taxflow::config_yaml(c->config);
  return c->yaml.c_str();
}

void taxflow_config_free(taxflow_config* c) { delete c; }

taxflow_status taxflow_run(const taxflow_config* c, const char* out_dir, taxflow_report** out) {
  taxflow_status st = guarded([&] {
    need(c, "config");
    need(out_dir, "out_dir");
    need(out, "out");
    *out = new taxflow_report{taxflow::run_experiment(c->config, out_dir)};
  });
  if (st == TAXFLOW_OK && (*out)->report.exit_code != 0) {
    last_error = "a checked property was violated; see the summary";
    return TAXFLOW_PROPERTY_VIOLATION;
  }
  return st;
}

const char* taxflow_report_summary(const taxflow_report* r) { return r ? r->report.summary_json.c_str() : ""; }
size_t taxflow_report_file_count(const taxflow_report* r) { return r ? r->report.files.size() : 0; }
const char* taxflow_report_file_name(const taxflow_report* r, size_t i) {
  return r && i < r->report.files.size() ? r->report.files[i].name.c_str() : "";
}
void taxflow_report_free(taxflow_report* r) { delete r; }

}  // extern "C"
