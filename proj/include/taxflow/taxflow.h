#ifndef TAXFLOW_TAXFLOW_H
#define TAXFLOW_TAXFLOW_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TAXFLOW_API __declspec(dllexport)
#else
#define TAXFLOW_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every function returning taxflow_status stores a message for
   the calling thread, readable through taxflow_last_error(). */
typedef enum {
  TAXFLOW_OK = 0,
  TAXFLOW_INVALID_ARGUMENT = 1,
  TAXFLOW_VALIDATION = 2,
  TAXFLOW_PROPERTY_VIOLATION = 3,
  TAXFLOW_BUDGET_EXCEEDED = 4,
  TAXFLOW_RUNTIME = 5
} taxflow_status;

typedef enum { TAXFLOW_SIDE_LEFT = 0, TAXFLOW_SIDE_AT = 1, TAXFLOW_SIDE_RIGHT = 2 } taxflow_side;

typedef struct taxflow_market taxflow_market;     /* prices + cumulative dividends on a grid */
typedef struct taxflow_strategy taxflow_strategy; /* elementary share-count process */
typedef struct taxflow_flow taxflow_flow;         /* tax payments with left/at/right values */
typedef struct taxflow_config taxflow_config;     /* experiment configuration */
typedef struct taxflow_report taxflow_report;     /* result of an experiment run */

TAXFLOW_API const char* taxflow_version(void);
/* Message of the last failing call on this thread ("" if none). */
TAXFLOW_API const char* taxflow_last_error(void);

/* Markets. `dividends` may be NULL (no dividends). Arrays have `count` entries. */
TAXFLOW_API taxflow_status taxflow_market_create(const double* times, const double* prices, const double* dividends,
                                                 size_t count, taxflow_market** out);
TAXFLOW_API taxflow_status taxflow_market_crr(double s0, double sigma, size_t steps, double horizon, uint64_t seed,
                                              taxflow_market** out);
TAXFLOW_API taxflow_status taxflow_market_fixture(const char* name, taxflow_market** market,
                                                  taxflow_strategy** strategy);
TAXFLOW_API size_t taxflow_market_size(const taxflow_market* m);
TAXFLOW_API taxflow_status taxflow_market_prices(const taxflow_market* m, double* out, size_t count);
TAXFLOW_API void taxflow_market_free(taxflow_market* m);

/* after[k] = shares held right after trading at grid point k (count = market size). */
TAXFLOW_API taxflow_status taxflow_strategy_from_after_trade(const taxflow_market* m, const double* after, size_t count,
                                                             taxflow_strategy** out);
/* Positions g(S_k) for the rule slope * s + intercept. */
TAXFLOW_API taxflow_status taxflow_strategy_linear_feedback(const taxflow_market* m, double slope, double intercept,
                                                            taxflow_strategy** out);
TAXFLOW_API void taxflow_strategy_free(taxflow_strategy* s);

TAXFLOW_API taxflow_status taxflow_tax_flow(const taxflow_market* m, const taxflow_strategy* s, double alpha,
                                            taxflow_flow** out);
TAXFLOW_API size_t taxflow_flow_size(const taxflow_flow* f);
TAXFLOW_API taxflow_status taxflow_flow_values(const taxflow_flow* f, taxflow_side side, double* out, size_t count);
/* Sup over grid points and sides of |a - b|. */
TAXFLOW_API taxflow_status taxflow_flow_distance(const taxflow_flow* a, const taxflow_flow* b, double* out);
TAXFLOW_API void taxflow_flow_free(taxflow_flow* f);

/* Discrete engine: accumulated tax of the wash-sale lot choice and the
   exhaustive lattice minimum, for positions after[0..count-1] on prices[0..count-1]. */
TAXFLOW_API taxflow_status taxflow_discrete_tax(const double* prices, const double* after, size_t count, double alpha,
                                                double* out);
TAXFLOW_API taxflow_status taxflow_discrete_min_tax(const double* prices, const double* after, size_t count,
                                                    double alpha, double quantum, double* out);

/* Configuration. Parsing errors list every problem with its line number. */
TAXFLOW_API taxflow_status taxflow_config_parse(const char* text, taxflow_config** out);
TAXFLOW_API taxflow_status taxflow_config_load(const char* path, taxflow_config** out);
TAXFLOW_API taxflow_status taxflow_config_default(const char* experiment, taxflow_config** out);
/* Dotted key, value in YAML scalar or flow-list syntax, e.g. ("model.sigma", "0.3"). */
TAXFLOW_API taxflow_status taxflow_config_set(taxflow_config* c, const char* key, const char* value);
/* Cross-field checks; taxflow_config_set only checks the key it sets. */
TAXFLOW_API taxflow_status taxflow_config_validate(const taxflow_config* c);
/* Experiment name; valid until the config is modified or freed. */
TAXFLOW_API const char* taxflow_config_experiment(const taxflow_config* c);
TAXFLOW_API const char* taxflow_config_output(const taxflow_config* c);
/* Effective configuration as YAML; valid until the config is modified or freed. */
TAXFLOW_API const char* taxflow_config_yaml(taxflow_config* c);
TAXFLOW_API void taxflow_config_free(taxflow_config* c);

/* Runs the experiment, writing reports into out_dir. A finished run with a
   failed property returns TAXFLOW_PROPERTY_VIOLATION and still yields a report. */
TAXFLOW_API taxflow_status taxflow_run(const taxflow_config* c, const char* out_dir, taxflow_report** out);
TAXFLOW_API const char* taxflow_report_summary(const taxflow_report* r);
TAXFLOW_API size_t taxflow_report_file_count(const taxflow_report* r);
TAXFLOW_API const char* taxflow_report_file_name(const taxflow_report* r, size_t i);
TAXFLOW_API void taxflow_report_free(taxflow_report* r);

#ifdef __cplusplus
}
#endif

#endif
