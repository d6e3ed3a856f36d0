/* C interface to the morse gesture pipeline.
 *
 * Every function returns a morse_status. On failure the thread-local
 * morse_last_error_code() / morse_last_error_message() describe the error
 * until the next failing call on the same thread. Strings returned through
 * char** out-parameters are heap allocated; release them with
 * morse_string_free(). Handles are released with their *_free function,
 * which accepts NULL.
 */
#ifndef MORSE_MORSE_H
#define MORSE_MORSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MORSE_API __declspec(dllexport)
#else
#define MORSE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum morse_status {
  MORSE_OK = 0,
  MORSE_ERR_USAGE = 1,
  MORSE_ERR_IO = 2,
  MORSE_ERR_FORMAT = 3,
  MORSE_ERR_VALIDATION = 4,
  MORSE_ERR_DIVERGENCE = 5,
  MORSE_ERR_INTERNAL = 6
} morse_status;

#define MORSE_CHANNELS 6
#define MORSE_WINDOW_LENGTH 250
#define MORSE_WINDOW_VALUES 1500
#define MORSE_NUM_CLASSES 6

typedef struct morse_dataset morse_dataset;
typedef struct morse_model morse_model;
typedef struct morse_sim morse_sim;

MORSE_API const char* morse_version(void);
MORSE_API uint32_t morse_model_format_version(void);
MORSE_API const char* morse_last_error_code(void);
MORSE_API const char* morse_last_error_message(void);
MORSE_API void morse_string_free(char* s);

/* ---- labels --------------------------------------------------------------
 * Codes: 0 Rnd, 1 RS, 2 RE, 3 EC, 4 F, 5 DS. */
MORSE_API const char* morse_label_name(int code);
MORSE_API morse_status morse_label_parse(const char* name, int* code);

/* ---- datasets ------------------------------------------------------------ */
typedef struct morse_gen_options {
  int subjects;
  int per_class;
  int table3; /* nonzero: per-subject counts of the recorded dataset */
  double noise_std;
  uint64_t seed;
} morse_gen_options;

MORSE_API morse_gen_options morse_gen_options_default(void);
MORSE_API morse_status morse_dataset_generate(const morse_gen_options* opt, morse_dataset** out);
MORSE_API morse_status morse_dataset_load(const char* path, morse_dataset** out);
MORSE_API morse_status morse_dataset_save(const morse_dataset* ds, const char* path);
MORSE_API void morse_dataset_free(morse_dataset* ds);
MORSE_API morse_status morse_dataset_size(const morse_dataset* ds, size_t* n);
/* values receives MORSE_WINDOW_VALUES doubles, channel-major; any output
 * pointer may be NULL. hand is 'L' or 'R'. */
MORSE_API morse_status morse_dataset_sample(const morse_dataset* ds, size_t index, int* subject,
                                            char* hand, int* label, double* values);
/* Writes subject,hand,label,f00..f41. raw_kurtosis selects non-excess kurtosis. */
MORSE_API morse_status morse_features_save(const morse_dataset* ds, const char* path,
                                           int raw_kurtosis);

/* ---- training ------------------------------------------------------------ */
typedef struct morse_train_options {
  const char* model; /* cnn-lp, cnn-max, lr, knn, dt, rf */
  size_t min_epochs;
  size_t patience;
  size_t max_epochs;
  size_t batch_size;
  uint64_t seed;
  int global_max_pool; /* cnn: global max instead of average pooling */
  int val_subject;     /* train: held out for early stopping; 0 = last subject */
  size_t knn_k;
  size_t lr_epochs;
  size_t trees;
  size_t max_depth;
  size_t min_samples_leaf;
  size_t runs;    /* cross-validation runs per fold */
  size_t threads; /* cross-validation worker threads */
} morse_train_options;

MORSE_API morse_train_options morse_train_options_default(void);
/* Epoch settings of the full-length schedule (2000 minimum, patience 200). */
MORSE_API void morse_train_options_paper_epochs(morse_train_options* opt);

/* Trains on every subject except val_subject. summary_json may be NULL. */
MORSE_API morse_status morse_model_train(const morse_dataset* ds, const morse_train_options* opt,
                                         morse_model** out, char** summary_json);
/* Leave-one-subject-out report as JSON and as a text table (either may be NULL). */
MORSE_API morse_status morse_loso(const morse_dataset* ds, const morse_train_options* opt,
                                  char** report_json, char** table);

/* ---- models --------------------------------------------------------------
 * CNN models use the binary model format; baselines use JSON. */
MORSE_API morse_status morse_model_create(const char* variant, uint64_t init_seed,
                                          int global_max_pool, morse_model** out);
MORSE_API morse_status morse_model_load(const char* path, morse_model** out);
MORSE_API morse_status morse_model_save(const morse_model* m, const char* path);
MORSE_API void morse_model_free(morse_model* m);
MORSE_API const char* morse_model_kind(const morse_model* m);
/* Trainable parameters (CNN only). */
MORSE_API morse_status morse_model_param_count(const morse_model* m, size_t* n);
/* window: MORSE_WINDOW_VALUES raw values. threshold in [0,1): gestures below
 * it are reported as Random (CNN only; baselines require 0). */
MORSE_API morse_status morse_model_predict(const morse_model* m, const double* window,
                                           double threshold, int* label, double* confidence);
/* CNN only; probs receives MORSE_NUM_CLASSES values. */
MORSE_API morse_status morse_model_probabilities(const morse_model* m, const double* window,
                                                 double* probs);
MORSE_API morse_status morse_model_evaluate(const morse_model* m, const morse_dataset* ds,
                                            char** metrics_json);
/* Output of `layer` on one window at height index `row`, written as CSV. */
MORSE_API morse_status morse_model_dump_activations(const morse_model* m, const double* window,
                                                    size_t layer, size_t row, const char* path);
/* Layer list with output shapes as JSON. */
MORSE_API morse_status morse_model_describe(const morse_model* m, char** json);
/* Single-window latency on n synthetic windows. */
MORSE_API morse_status morse_bench(const morse_model* m, size_t n, uint64_t seed, char** json);

/* ---- streaming inference ------------------------------------------------- */
typedef void (*morse_prediction_cb)(void* user, double t_ms, int label, double confidence);
/* Reads a t_ms,ax,ay,az,gx,gy,gz CSV and reports one prediction per second
 * of stream, starting once 5 s of data are available. */
MORSE_API morse_status morse_infer_stream(const morse_model* m, const char* samples_csv,
                                          double threshold, morse_prediction_cb cb, void* user);

/* ---- vibration codes ----------------------------------------------------- */
MORSE_API morse_status morse_gesture_code(const char* gesture, char** code);
/* One "ON <ms>" / "OFF <ms>" line per segment. intra_gap_ms is the Off time
   between symbols of one letter; 0 selects the 200 ms default. */
MORSE_API morse_status morse_code_timeline(const char* code, int intra_gap_ms, char** timeline);
MORSE_API morse_status morse_timeline_decode(const char* timeline, int intra_gap_ms, char** code);

/* ---- mesh simulation ----------------------------------------------------- */
typedef struct morse_sim_options {
  double radio_range_m;
  double drop_probability;
  int64_t latency_ms;
  int64_t broadcast_ms;
  int64_t dedup_timeout_ms; /* negative: never re-send the last gesture */
  uint64_t seed;
} morse_sim_options;

MORSE_API morse_sim_options morse_sim_options_default(void);
MORSE_API morse_status morse_sim_create(const morse_sim_options* opt, morse_sim** out);
MORSE_API void morse_sim_free(morse_sim* sim);
/* Script lines: "<t_ms> <node> <action> [args]". May be called repeatedly. */
MORSE_API morse_status morse_sim_load_script(morse_sim* sim, const char* text);
MORSE_API morse_status morse_sim_schedule_gesture(morse_sim* sim, const char* node, int64_t t_ms,
                                                  int label, double confidence);
MORSE_API morse_status morse_sim_run(morse_sim* sim);
MORSE_API morse_status morse_sim_log(const morse_sim* sim, char** text);
MORSE_API morse_status morse_sim_watch(const morse_sim* sim, const char* node, char** text);

#ifdef __cplusplus
}
#endif

#endif /* MORSE_MORSE_H */
