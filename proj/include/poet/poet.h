/* C interface to the poet engine: corpus ingestion, embedding and model
 * training, keyword extraction, quatrain generation and evaluation.
 *
 * All functions return POET_OK (0) on success or a nonzero status code; the
 * per-thread message behind the most recent failure is available through
 * poet_last_error(). Strings returned through char** out-parameters are
 * heap-allocated and must be released with poet_string_free(). Handles are
 * opaque; every *_open has a matching *_close. A handle may be shared across
 * threads only for read-only calls.
 */
#ifndef POET_H
#define POET_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum poet_status {
  POET_OK = 0,
  POET_ERR_INVALID_ARGUMENT = 1,
  POET_ERR_IO = 2,
  POET_ERR_RUNTIME = 3
};

const char* poet_last_error(void);
void poet_string_free(char* s);

/* ---- corpus ingestion ---------------------------------------------------- */

typedef struct poet_ingest_options {
  uint32_t vocab_size; /* 0 -> 6000 */
  uint32_t valid_n;
  uint32_t test_n;
  uint64_t seed;
  const char* lexicon_path; /* NULL -> single-character lexicon */
} poet_ingest_options;

/* Parses a corpus file, keeps the quatrains, writes vocabulary/splits/lexicon/
 * keyword-graph artifacts into out_dir. stats_json (optional) receives a JSON
 * summary. */
int poet_ingest(const char* corpus_path, const char* out_dir, const poet_ingest_options* options,
                char** stats_json);

/* ---- embeddings ----------------------------------------------------------- */

typedef struct poet_embeddings poet_embeddings;

typedef struct poet_aw2v_options {
  int32_t dim;       /* 0 -> 128 */
  int32_t window;    /* 0 -> 3 */
  int32_t negatives; /* 0 -> 5 */
  int32_t epochs;    /* 0 -> 15 */
  double step_size;  /* 0 -> 0.025 */
  double subsample;  /* < 0 -> 1e-4, 0 disables */
  uint64_t seed;
  int32_t slices; /* 0 none, 1 all columns (default), 2 third/fourth lines only */
} poet_aw2v_options;

/* Trains character embeddings on the ingested training split (lines plus
 * vertical slices) and writes them to out_path. */
int poet_train_aw2v(const char* artifacts_dir, const char* out_path,
                    const poet_aw2v_options* options);

int poet_embeddings_open(const char* emb_path, const char* vocab_path, poet_embeddings** out);
void poet_embeddings_close(poet_embeddings* handle);

/* JSON array of {word, similarity}, k nearest neighbours of word. */
int poet_similar(const poet_embeddings* handle, const char* word, uint32_t k, char** out_json);

/* ---- writing intent -------------------------------------------------------- */

typedef struct poet_intent poet_intent;

int poet_intent_open(const char* artifacts_dir, poet_intent** out);
void poet_intent_close(poet_intent* handle);

/* JSON array of exactly four keywords for the query. */
int poet_keywords(const poet_intent* handle, const poet_embeddings* embeddings, const char* query,
                  char** out_json);

/* ---- model training --------------------------------------------------------- */

/* config_path: key=value file (NULL -> defaults); decoder: "hybrid",
 * "rnn-only" or NULL to keep the config's choice. summary_json (optional)
 * receives training history. */
int poet_train_cvae(const char* artifacts_dir, const char* emb_path, const char* config_path,
                    const char* out_path, const char* decoder, char** summary_json);

/* ---- generation -------------------------------------------------------------- */

typedef struct poet_model poet_model;

/* data_dir (tone/rhyme/template files) may be NULL: rhythm scoring then runs
 * with the built-in templates and empty dictionaries. */
int poet_model_open(const char* checkpoint_path, const char* artifacts_dir, const char* emb_path,
                    const char* data_dir, poet_model** out);
void poet_model_close(poet_model* handle);

typedef struct poet_generate_options {
  int32_t form;        /* 5 or 7; 0 -> 5 */
  double temperature;  /* 0 = greedy */
  int32_t top_k;       /* 0 = disabled */
  int32_t candidates_per_line; /* 0 -> 1 */
  uint64_t seed;
  int32_t rse_filter; /* nonzero: keep the best-scoring candidate per line */
} poet_generate_options;

/* out_json: {query, keywords[4], lines[4], rse[4], seed} */
int poet_generate(poet_model* handle, const char* query, const poet_generate_options* options,
                  char** out_json);

/* metric: "ppl" | "bleu" | "rse" | "all"; split: "train" | "valid" | "test".
 * poem_limit 0 evaluates the whole split. */
int poet_eval(poet_model* handle, const char* metric, const char* split, uint32_t poem_limit,
              uint64_t seed, char** out_json);

/* ---- diagnostics ----------------------------------------------------------------- */

/* Finite-difference gradient checks for every layer and the full loss.
 * Returns POET_OK when all pass; out_json lists per-layer results. */
int poet_gradcheck(int32_t seeds_per_layer, uint64_t seed, char** out_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* POET_H */
