/* C interface to the migration engine.
 *
 * Every call that can fail returns a migra_status. On anything other than
 * MIGRA_OK (and MIGRA_FAILED, which still produces a report) the calling
 * thread's last error is set; read it with migra_last_error() and
 * migra_last_error_code().
 *
 * Reports come back as JSON strings owned by the caller; release them with
 * migra_string_free().
 */
#ifndef MIGRA_MIGRA_H
#define MIGRA_MIGRA_H

#if defined(MIGRA_BUILDING_LIBRARY)
#define MIGRA_API __attribute__((visibility("default")))
#else
#define MIGRA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct migra_engine migra_engine;

typedef enum migra_status {
  MIGRA_OK = 0,
  MIGRA_FAILED = 1,  /* command ran; the migration did not complete */
  MIGRA_EUSAGE = 2,  /* bad configuration, arguments or missing precondition */
  MIGRA_EERROR = 3   /* runtime failure (provider, workspace, I/O) */
} migra_status;

MIGRA_API const char* migra_version(void);

/* Message and symbolic code ("PlanMissing", ...) of the last failure on this
 * thread; "" when none. Valid until the next call on the same thread. */
MIGRA_API const char* migra_last_error(void);
MIGRA_API const char* migra_last_error_code(void);

/* overrides_json may be NULL or a JSON object merge-patched over the config
 * file, e.g. {"preset": "multi_agent", "provider": {"script_path": "/x.json"}}. */
MIGRA_API migra_status migra_engine_open(const char* config_path, const char* overrides_json, migra_engine** out);
MIGRA_API void migra_engine_close(migra_engine* engine);

/* Clears a stale bank lock held by a live process (subject to the configured
 * age). */
MIGRA_API void migra_engine_set_force_unlock(migra_engine* engine, int force);

/* options_json may be NULL or {"root": path, "overwrite": bool}. */
MIGRA_API migra_status migra_plan(migra_engine* engine, const char* options_json, char** out_json);

/* options_json may be NULL or {"force": bool, "stop_after_chunks": n}. */
MIGRA_API migra_status migra_run(migra_engine* engine, const char* options_json, char** out_json);
MIGRA_API migra_status migra_resume(migra_engine* engine, const char* options_json, char** out_json);

/* {"checklist": path, "targets": [prefix...], "runs": n, "out": path,
 *  "model": label, "append": bool} */
MIGRA_API migra_status migra_judge(migra_engine* engine, const char* request_json, char** out_json);

/* {"golden": [[legacy_dir, migrated_dir], ...], "out": path, "review": bool,
 *  "name": text} */
MIGRA_API migra_status migra_playbook_generate(migra_engine* engine, const char* request_json, char** out_json);

/* out_path may be NULL (dot text only returned). */
MIGRA_API migra_status migra_viz(migra_engine* engine, const char* out_path, char** out_json);

/* {"a": path, "b": path, "a_config": name, "b_config": name} */
MIGRA_API migra_status migra_eval_compare(const char* request_json, char** out_json);

MIGRA_API void migra_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* MIGRA_MIGRA_H */
