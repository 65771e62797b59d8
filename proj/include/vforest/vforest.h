#ifndef VFOREST_H
#define VFOREST_H

/*
 * C interface to the video forest engine.
 *
 * Every function returns a vf_status.  On failure vf_last_error() holds a
 * message for the calling thread until its next call into the library.
 * Strings returned through char** out-parameters are owned by the caller
 * and released with vf_string_free().  Structured results are JSON.
 */

#include <stdint.h>

#if defined(VF_BUILDING_LIBRARY)
#define VF_API __attribute__((visibility("default")))
#else
#define VF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vf_status {
    VF_OK = 0,
    VF_ERR_INVALID_ARGUMENT = 1,
    VF_ERR_VALIDATION = 2,
    VF_ERR_PARSE = 3,
    VF_ERR_PROVIDER = 4,
    VF_ERR_IO = 5,
    VF_ERR_FORMAT = 6,
    VF_ERR_VERSION_MISMATCH = 7,
    VF_ERR_CHECKSUM = 8,
    VF_ERR_INTERNAL = 9
} vf_status;

typedef struct vf_engine vf_engine;

VF_API const char* vf_version(void);
VF_API const char* vf_last_error(void);
VF_API const char* vf_status_name(vf_status status);
VF_API void vf_string_free(char* s);

/* overrides_json: object of "section.key" -> string or scalar value, or NULL.
 * config_path: NULL falls back to the ENGINE_CONFIG environment variable. */
VF_API vf_status vf_config_resolve(const char* config_path, const char* overrides_json, char** out_json);

VF_API vf_status vf_engine_create(const char* config_path, const char* overrides_json, vf_engine** out);
VF_API void vf_engine_destroy(vf_engine* engine);

VF_API vf_status vf_engine_add_stream_file(vf_engine* engine, const char* path);
VF_API vf_status vf_engine_add_stream_text(vf_engine* engine, const char* text);
/* out_stats_json may be NULL. */
VF_API vf_status vf_engine_build(vf_engine* engine, char** out_stats_json);
/* Runs the structural validator over every tree; out_json lists violations. */
VF_API vf_status vf_engine_validate(vf_engine* engine, char** out_json);

VF_API vf_status vf_engine_save_forest(vf_engine* engine, const char* path);
VF_API vf_status vf_engine_load_forest(vf_engine* engine, const char* path);
/* missing_ok: a missing file leaves an empty knowledge base. */
VF_API vf_status vf_engine_load_kb(vf_engine* engine, const char* path, int missing_ok);
VF_API vf_status vf_engine_save_kb(vf_engine* engine, const char* path);

/* raw_query: structured query document or natural-language text. */
VF_API vf_status vf_engine_query(vf_engine* engine, const char* raw_query, int include_trace, char** out_json);

/* identities_json: array of identity tokens or NULL; video_id may be NULL.
 * Uses the engine's [search] options. */
VF_API vf_status vf_engine_search(vf_engine* engine, const char* text, const char* identities_json,
                                  const char* video_id, char** out_json);

VF_API vf_status vf_engine_kb_upsert(vf_engine* engine, const char* date, const char* location,
                                     const char* description, char** out_outcome);
VF_API vf_status vf_engine_kb_show(vf_engine* engine, char** out_json);

/* queries_json: {"queries": [...]} as written by vf_synth. */
VF_API vf_status vf_engine_eval(vf_engine* engine, const char* queries_json, int ablations, char** out_json,
                                char** out_text);

/* Parses and validates one feature-stream file; out_json summarizes it. */
VF_API vf_status vf_ingest_file(const char* path, char** out_json);

/* spec_json NULL uses the built-in scenario for `seed`. */
VF_API vf_status vf_synth(const char* spec_json, uint64_t seed, const char* out_dir, char** out_json);

#ifdef __cplusplus
}
#endif

#endif
