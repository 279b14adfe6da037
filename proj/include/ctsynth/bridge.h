#ifndef CTSYNTH_BRIDGE_H
#define CTSYNTH_BRIDGE_H

/* C ABI for foreign-function callers (training loops). Buffers are
 * caller-owned and contiguous: channels are 4*D^3 little-endian float32 in
 * channel-major, x-fastest order; targets are D^3 bytes.
 *
 * Functions returning int give 0 on success and -1 on failure; the failure
 * is then described by ctsynth_last_error_code / ctsynth_last_error_message,
 * which are per-thread. Returned strings stay valid until the next call on
 * the same handle (or, for errors, the next failing call on the thread). */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct ctsynth_shard ctsynth_shard;
typedef struct ctsynth_engine ctsynth_engine;

/* Stable code strings such as "bad-magic", "corrupt", "io"; "" when no error. */
const char* ctsynth_last_error_code(void);
const char* ctsynth_last_error_message(void);

int ctsynth_shard_open(const char* path, ctsynth_shard** out);
void ctsynth_shard_close(ctsynth_shard* shard);
uint64_t ctsynth_shard_record_count(const ctsynth_shard* shard);
int64_t ctsynth_shard_patch_size(const ctsynth_shard* shard);
const char* ctsynth_shard_header_json(const ctsynth_shard* shard);
/* channels and target may be NULL to skip them; meta_json may be NULL. */
int ctsynth_shard_read(ctsynth_shard* shard, uint64_t index, float* channels, uint8_t* target,
                       const char** meta_json);

/* Loads <id>_vol.cvol / <id>_mask.cvol pairs from volumes_dir; config_json
 * uses the sampler config schema. */
int ctsynth_engine_open(const char* volumes_dir, const char* config_json, ctsynth_engine** out);
void ctsynth_engine_close(ctsynth_engine* engine);
int64_t ctsynth_engine_patch_size(const ctsynth_engine* engine);
/* Equals record `index` of a shard written with the same sources and config. */
int ctsynth_engine_sample(ctsynth_engine* engine, uint64_t index, float* channels, uint8_t* target,
                          const char** meta_json);

/* Tversky + focal loss over n voxels; grad may be NULL. */
int ctsynth_total_loss(const double* p, const uint8_t* y, size_t n, double alpha, double beta, double gamma,
                       double eps, double* value, double* grad);

#ifdef __cplusplus
}
#endif

#endif
