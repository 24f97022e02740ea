#ifndef CHALLENGE_DP_H
#define CHALLENGE_DP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CdpStatus {
  CDP_STATUS_OK = 0,
  CDP_STATUS_NULL_POINTER = 1,
  CDP_STATUS_INVALID_PARAMETER = 2,
  CDP_STATUS_INVALID_STATE = 3,
  CDP_STATUS_PROTOCOL_VIOLATION = 4,
  CDP_STATUS_CONTRACT_VIOLATION = 5,
  CDP_STATUS_PARSE_ERROR = 6,
  CDP_STATUS_IO_ERROR = 7,
  CDP_STATUS_PANIC = 8,
} CdpStatus;

/**
 * ChallengeAT sparse-vector mechanism.
 */
typedef struct CdpChallengeAt CdpChallengeAt;

/**
 * Finite hypothesis class.
 */
typedef struct CdpClass CdpClass;

/**
 * Binary-tree private counter.
 */
typedef struct CdpCounter CdpCounter;

/**
 * Private online predictor with SOA experts.
 */
typedef struct CdpPop CdpPop;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cdp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cdp_version(void);

enum CdpStatus cdp_counter_new(size_t horizon,
                               double epsilon,
                               uint64_t seed,
                               bool noiseless,
                               struct CdpCounter **out);

/**
 * Feeds one bit and writes the released count to `estimate`.
 */
enum CdpStatus cdp_counter_feed(struct CdpCounter *counter, bool bit, uint64_t *estimate);

/**
 * Exact number of ones fed so far; 0 for a null handle.
 */
uint64_t cdp_counter_true_count(const struct CdpCounter *counter);

void cdp_counter_free(struct CdpCounter *counter);

enum CdpStatus cdp_challenge_at_new(double threshold,
                                    double epsilon,
                                    double delta,
                                    uint64_t reports,
                                    size_t horizon,
                                    uint64_t seed,
                                    bool noiseless,
                                    struct CdpChallengeAt **out);

/**
 * Answers one sensitivity-1 query value.
 */
enum CdpStatus cdp_challenge_at_step(struct CdpChallengeAt *cat,
                                     double value,
                                     bool *sigma,
                                     bool *halted);

void cdp_challenge_at_free(struct CdpChallengeAt *cat);

/**
 * Parses a class from the `n=<int> h=<int>` text format.
 */
enum CdpStatus cdp_class_parse(const char *text, struct CdpClass **out);

/**
 * Threshold functions `x >= c` over `domain` points.
 */
enum CdpStatus cdp_class_thresholds(size_t domain, struct CdpClass **out);

enum CdpStatus cdp_class_ldim(const struct CdpClass *class_, uint32_t *ldim);

/**
 * Domain size; 0 for a null handle.
 */
size_t cdp_class_domain_size(const struct CdpClass *class_);

/**
 * Number of hypotheses; 0 for a null handle.
 */
size_t cdp_class_len(const struct CdpClass *class_);

void cdp_class_free(struct CdpClass *class_);

/**
 * POP over SOA experts of `class`. With `k == 0` the number of experts and
 * positive reports are derived from the class's Littlestone dimension;
 * otherwise `k` (odd) and `reports` are used as given. The class handle may
 * be freed afterwards.
 */
enum CdpStatus cdp_pop_new(const struct CdpClass *class_,
                           size_t k,
                           uint64_t reports,
                           double epsilon,
                           double delta,
                           double beta,
                           size_t horizon,
                           uint64_t seed,
                           bool noiseless,
                           struct CdpPop **out);

/**
 * Predicts a label for `x`. When POP halts in this round `halted` is set
 * and no label must be fed.
 */
enum CdpStatus cdp_pop_predict(struct CdpPop *pop, size_t x, bool *label, bool *halted);

/**
 * Delivers the true label of the pending round. `mistake` may be NULL.
 */
enum CdpStatus cdp_pop_feed_label(struct CdpPop *pop, bool y, bool *mistake);

/**
 * Mistakes so far; 0 for a null handle.
 */
uint64_t cdp_pop_mistakes(const struct CdpPop *pop);

/**
 * Number of expert copies; 0 for a null handle.
 */
size_t cdp_pop_k(const struct CdpPop *pop);

void cdp_pop_free(struct CdpPop *pop);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHALLENGE_DP_H */
