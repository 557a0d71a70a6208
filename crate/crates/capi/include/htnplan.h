#ifndef HTNPLAN_H
#define HTNPLAN_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum {
  HTN_OK = 0,
  HTN_ERR_ARGUMENT = 1,
  HTN_ERR_PARSE = 2,
  HTN_ERR_GROUND = 3,
  HTN_UNSOLVABLE = 4,
  HTN_TIMEOUT = 5,
  HTN_INVALID_PLAN = 6,
} htn_status;

/**
 * Instantiated problem handle (opaque).
 */
typedef struct htn_ground_problem htn_ground_problem;

/**
 * Solved plan handle (opaque).
 */
typedef struct htn_plan htn_plan;

/**
 * Parsed problem handle (opaque).
 */
typedef struct htn_problem htn_problem;

/**
 * Returns the message of the most recent error on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *htn_last_error(void);

/**
 * Parses a domain and a problem. On success stores a new handle in `out`;
 * the caller owns it and must release it with `htn_problem_free`.
 *
 * # Safety
 * `domain_text` and `problem_text` must be NUL-terminated UTF-8; `out` must
 * be a valid pointer.
 */
htn_status htn_problem_parse(const char *domain_text, const char *problem_text, htn_problem **out);

/**
 * # Safety
 * `problem` must come from `htn_problem_parse` and not be freed twice.
 */
void htn_problem_free(htn_problem *problem);

/**
 * Instantiates and simplifies the problem. Pass `simplify` and
 * `method_fixpoint` as 0/1.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be a valid pointer.
 */
htn_status htn_ground(const htn_problem *problem,
                      int32_t simplify,
                      int32_t method_fixpoint,
                      htn_ground_problem **out);

/**
 * # Safety
 * `gp` must come from `htn_ground` and not be freed twice.
 */
void htn_ground_free(htn_ground_problem *gp);

/**
 * Number of surviving ground actions.
 *
 * # Safety
 * `gp` must be a live handle.
 */
uintptr_t htn_ground_action_count(const htn_ground_problem *gp);

/**
 * Number of surviving ground methods.
 *
 * # Safety
 * `gp` must be a live handle.
 */
uintptr_t htn_ground_method_count(const htn_ground_problem *gp);

/**
 * Runs the instantiated planner with a timeout in seconds (0 = immediate
 * timeout). On HTN_OK the caller owns the plan handle.
 *
 * # Safety
 * `gp` must be a live handle; `out` must be a valid pointer.
 */
htn_status htn_solve(const htn_ground_problem *gp, uint64_t timeout_secs, htn_plan **out);

/**
 * # Safety
 * `plan` must come from `htn_solve` and not be freed twice.
 */
void htn_plan_free(htn_plan *plan);

/**
 * # Safety
 * `plan` must be a live handle.
 */
uintptr_t htn_plan_length(const htn_plan *plan);

/**
 * Textual form `(name arg1 … argk)` of one plan step, or NULL when the
 * index is out of range. The pointer stays valid until the plan is freed.
 *
 * # Safety
 * `plan` must be a live handle.
 */
const char *htn_plan_step(const htn_plan *plan, uintptr_t index);

/**
 * Re-checks a plan against the ground problem it was solved from.
 *
 * # Safety
 * Both handles must be live.
 */
htn_status htn_validate(const htn_ground_problem *gp, const htn_plan *plan);

#endif /* HTNPLAN_H */
