/* C API for the ksforge contextuality toolkit.
 *
 * Mirrors crates/ffi/src/lib.rs. Strings returned through `char **` are
 * owned by the caller and released with ksf_string_free(); scenario
 * handles with ksf_scenario_free().
 */

#ifndef KSFORGE_H
#define KSFORGE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum KsfStatus {
  KSF_STATUS_OK = 0,
  KSF_STATUS_NULL_POINTER = 1,
  KSF_STATUS_INVALID_UTF8 = 2,
  KSF_STATUS_PARSE_ERROR = 3,
  KSF_STATUS_INVALID_INPUT = 4,
  KSF_STATUS_UNCOLOURABLE = 5,
  KSF_STATUS_VERIFICATION_FAILED = 6,
  KSF_STATUS_INTERNAL_ERROR = 7,
} KsfStatus;

/* Opaque: a hypergraph plus its optional ray assignment. */
typedef struct KsfScenario KsfScenario;

typedef struct KsfSimResult {
  double estimate;
  double std_error;
  double born_value;
  double z_score;
} KsfSimResult;

/* Static version string; do not free. */
const char *ksf_version(void);

void ksf_string_free(char *s);

/* Scenario JSON:
 * {"dim": d, "vertices": [{"id": s, "ray": {"dim": d,
 *  "amplitudes": [[re, im], ...]}}, ...], "hyperedges": [[id, ...], ...]}
 */
KsfStatus ksf_scenario_from_json(const char *json, KsfScenario **out);
void ksf_scenario_free(KsfScenario *s);
KsfStatus ksf_scenario_vertex_count(const KsfScenario *s, size_t *out);
KsfStatus ksf_scenario_hyperedge_count(const KsfScenario *s, size_t *out);
KsfStatus ksf_scenario_to_json(const KsfScenario *s, char **out_json);

/* Complete KS-colouring search. KSF_STATUS_OK with the colouring JSON
 * {"values": {id: 0|1}}, or KSF_STATUS_UNCOLOURABLE with *out_json NULL. */
KsfStatus ksf_scenario_find_colouring(const KsfScenario *s, char **out_json);

/* Built-in families: "peres_mermin", "peres57", "two_qubit_ks",
 * "nonlocal_basis", "unentangled_2x3". */
KsfStatus ksf_catalog_names(char **out_json);
KsfStatus ksf_catalog_build(const char *name, KsfScenario **out);
KsfStatus ksf_catalog_verify(const char *name, char **out_json);

/* Seeded Monte Carlo run of the hidden-variable model for product rays
 * given as JSON ({"factors": [...]} or a flat ray of dimension 2^n). */
KsfStatus ksf_simulate_product(const char *psi_json, const char *chi_json,
                               uint64_t samples, uint64_t seed,
                               KsfSimResult *out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* KSFORGE_H */
