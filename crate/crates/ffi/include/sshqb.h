#ifndef SSHQB_H
#define SSHQB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SshqbStatus {
  SSHQB_STATUS_OK = 0,
  SSHQB_STATUS_NULL_POINTER = 1,
  SSHQB_STATUS_INVALID_PARAMETER = 2,
  SSHQB_STATUS_NO_PEAK_FOUND = 3,
  SSHQB_STATUS_BUFFER_TOO_SMALL = 4,
  SSHQB_STATUS_NUMERICAL = 5,
  SSHQB_STATUS_PANIC = 6,
} SshqbStatus;

typedef enum SshqbMode {
  SSHQB_MODE_SECTOR = 0,
  SSHQB_MODE_FULL = 1,
} SshqbMode;

typedef enum SshqbBondRule {
  SSHQB_BOND_RULE_CORRECTED = 0,
  SSHQB_BOND_RULE_AS_PRINTED = 1,
} SshqbBondRule;

typedef enum SshqbCavityCutoff {
  SSHQB_CAVITY_CUTOFF_EXACT = 0,
  SSHQB_CAVITY_CUTOFF_FOCK = 1,
} SshqbCavityCutoff;

// Opaque simulation handle.
typedef struct SshqbBattery SshqbBattery;

// Model parameters. Enum-valued fields are plain integers holding the
// values of `SshqbMode`, `SshqbBondRule` and `SshqbCavityCutoff`.
typedef struct SshqbParams {
  uint32_t n;
  double omega_a;
  double omega_c;
  double g;
  double j;
  double delta;
  uint32_t n_c;
  uint32_t mode;
  uint32_t bond_rule;
  uint32_t cavity_cutoff;
} SshqbParams;

// Search settings for [`sshqb_battery_charge`]; `t_max <= 0` selects the
// automatic window.
typedef struct SshqbChargingOptions {
  double dt;
  double safety;
  double t_max;
  double refine_tol;
} SshqbChargingOptions;

typedef struct SshqbGround {
  double e_ground;
  double e_max;
  uint32_t k_g;
  bool degenerate;
} SshqbGround;

typedef struct SshqbSample {
  double t;
  double e_b;
  double d_e;
  double ergotropy;
  double norm_error;
  double n_exc;
  double total_energy;
} SshqbSample;

typedef struct SshqbChargingResult {
  double tau_c;
  double d_e_max;
  double ergotropy;
  // Capacity from the charged energy.
  double r_eb;
  // Capacity from the ergotropy.
  double r_epb;
  // Largest conservation diagnostic observed.
  double conservation_error;
} SshqbChargingResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Fills `out` with the defaults for an `n`-site chain: unit frequencies,
// coupling and hopping, no dimerization, `n_c = 2n + 1`, sector mode.
//
// # Safety
// `out` must be null or point to writable memory for one `SshqbParams`.
enum SshqbStatus sshqb_params_default(uint32_t n, struct SshqbParams *out);

// Default charging-time search settings.
//
// # Safety
// `out` must be null or point to writable memory for one
// `SshqbChargingOptions`.
enum SshqbStatus sshqb_charging_options_default(struct SshqbChargingOptions *out);

// Builds the battery spectrum, initial state and propagator.
//
// # Safety
// `params` must be null or valid for reads; `out` must be null or valid for
// one pointer write. The handle written to `out` must be released with
// [`sshqb_battery_free`].
enum SshqbStatus sshqb_battery_new(const struct SshqbParams *params, struct SshqbBattery **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `battery` must be null or a handle from [`sshqb_battery_new`] not yet
// freed.
void sshqb_battery_free(struct SshqbBattery *battery);

// Ground-state energy, largest battery level and ground sector.
//
// # Safety
// `battery` must be null or a live handle; `out` null or writable.
enum SshqbStatus sshqb_battery_ground(const struct SshqbBattery *battery, struct SshqbGround *out);

// Observables at time `t`.
//
// # Safety
// `battery` must be null or a live handle; `out` null or writable.
enum SshqbStatus sshqb_battery_sample(const struct SshqbBattery *battery,
                                      double t,
                                      struct SshqbSample *out);

// Samples at `0, dt, 2dt, …, t_max`. The number of samples is always
// written to `needed`; `buffer` is filled only when `capacity` suffices,
// otherwise `SSHQB_STATUS_BUFFER_TOO_SMALL` is returned.
//
// # Safety
// `battery` must be null or a live handle; `needed` null or writable;
// `buffer` must be valid for `capacity` writes when `capacity > 0`.
enum SshqbStatus sshqb_battery_trajectory(const struct SshqbBattery *battery,
                                          double t_max,
                                          double dt,
                                          struct SshqbSample *buffer,
                                          size_t capacity,
                                          size_t *needed);

// First-peak charging time with capacities.
//
// # Safety
// `battery` must be null or a live handle; `options` null (defaults) or
// readable; `out` null or writable.
enum SshqbStatus sshqb_battery_charge(const struct SshqbBattery *battery,
                                      const struct SshqbChargingOptions *options,
                                      struct SshqbChargingResult *out);

// Site occupations `⟨σ+_i σ−_i⟩` at time `t`, sites in order. Writes
// `N` values; `capacity` must be at least `N`.
//
// # Safety
// `battery` must be null or a live handle; `buffer` valid for `capacity`
// writes.
enum SshqbStatus sshqb_battery_occupations(const struct SshqbBattery *battery,
                                           double t,
                                           double *buffer,
                                           size_t capacity);

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *sshqb_last_error_message(void);

// Library version as a static nul-terminated string.
const char *sshqb_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSHQB_H */
