#ifndef HAPTOFLOW_H
#define HAPTOFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HfStatus {
  HF_STATUS_OK = 0,
  HF_STATUS_NULL_POINTER = 1,
  HF_STATUS_INVALID_ARGUMENT = 2,
  HF_STATUS_DOMAIN = 3,
  HF_STATUS_INFEASIBLE = 4,
  HF_STATUS_CAPACITY = 5,
  HF_STATUS_ENVELOPE = 6,
  HF_STATUS_PARSE = 7,
  HF_STATUS_CONFIG = 8,
  HF_STATUS_BUFFER_TOO_SMALL = 9,
  HF_STATUS_PANIC = 10,
} HfStatus;

typedef enum HfMode {
  HF_MODE_IDLE = 0,
  HF_MODE_FILLING = 1,
  HF_MODE_HOLDING = 2,
  HF_MODE_DRAINING = 3,
} HfMode;

/**
 * Simulated device: controller plus simulated actuator, with an outbox of
 * encoded device reports.
 */
typedef struct HfDevice HfDevice;

/**
 * Host-side sequence/ack bookkeeping.
 */
typedef struct HfSession HfSession;

/**
 * Density in g/cm³, viscosity in Pa·s.
 */
typedef struct HfLiquid {
  double density;
  double viscosity;
} HfLiquid;

/**
 * Millimetres, mm/s, millilitres and grams.
 */
typedef struct HfGeometry {
  double plunger_radius;
  double pushrod_speed;
  double receptacle_near_pos;
  double receptacle_far_pos;
  double receptacle_capacity;
  double device_empty_mass;
  double max_total_mass;
} HfGeometry;

typedef struct HfFill {
  double near_volume;
  double far_volume;
} HfFill;

typedef struct HfBurst {
  double amplitude;
  double decay;
  double angular_frequency;
  double phase;
  double duration;
} HfBurst;

typedef struct HfDeviceStatus {
  enum HfMode mode;
  /**
   * Open-loop integrated fill, as the controller believes it.
   */
  struct HfFill commanded;
  /**
   * Fluid actually present in the simulated receptacles.
   */
  struct HfFill actual;
  /**
   * Simulated scale reading of the loaded device, grams.
   */
  double scale_reading;
  bool burst_active;
  bool faulted;
} HfDeviceStatus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf`.
 *
 * # Safety
 * `buf` must be valid for `cap` bytes or null; `written` must be valid or null.
 */
enum HfStatus hf_last_error(char *buf, size_t cap, size_t *written);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum HfStatus hf_liquid_water(struct HfLiquid *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum HfStatus hf_liquid_galinstan(struct HfLiquid *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum HfStatus hf_geometry_default(struct HfGeometry *out);

/**
 * Volume (cm³) of `mass` grams of `liquid`.
 *
 * # Safety
 * `liquid` must be valid for reads and `out` valid for writes.
 */
enum HfStatus hf_volume_for_mass(double mass, const struct HfLiquid *liquid, double *out);

/**
 * Mass (g) of `volume` cm³ of `liquid`.
 *
 * # Safety
 * `liquid` must be valid for reads and `out` valid for writes.
 */
enum HfStatus hf_mass_for_volume(double volume, const struct HfLiquid *liquid, double *out);

/**
 * Plunger travel (mm) for `volume` cm³.
 *
 * # Safety
 * `geometry` must be valid for reads and `out` valid for writes.
 */
enum HfStatus hf_plunger_travel(double volume, const struct HfGeometry *geometry, double *out);

/**
 * Stroke time (s) for `volume` cm³.
 *
 * # Safety
 * `geometry` must be valid for reads and `out` valid for writes.
 */
enum HfStatus hf_fill_duration(double volume, const struct HfGeometry *geometry, double *out);

/**
 * Receptacle volumes rendering `mass` grams at `com` mm from the grip.
 *
 * # Safety
 * `liquid` and `geometry` must be valid for reads and `out` valid for writes.
 */
enum HfStatus hf_split_for_com(double mass,
                               double com,
                               const struct HfLiquid *liquid,
                               const struct HfGeometry *geometry,
                               struct HfFill *out);

/**
 * Burst drive value at `t` seconds.
 *
 * # Safety
 * `burst` must be valid for reads and `out` valid for writes.
 */
enum HfStatus hf_waveform_sample(const struct HfBurst *burst, double t, double *out);

/**
 * Renders the burst into `buf` (capacity `cap` doubles). `written` receives
 * the sample count, which is also the required capacity on
 * `HF_STATUS_BUFFER_TOO_SMALL`.
 *
 * # Safety
 * `burst` must be valid for reads, `buf` valid for `cap` doubles (or null
 * with `cap == 0`), and `written` valid for writes.
 */
enum HfStatus hf_render_burst(const struct HfBurst *burst,
                              double sample_rate,
                              double *buf,
                              size_t cap,
                              size_t *written);

/**
 * Indices of trigger samples in a time-sorted trace given as parallel
 * arrays. `written` receives the trigger count.
 *
 * # Safety
 * `times` and `magnitudes` must be valid for `len` doubles; `out_indices`
 * valid for `cap` entries (or null with `cap == 0`); `written` valid.
 */
enum HfStatus hf_detect_triggers(const double *times,
                                 const double *magnitudes,
                                 size_t len,
                                 double threshold,
                                 double refractory,
                                 size_t *out_indices,
                                 size_t cap,
                                 size_t *written);

/**
 * Scale reading for `mass` grams, rounded to 0.1 g.
 */
double hf_read_scale(double mass);

/**
 * Creates a simulated device. `config_toml` may be null for defaults.
 *
 * # Safety
 * `config_toml` must be null or a valid NUL-terminated string; `out` must be
 * valid for writes.
 */
enum HfStatus hf_device_new(const char *config_toml, uint64_t seed, struct HfDevice **out);

/**
 * # Safety
 * `device` must be null or a handle from [`hf_device_new`] not yet freed.
 */
void hf_device_free(struct HfDevice *device);

/**
 * Delivers one wire line to the device. Replies are queued in the outbox.
 * Hosts should translate object pickups into `SET_TARGET` themselves.
 *
 * # Safety
 * `device` must be a live handle; `line` valid for `len` bytes.
 */
enum HfStatus hf_device_handle_line(struct HfDevice *device, const uint8_t *line, size_t len);

/**
 * Advances the device by `dt` seconds; telemetry is queued in the outbox.
 *
 * # Safety
 * `device` must be a live handle.
 */
enum HfStatus hf_device_tick(struct HfDevice *device, double dt);

/**
 * Moves all queued reply lines into `buf` and clears the outbox. On
 * `HF_STATUS_BUFFER_TOO_SMALL` nothing is removed.
 *
 * # Safety
 * `device` must be a live handle; `buf` valid for `cap` bytes; `written` valid.
 */
enum HfStatus hf_device_read_outbox(struct HfDevice *device,
                                    char *buf,
                                    size_t cap,
                                    size_t *written);

/**
 * # Safety
 * `device` must be a live handle and `out` valid for writes.
 */
enum HfStatus hf_device_status(const struct HfDevice *device, struct HfDeviceStatus *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum HfStatus hf_session_new(double retransmit_interval, struct HfSession **out);

/**
 * # Safety
 * `session` must be null or a handle from [`hf_session_new`] not yet freed.
 */
void hf_session_free(struct HfSession *session);

/**
 * Sends a host command given without its sequence number, e.g.
 * `"SET_TARGET 50.0 60.0"`. Writes the full wire line to `buf` and the
 * assigned sequence number to `seq_out`.
 *
 * # Safety
 * `session` must be a live handle; `command` a NUL-terminated string; `buf`
 * valid for `cap` bytes; `written` and `seq_out` valid for writes.
 */
enum HfStatus hf_session_send(struct HfSession *session,
                              const char *command,
                              double now,
                              char *buf,
                              size_t cap,
                              size_t *written,
                              uint64_t *seq_out);

/**
 * Marks `seq` acknowledged. Returns whether it was outstanding.
 *
 * # Safety
 * `session` must be a live handle.
 */
bool hf_session_on_ack(struct HfSession *session, uint64_t seq);

/**
 * Writes every retransmission due at `now` to `buf`, one line each.
 * On `HF_STATUS_BUFFER_TOO_SMALL` the retransmissions are still counted as
 * sent; size `buf` for the whole outstanding set.
 *
 * # Safety
 * `session` must be a live handle; `buf` valid for `cap` bytes; `written` valid.
 */
enum HfStatus hf_session_tick(struct HfSession *session,
                              double now,
                              char *buf,
                              size_t cap,
                              size_t *written);

/**
 * Number of unacknowledged messages.
 *
 * # Safety
 * `session` must be a live handle or null.
 */
size_t hf_session_pending(const struct HfSession *session);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HAPTOFLOW_H */
