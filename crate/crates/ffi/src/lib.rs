//! C ABI over `haptoflow`.
//!
//! Conventions:
//! - Every fallible function returns an [`HfStatus`]; `HF_STATUS_OK` is 0.
//! - Results come back through out-pointers. Text results are written to a
//!   caller buffer as NUL-terminated ASCII; `written` receives the length
//!   without the NUL, or the required length when the buffer is too small.
//! - The human-readable reason for the last failure on the calling thread is
//!   available from [`hf_last_error`].
//! - `HfDevice` and `HfSession` are opaque heap handles freed with their
//!   `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use haptoflow::config::Config;
use haptoflow::controller::{Controller, Mode};
use haptoflow::fluid::{self, ActuatorGeometry, FluidError, Liquid};
use haptoflow::protocol::{self, DeviceReport, Message, Session};
use haptoflow::sim::{self, rng_stream, SimActuator};
use haptoflow::vibration::{self, AccelSample, VibrationBurst, VibrationError};
use haptoflow::weight::{self, WeightError, WeightTarget};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Infeasible = 4,
    Capacity = 5,
    Envelope = 6,
    Parse = 7,
    Config = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfMode {
    Idle = 0,
    Filling = 1,
    Holding = 2,
    Draining = 3,
}

impl From<Mode> for HfMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Idle => HfMode::Idle,
            Mode::Filling => HfMode::Filling,
            Mode::Holding => HfMode::Holding,
            Mode::Draining => HfMode::Draining,
        }
    }
}

/// Density in g/cm³, viscosity in Pa·s.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfLiquid {
    pub density: f64,
    pub viscosity: f64,
}

/// Millimetres, mm/s, millilitres and grams.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfGeometry {
    pub plunger_radius: f64,
    pub pushrod_speed: f64,
    pub receptacle_near_pos: f64,
    pub receptacle_far_pos: f64,
    pub receptacle_capacity: f64,
    pub device_empty_mass: f64,
    pub max_total_mass: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfFill {
    pub near_volume: f64,
    pub far_volume: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfBurst {
    pub amplitude: f64,
    pub decay: f64,
    pub angular_frequency: f64,
    pub phase: f64,
    pub duration: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfDeviceStatus {
    pub mode: HfMode,
    /// Open-loop integrated fill, as the controller believes it.
    pub commanded: HfFill,
    /// Fluid actually present in the simulated receptacles.
    pub actual: HfFill,
    /// Simulated scale reading of the loaded device, grams.
    pub scale_reading: f64,
    pub burst_active: bool,
    pub faulted: bool,
}

/// Simulated device: controller plus simulated actuator, with an outbox of
/// encoded device reports.
pub struct HfDevice {
    config: Config,
    controller: Controller,
    actuator: SimActuator,
    outbox: Vec<u8>,
}

/// Host-side sequence/ack bookkeeping.
pub struct HfSession {
    session: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: HfStatus, msg: impl Into<String>) -> HfStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> HfStatus) -> HfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(HfStatus::Panic, "internal panic"),
    }
}

fn fluid_status(e: FluidError) -> HfStatus {
    let status = match e {
        FluidError::Domain { .. } => HfStatus::Domain,
        _ => HfStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn weight_status(e: WeightError) -> HfStatus {
    let status = match e {
        WeightError::Fluid(FluidError::Domain { .. }) => HfStatus::Domain,
        WeightError::Fluid(_) => HfStatus::InvalidArgument,
        WeightError::InfeasibleCom { .. } => HfStatus::Infeasible,
        WeightError::Capacity { .. } => HfStatus::Capacity,
        WeightError::Envelope { .. } => HfStatus::Envelope,
    };
    fail(status, e.to_string())
}

fn vibration_status(e: VibrationError) -> HfStatus {
    let status = match e {
        VibrationError::OutOfWindow { .. } | VibrationError::Domain { .. } => HfStatus::Domain,
        _ => HfStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

unsafe fn read<'a, T>(p: *const T) -> Option<&'a T> {
    // SAFETY: caller contract; null is handled.
    unsafe { p.as_ref() }
}

unsafe fn write_out<T>(p: *mut T, v: T) -> HfStatus {
    if p.is_null() {
        return fail(HfStatus::NullPointer, "null output pointer");
    }
    // SAFETY: non-null and, per the caller contract, valid for writes.
    unsafe { p.write(v) };
    HfStatus::Ok
}

/// Copies `text` plus a NUL into `buf`.
unsafe fn write_text(text: &[u8], buf: *mut c_char, cap: usize, written: *mut usize) -> HfStatus {
    if written.is_null() {
        return fail(HfStatus::NullPointer, "null `written` pointer");
    }
    // SAFETY: checked non-null above.
    unsafe { written.write(text.len()) };
    if buf.is_null() || cap < text.len() + 1 {
        return fail(
            HfStatus::BufferTooSmall,
            format!("need {} bytes including NUL", text.len() + 1),
        );
    }
    // SAFETY: `buf` holds at least `cap >= len + 1` bytes.
    unsafe {
        ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
        buf.add(text.len()).write(0);
    }
    HfStatus::Ok
}

fn to_liquid(l: &HfLiquid) -> Result<Liquid, HfStatus> {
    Liquid::new("custom", l.density, l.viscosity).map_err(fluid_status)
}

fn to_geometry(g: &HfGeometry) -> Result<ActuatorGeometry, HfStatus> {
    let geometry = ActuatorGeometry {
        plunger_radius: g.plunger_radius,
        pushrod_speed: g.pushrod_speed,
        receptacle_near_pos: g.receptacle_near_pos,
        receptacle_far_pos: g.receptacle_far_pos,
        receptacle_capacity: g.receptacle_capacity,
        device_empty_mass: g.device_empty_mass,
        max_total_mass: g.max_total_mass,
    };
    geometry.validate().map_err(fluid_status)?;
    Ok(geometry)
}

fn to_burst(b: &HfBurst) -> VibrationBurst {
    VibrationBurst {
        amplitude: b.amplitude,
        decay: b.decay,
        angular_frequency: b.angular_frequency,
        phase: b.phase,
        duration: b.duration,
    }
}

/// Copies the last error message of this thread into `buf`.
///
/// # Safety
/// `buf` must be valid for `cap` bytes or null; `written` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn hf_last_error(buf: *mut c_char, cap: usize, written: *mut usize) -> HfStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    let mut scratch = 0usize;
    let written = if written.is_null() {
        &mut scratch as *mut usize
    } else {
        written
    };
    // SAFETY: forwarded caller contract.
    unsafe { write_text(msg.as_bytes(), buf, cap, written) }
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_liquid_water(out: *mut HfLiquid) -> HfStatus {
    let l = Liquid::water();
    // SAFETY: caller contract.
    unsafe {
        write_out(
            out,
            HfLiquid {
                density: l.density,
                viscosity: l.viscosity,
            },
        )
    }
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_liquid_galinstan(out: *mut HfLiquid) -> HfStatus {
    let l = Liquid::galinstan();
    // SAFETY: caller contract.
    unsafe {
        write_out(
            out,
            HfLiquid {
                density: l.density,
                viscosity: l.viscosity,
            },
        )
    }
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_geometry_default(out: *mut HfGeometry) -> HfStatus {
    let g = ActuatorGeometry::default();
    let v = HfGeometry {
        plunger_radius: g.plunger_radius,
        pushrod_speed: g.pushrod_speed,
        receptacle_near_pos: g.receptacle_near_pos,
        receptacle_far_pos: g.receptacle_far_pos,
        receptacle_capacity: g.receptacle_capacity,
        device_empty_mass: g.device_empty_mass,
        max_total_mass: g.max_total_mass,
    };
    // SAFETY: caller contract.
    unsafe { write_out(out, v) }
}

/// Volume (cm³) of `mass` grams of `liquid`.
///
/// # Safety
/// `liquid` must be valid for reads and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_volume_for_mass(mass: f64, liquid: *const HfLiquid, out: *mut f64) -> HfStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(l) = (unsafe { read(liquid) }) else {
            return fail(HfStatus::NullPointer, "null liquid");
        };
        let liquid = match to_liquid(l) {
            Ok(l) => l,
            Err(s) => return s,
        };
        match fluid::volume_for_mass(mass, &liquid) {
            // SAFETY: caller contract.
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => fluid_status(e),
        }
    })
}

/// Mass (g) of `volume` cm³ of `liquid`.
///
/// # Safety
/// `liquid` must be valid for reads and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_mass_for_volume(volume: f64, liquid: *const HfLiquid, out: *mut f64) -> HfStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(l) = (unsafe { read(liquid) }) else {
            return fail(HfStatus::NullPointer, "null liquid");
        };
        let liquid = match to_liquid(l) {
            Ok(l) => l,
            Err(s) => return s,
        };
        match fluid::mass_for_volume(volume, &liquid) {
            // SAFETY: caller contract.
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => fluid_status(e),
        }
    })
}

/// Plunger travel (mm) for `volume` cm³.
///
/// # Safety
/// `geometry` must be valid for reads and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_plunger_travel(volume: f64, geometry: *const HfGeometry, out: *mut f64) -> HfStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(g) = (unsafe { read(geometry) }) else {
            return fail(HfStatus::NullPointer, "null geometry");
        };
        let g = match to_geometry(g) {
            Ok(g) => g,
            Err(s) => return s,
        };
        match fluid::plunger_travel(volume, &g) {
            // SAFETY: caller contract.
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => fluid_status(e),
        }
    })
}

/// Stroke time (s) for `volume` cm³.
///
/// # Safety
/// `geometry` must be valid for reads and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_fill_duration(volume: f64, geometry: *const HfGeometry, out: *mut f64) -> HfStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(g) = (unsafe { read(geometry) }) else {
            return fail(HfStatus::NullPointer, "null geometry");
        };
        let g = match to_geometry(g) {
            Ok(g) => g,
            Err(s) => return s,
        };
        match fluid::fill_duration(volume, &g) {
            // SAFETY: caller contract.
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => fluid_status(e),
        }
    })
}

/// Receptacle volumes rendering `mass` grams at `com` mm from the grip.
///
/// # Safety
/// `liquid` and `geometry` must be valid for reads and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_split_for_com(
    mass: f64,
    com: f64,
    liquid: *const HfLiquid,
    geometry: *const HfGeometry,
    out: *mut HfFill,
) -> HfStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(l), Some(g)) = (unsafe { read(liquid) }, unsafe { read(geometry) }) else {
            return fail(HfStatus::NullPointer, "null liquid or geometry");
        };
        let (liquid, geometry) = match (to_liquid(l), to_geometry(g)) {
            (Ok(l), Ok(g)) => (l, g),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match weight::split_for_com(WeightTarget::new(mass, com), &liquid, &geometry) {
            // SAFETY: caller contract.
            Ok(f) => unsafe {
                write_out(
                    out,
                    HfFill {
                        near_volume: f.near_volume,
                        far_volume: f.far_volume,
                    },
                )
            },
            Err(e) => weight_status(e),
        }
    })
}

/// Burst drive value at `t` seconds.
///
/// # Safety
/// `burst` must be valid for reads and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_waveform_sample(burst: *const HfBurst, t: f64, out: *mut f64) -> HfStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(b) = (unsafe { read(burst) }) else {
            return fail(HfStatus::NullPointer, "null burst");
        };
        let b = to_burst(b);
        if let Err(e) = b.validate() {
            return vibration_status(e);
        }
        match vibration::waveform_sample(&b, t) {
            // SAFETY: caller contract.
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => vibration_status(e),
        }
    })
}

/// Renders the burst into `buf` (capacity `cap` doubles). `written` receives
/// the sample count, which is also the required capacity on
/// `HF_STATUS_BUFFER_TOO_SMALL`.
///
/// # Safety
/// `burst` must be valid for reads, `buf` valid for `cap` doubles (or null
/// with `cap == 0`), and `written` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_render_burst(
    burst: *const HfBurst,
    sample_rate: f64,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> HfStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(b) = (unsafe { read(burst) }) else {
            return fail(HfStatus::NullPointer, "null burst");
        };
        if written.is_null() {
            return fail(HfStatus::NullPointer, "null `written` pointer");
        }
        let samples = match vibration::render_burst(&to_burst(b), sample_rate) {
            Ok(s) => s,
            Err(e) => return vibration_status(e),
        };
        // SAFETY: checked non-null.
        unsafe { written.write(samples.len()) };
        if buf.is_null() || cap < samples.len() {
            return fail(HfStatus::BufferTooSmall, format!("need {} samples", samples.len()));
        }
        // SAFETY: `buf` holds at least `samples.len()` doubles.
        unsafe { ptr::copy_nonoverlapping(samples.as_ptr(), buf, samples.len()) };
        HfStatus::Ok
    })
}

/// Indices of trigger samples in a time-sorted trace given as parallel
/// arrays. `written` receives the trigger count.
///
/// # Safety
/// `times` and `magnitudes` must be valid for `len` doubles; `out_indices`
/// valid for `cap` entries (or null with `cap == 0`); `written` valid.
#[no_mangle]
pub unsafe extern "C" fn hf_detect_triggers(
    times: *const f64,
    magnitudes: *const f64,
    len: usize,
    threshold: f64,
    refractory: f64,
    out_indices: *mut usize,
    cap: usize,
    written: *mut usize,
) -> HfStatus {
    guard(|| {
        if written.is_null() || (len > 0 && (times.is_null() || magnitudes.is_null())) {
            return fail(HfStatus::NullPointer, "null trace or `written` pointer");
        }
        let (t, m) = if len == 0 {
            (&[][..], &[][..])
        } else {
            // SAFETY: caller guarantees `len` readable doubles each.
            unsafe {
                (
                    std::slice::from_raw_parts(times, len),
                    std::slice::from_raw_parts(magnitudes, len),
                )
            }
        };
        let trace: Vec<AccelSample> = t.iter().zip(m).map(|(&t, &m)| AccelSample::new(t, m)).collect();
        let hits = match vibration::find_triggers(&trace, threshold, refractory) {
            Ok(h) => h,
            Err(e) => return vibration_status(e),
        };
        // SAFETY: checked non-null.
        unsafe { written.write(hits.len()) };
        if hits.len() > cap || (out_indices.is_null() && !hits.is_empty()) {
            return fail(HfStatus::BufferTooSmall, format!("need {} entries", hits.len()));
        }
        for (k, h) in hits.iter().enumerate() {
            // SAFETY: `k < hits.len() <= cap`.
            unsafe { out_indices.add(k).write(h.index) };
        }
        HfStatus::Ok
    })
}

/// Scale reading for `mass` grams, rounded to 0.1 g.
#[no_mangle]
pub extern "C" fn hf_read_scale(mass: f64) -> f64 {
    sim::read_scale(mass)
}

/// Creates a simulated device. `config_toml` may be null for defaults.
///
/// # Safety
/// `config_toml` must be null or a valid NUL-terminated string; `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_device_new(config_toml: *const c_char, seed: u64, out: *mut *mut HfDevice) -> HfStatus {
    guard(|| {
        if out.is_null() {
            return fail(HfStatus::NullPointer, "null output pointer");
        }
        let config = if config_toml.is_null() {
            Config::default()
        } else {
            // SAFETY: caller contract.
            let text = match unsafe { CStr::from_ptr(config_toml) }.to_str() {
                Ok(t) => t,
                Err(_) => return fail(HfStatus::Config, "configuration is not UTF-8"),
            };
            match Config::from_toml_str(text) {
                Ok(c) => c,
                Err(e) => return fail(HfStatus::Config, e.to_string()),
            }
        };
        let mut noise = config.noise;
        noise.seed = seed;
        let device = HfDevice {
            controller: Controller::new(config.controller_config()),
            actuator: SimActuator::with_rng(noise, &config.geometry, rng_stream(seed, 0)),
            config,
            outbox: Vec::new(),
        };
        // SAFETY: checked non-null.
        unsafe { out.write(Box::into_raw(Box::new(device))) };
        HfStatus::Ok
    })
}

/// # Safety
/// `device` must be null or a handle from [`hf_device_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hf_device_free(device: *mut HfDevice) {
    if !device.is_null() {
        // SAFETY: handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(device) });
    }
}

fn queue(outbox: &mut Vec<u8>, reports: &[DeviceReport]) {
    for r in reports {
        let bytes = protocol::encode(&Message::Device(r.clone())).expect("device reports encode");
        outbox.extend_from_slice(&bytes);
    }
}

/// Delivers one wire line to the device. Replies are queued in the outbox.
/// Hosts should translate object pickups into `SET_TARGET` themselves.
///
/// # Safety
/// `device` must be a live handle; `line` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn hf_device_handle_line(device: *mut HfDevice, line: *const u8, len: usize) -> HfStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(dev) = (unsafe { device.as_mut() }) else {
            return fail(HfStatus::NullPointer, "null device");
        };
        if line.is_null() && len > 0 {
            return fail(HfStatus::NullPointer, "null line");
        }
        let bytes = if len == 0 {
            &[][..]
        } else {
            // SAFETY: caller contract.
            unsafe { std::slice::from_raw_parts(line, len) }
        };
        // Object lookup is host-side; a bare PICKUP is answered with ERR.
        let replies = dev.controller.handle_line(bytes, |_| None);
        let malformed = protocol::decode(bytes).is_err();
        queue(&mut dev.outbox, &replies);
        if malformed {
            fail(HfStatus::Parse, "malformed line; ERR queued")
        } else {
            HfStatus::Ok
        }
    })
}

/// Advances the device by `dt` seconds; telemetry is queued in the outbox.
///
/// # Safety
/// `device` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hf_device_tick(device: *mut HfDevice, dt: f64) -> HfStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(dev) = (unsafe { device.as_mut() }) else {
            return fail(HfStatus::NullPointer, "null device");
        };
        if !(dt.is_finite() && dt > 0.0) {
            return fail(HfStatus::InvalidArgument, format!("dt must be > 0, got {dt}"));
        }
        let out = dev.controller.tick(dt, &mut dev.actuator);
        dev.actuator.take_events();
        queue(&mut dev.outbox, &out.reports);
        HfStatus::Ok
    })
}

/// Moves all queued reply lines into `buf` and clears the outbox. On
/// `HF_STATUS_BUFFER_TOO_SMALL` nothing is removed.
///
/// # Safety
/// `device` must be a live handle; `buf` valid for `cap` bytes; `written` valid.
#[no_mangle]
pub unsafe extern "C" fn hf_device_read_outbox(
    device: *mut HfDevice,
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
) -> HfStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(dev) = (unsafe { device.as_mut() }) else {
            return fail(HfStatus::NullPointer, "null device");
        };
        // SAFETY: caller contract.
        let status = unsafe { write_text(&dev.outbox, buf, cap, written) };
        if status == HfStatus::Ok {
            dev.outbox.clear();
        }
        status
    })
}

/// # Safety
/// `device` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_device_status(device: *const HfDevice, out: *mut HfDeviceStatus) -> HfStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(dev) = (unsafe { device.as_ref() }) else {
            return fail(HfStatus::NullPointer, "null device");
        };
        let state = dev.controller.state();
        let actual = dev.actuator.fill();
        let liquid = dev.config.liquid();
        let status = HfDeviceStatus {
            mode: state.mode.into(),
            commanded: HfFill {
                near_volume: state.current.near_volume,
                far_volume: state.current.far_volume,
            },
            actual: HfFill {
                near_volume: actual.near_volume,
                far_volume: actual.far_volume,
            },
            scale_reading: sim::read_scale(dev.actuator.device_mass(&liquid, &dev.config.geometry)),
            burst_active: state.burst.is_some(),
            faulted: state.fault.is_some(),
        };
        // SAFETY: caller contract.
        unsafe { write_out(out, status) }
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_session_new(retransmit_interval: f64, out: *mut *mut HfSession) -> HfStatus {
    guard(|| {
        if out.is_null() {
            return fail(HfStatus::NullPointer, "null output pointer");
        }
        if !(retransmit_interval.is_finite() && retransmit_interval > 0.0) {
            return fail(HfStatus::InvalidArgument, "retransmit interval must be > 0");
        }
        let s = Box::new(HfSession {
            session: Session::new(retransmit_interval),
        });
        // SAFETY: checked non-null.
        unsafe { out.write(Box::into_raw(s)) };
        HfStatus::Ok
    })
}

/// # Safety
/// `session` must be null or a handle from [`hf_session_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hf_session_free(session: *mut HfSession) {
    if !session.is_null() {
        // SAFETY: handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(session) });
    }
}

/// Sends a host command given without its sequence number, e.g.
/// `"SET_TARGET 50.0 60.0"`. Writes the full wire line to `buf` and the
/// assigned sequence number to `seq_out`.
///
/// # Safety
/// `session` must be a live handle; `command` a NUL-terminated string; `buf`
/// valid for `cap` bytes; `written` and `seq_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hf_session_send(
    session: *mut HfSession,
    command: *const c_char,
    now: f64,
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
    seq_out: *mut u64,
) -> HfStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(s) = (unsafe { session.as_mut() }) else {
            return fail(HfStatus::NullPointer, "null session");
        };
        if command.is_null() || seq_out.is_null() {
            return fail(HfStatus::NullPointer, "null command or seq_out");
        }
        // SAFETY: caller contract.
        let text = unsafe { CStr::from_ptr(command) }.to_bytes();
        let mut framed = b"0 ".to_vec();
        framed.extend_from_slice(text);
        let host_command = match protocol::decode(&framed) {
            Ok(Message::Host { command, .. }) => command,
            Ok(_) => return fail(HfStatus::Parse, "not a host command"),
            Err(e) => return fail(HfStatus::Parse, e.to_string()),
        };
        let (seq, bytes) = match s.session.send(host_command, now) {
            Ok(v) => v,
            Err(e) => return fail(HfStatus::Parse, e.to_string()),
        };
        // SAFETY: checked non-null.
        unsafe { seq_out.write(seq) };
        // SAFETY: caller contract.
        unsafe { write_text(&bytes, buf, cap, written) }
    })
}

/// Marks `seq` acknowledged. Returns whether it was outstanding.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hf_session_on_ack(session: *mut HfSession, seq: u64) -> bool {
    // SAFETY: caller contract.
    match unsafe { session.as_mut() } {
        Some(s) => s.session.on_ack(seq),
        None => false,
    }
}

/// Writes every retransmission due at `now` to `buf`, one line each.
/// On `HF_STATUS_BUFFER_TOO_SMALL` the retransmissions are still counted as
/// sent; size `buf` for the whole outstanding set.
///
/// # Safety
/// `session` must be a live handle; `buf` valid for `cap` bytes; `written` valid.
#[no_mangle]
pub unsafe extern "C" fn hf_session_tick(
    session: *mut HfSession,
    now: f64,
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
) -> HfStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(s) = (unsafe { session.as_mut() }) else {
            return fail(HfStatus::NullPointer, "null session");
        };
        let lines: Vec<u8> = s.session.tick(now).into_iter().flat_map(|(_, b)| b).collect();
        // SAFETY: caller contract.
        unsafe { write_text(&lines, buf, cap, written) }
    })
}

/// Number of unacknowledged messages.
///
/// # Safety
/// `session` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hf_session_pending(session: *const HfSession) -> usize {
    // SAFETY: caller contract.
    unsafe { session.as_ref() }.map_or(0, |s| s.session.unacknowledged().count())
}
