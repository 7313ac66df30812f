//! Experiment configuration, multi-frame scenario execution, Monte-Carlo
//! sweeps, CSV emission, and the self-check suite behind the CLI.
//!
//! Configuration files are flat `key = value` text with units encoded in the
//! key names (`p_rad_dbm`, `bandwidth_mhz`, ...). Every run is a pure
//! function of `(config, seed)`: trials derive their own seeds, run in
//! parallel, and rows are emitted in a deterministic order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{
    coop_fixed_schedule, noncoop_mrt, schedule_correlation, schedule_distance,
    schedule_nearest_single, schedule_random,
};
use crate::channel::{build_channel_stats, ChannelParams, ChannelStats};
use crate::optimizer::{solve_frame1, solve_framek, AlgoConfig, FrameSolution};
use crate::orbits::{
    build_walker_delta, frame_geometry, lat_lon_to_ecef, propagate, ConstellationSpec,
    FrameSnapshot, GroundUser,
};
use crate::{Error, Result};

/// Transmitter/scheduling schemes the harness can run side by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Joint cooperative beamforming with implicit scheduling.
    Proposed,
    /// Cooperative beamforming over a uniformly random schedule.
    CoopRandom,
    /// Cooperative beamforming over the nearest-satellite schedule.
    CoopDistance,
    /// Cooperative beamforming over the correlation-aware schedule.
    CoopCorrelation,
    /// Non-cooperative matched-filter transmission, one satellite per user.
    MrtNearest,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::CoopRandom => "coop-random",
            Scheme::CoopDistance => "coop-distance",
            Scheme::CoopCorrelation => "coop-correlation",
            Scheme::MrtNearest => "mrt-nearest",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "proposed" => Ok(Scheme::Proposed),
            "coop-random" => Ok(Scheme::CoopRandom),
            "coop-distance" => Ok(Scheme::CoopDistance),
            "coop-correlation" => Ok(Scheme::CoopCorrelation),
            "mrt-nearest" => Ok(Scheme::MrtNearest),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Full experiment description; defaults follow the reference system profile.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    // constellation
    pub walker_planes: usize,
    pub walker_sats_per_plane: usize,
    pub inclination_deg: f64,
    pub altitude_km: f64,
    // link budget
    pub carrier_freq_ghz: f64,
    pub bandwidth_mhz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub noise_figure_db: f64,
    // network dimensions
    pub num_sats: usize,
    pub num_users: usize,
    pub upa_nh: usize,
    pub upa_nv: usize,
    pub u_max: usize,
    // power and frame structure
    pub p_rad_dbm: f64,
    pub p_ho_dbm: f64,
    pub tau_ho: f64,
    pub rate_min_bps_hz: f64,
    pub num_frames: usize,
    pub frame_duration_s: f64,
    // geography
    pub service_center_lat_deg: f64,
    pub service_center_lon_deg: f64,
    pub user_spread_rad: f64,
    pub min_elevation_deg: f64,
    // fading
    pub rician_k_min_db: f64,
    pub rician_k_max_db: f64,
    // execution
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    pub n_trials: usize,
    pub timing: bool,
    // algorithm knobs
    pub epsilon_reweight: f64,
    pub mu0: f64,
    pub rho: f64,
    pub mu_max: f64,
    pub delta_threshold: f64,
    pub rel_tol: f64,
    pub outer_max: usize,
    pub inner_max: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            walker_planes: 28,
            walker_sats_per_plane: 28,
            inclination_deg: 53.0,
            altitude_km: 590.0,
            carrier_freq_ghz: 12.0,
            bandwidth_mhz: 250.0,
            noise_psd_dbm_per_hz: -173.855,
            noise_figure_db: 4.0,
            num_sats: 8,
            num_users: 12,
            upa_nh: 4,
            upa_nv: 4,
            u_max: 4,
            p_rad_dbm: 70.0,
            p_ho_dbm: 50.0,
            tau_ho: 0.2,
            rate_min_bps_hz: 0.05,
            num_frames: 6,
            frame_duration_s: 30.0,
            service_center_lat_deg: 25.0,
            service_center_lon_deg: -85.0,
            user_spread_rad: 0.02,
            min_elevation_deg: 10.0,
            rician_k_min_db: 15.0,
            rician_k_max_db: 20.0,
            schemes: vec![
                Scheme::Proposed,
                Scheme::CoopRandom,
                Scheme::CoopDistance,
                Scheme::CoopCorrelation,
                Scheme::MrtNearest,
            ],
            seed: 1,
            n_trials: 100,
            timing: false,
            epsilon_reweight: 1e-6,
            mu0: 1.0,
            rho: 3.0,
            mu_max: 1e6,
            delta_threshold: 1e-5,
            rel_tol: 1e-3,
            outer_max: 15,
            inner_max: 20,
        }
    }
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl ExperimentConfig {
    /// Reduced problem size whose full scheme comparison runs in minutes.
    /// The rate target scales down with the array: 2x2 panels cannot carry
    /// the reference target for six users.
    pub fn desk() -> Self {
        Self {
            num_sats: 4,
            num_users: 6,
            upa_nh: 2,
            upa_nv: 2,
            rate_min_bps_hz: 0.01,
            num_frames: 4,
            n_trials: 20,
            ..Self::default()
        }
    }

    /// Noise variance in watts from the spectral density, bandwidth, and
    /// receiver noise figure.
    pub fn noise_variance_w(&self) -> f64 {
        let dbm = self.noise_psd_dbm_per_hz
            + 10.0 * (self.bandwidth_mhz * 1e6).log10()
            + self.noise_figure_db;
        dbm_to_watts(dbm)
    }

    pub fn p_rad_w(&self) -> f64 {
        dbm_to_watts(self.p_rad_dbm)
    }

    pub fn p_ho_w(&self) -> f64 {
        dbm_to_watts(self.p_ho_dbm)
    }

    pub fn constellation(&self) -> ConstellationSpec {
        ConstellationSpec::walker(
            self.walker_planes,
            self.walker_sats_per_plane,
            self.inclination_deg.to_radians(),
            self.altitude_km * 1e3,
        )
    }

    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            nh: self.upa_nh,
            nv: self.upa_nv,
            spacing_over_lambda: 0.5,
            carrier_freq_hz: self.carrier_freq_ghz * 1e9,
            rician_k_min_db: self.rician_k_min_db,
            rician_k_max_db: self.rician_k_max_db,
            noise_variance_w: self.noise_variance_w(),
        }
    }

    pub fn algo_config(&self) -> AlgoConfig {
        let mut cfg = AlgoConfig::new(
            self.u_max,
            self.p_rad_w(),
            self.p_ho_w(),
            self.tau_ho,
            vec![self.rate_min_bps_hz; self.num_users],
        );
        cfg.epsilon_reweight = self.epsilon_reweight;
        cfg.mu0 = self.mu0;
        cfg.rho = self.rho;
        cfg.mu_max = self.mu_max;
        cfg.delta_threshold = self.delta_threshold;
        cfg.rel_tol = self.rel_tol;
        cfg.outer_max = self.outer_max;
        cfg.inner_max = self.inner_max;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("altitude_km", self.altitude_km),
            ("carrier_freq_ghz", self.carrier_freq_ghz),
            ("bandwidth_mhz", self.bandwidth_mhz),
            ("rate_min_bps_hz", self.rate_min_bps_hz),
            ("frame_duration_s", self.frame_duration_s),
            ("user_spread_rad", self.user_spread_rad),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.num_sats == 0 || self.num_users == 0 || self.u_max == 0 {
            return Err(Error::Config("network dimensions must be nonzero".into()));
        }
        if self.upa_nh == 0 || self.upa_nv == 0 {
            return Err(Error::Config("array dimensions must be nonzero".into()));
        }
        if !(0.0..1.0).contains(&self.tau_ho) {
            return Err(Error::Config(format!(
                "tau_ho must lie in [0, 1), got {}",
                self.tau_ho
            )));
        }
        if self.num_frames == 0 || self.n_trials == 0 {
            return Err(Error::Config("num_frames and n_trials must be nonzero".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("scheme list is empty".into()));
        }
        self.constellation().validate().map_err(|e| match e {
            Error::Parameter(m) => Error::Config(m),
            other => other,
        })?;
        Ok(())
    }

    /// Parses a flat `key = value` file; unknown keys are rejected so typos
    /// do not silently fall back to defaults.
    pub fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if seen.insert(key.to_string(), lineno).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
            cfg.set(key, value).map_err(|e| {
                let msg = match e {
                    Error::Config(m) => m,
                    other => other.to_string(),
                };
                Error::Config(format!("line {}: {msg}", lineno + 1))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn f(v: &str) -> Result<f64> {
            v.parse()
                .map_err(|_| Error::Config(format!("not a number: `{v}`")))
        }
        fn n(v: &str) -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Config(format!("not an integer: `{v}`")))
        }
        match key {
            "walker_planes" => self.walker_planes = n(value)?,
            "walker_sats_per_plane" => self.walker_sats_per_plane = n(value)?,
            "inclination_deg" => self.inclination_deg = f(value)?,
            "altitude_km" => self.altitude_km = f(value)?,
            "carrier_freq_ghz" => self.carrier_freq_ghz = f(value)?,
            "bandwidth_mhz" => self.bandwidth_mhz = f(value)?,
            "noise_psd_dbm_per_hz" => self.noise_psd_dbm_per_hz = f(value)?,
            "noise_figure_db" => self.noise_figure_db = f(value)?,
            "num_sats" => self.num_sats = n(value)?,
            "num_users" => self.num_users = n(value)?,
            "upa_nh" => self.upa_nh = n(value)?,
            "upa_nv" => self.upa_nv = n(value)?,
            "u_max" => self.u_max = n(value)?,
            "p_rad_dbm" => self.p_rad_dbm = f(value)?,
            "p_ho_dbm" => self.p_ho_dbm = f(value)?,
            "tau_ho" => self.tau_ho = f(value)?,
            "rate_min_bps_hz" => self.rate_min_bps_hz = f(value)?,
            "num_frames" => self.num_frames = n(value)?,
            "frame_duration_s" => self.frame_duration_s = f(value)?,
            "service_center_lat_deg" => self.service_center_lat_deg = f(value)?,
            "service_center_lon_deg" => self.service_center_lon_deg = f(value)?,
            "user_spread_rad" => self.user_spread_rad = f(value)?,
            "min_elevation_deg" => self.min_elevation_deg = f(value)?,
            "rician_k_min_db" => self.rician_k_min_db = f(value)?,
            "rician_k_max_db" => self.rician_k_max_db = f(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("not an integer: `{value}`")))?
            }
            "n_trials" => self.n_trials = n(value)?,
            "timing" => {
                self.timing = match value {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(Error::Config(format!("not a boolean: `{other}`")));
                    }
                }
            }
            "schemes" => {
                self.schemes = value
                    .split(',')
                    .map(Scheme::parse)
                    .collect::<Result<Vec<_>>>()?;
            }
            "epsilon_reweight" => self.epsilon_reweight = f(value)?,
            "mu0" => self.mu0 = f(value)?,
            "rho" => self.rho = f(value)?,
            "mu_max" => self.mu_max = f(value)?,
            "delta_threshold" => self.delta_threshold = f(value)?,
            "rel_tol" => self.rel_tol = f(value)?,
            "outer_max" => self.outer_max = n(value)?,
            "inner_max" => self.inner_max = n(value)?,
            other => {
                return Err(Error::Config(format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }
}

/// One `(trial, frame, scheme)` outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRow {
    pub trial: usize,
    pub frame: usize,
    pub scheme: String,
    pub status: String,
    pub power_w: f64,
    pub ho_power_w: f64,
    pub ho_events: usize,
    pub min_rate: f64,
    pub solve_ms: f64,
}

/// One aggregated `(sweep point, scheme)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub param: String,
    pub value: f64,
    pub scheme: String,
    /// Mean frame power over feasible trials; absent when none are feasible.
    pub mean_power_w: Option<f64>,
    pub feasibility_rate: f64,
    pub mean_ho_events: Option<f64>,
    pub n_feasible: usize,
}

fn trial_seed(master: u64, trial: usize) -> u64 {
    // splitmix64 step keeps per-trial streams decorrelated
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(trial as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Previous-frame schedule carried across frames, keyed by global satellite
/// id so links vanish when their satellite drops out of the serving set.
fn thread_prev(
    prev_by_sat: &HashMap<usize, Vec<bool>>,
    serving_set: &[usize],
    n_users: usize,
) -> Vec<Vec<bool>> {
    serving_set
        .iter()
        .map(|sat| {
            prev_by_sat
                .get(sat)
                .cloned()
                .unwrap_or_else(|| vec![false; n_users])
        })
        .collect()
}

struct SchemeState {
    scheme: Scheme,
    prev_by_sat: HashMap<usize, Vec<bool>>,
}

fn scheme_solution(
    scheme: Scheme,
    stats: &ChannelStats,
    frame: &FrameSnapshot,
    prev: &[Vec<bool>],
    first: bool,
    cfg: &AlgoConfig,
    rule_rng: &mut ChaCha8Rng,
) -> Result<FrameSolution> {
    match scheme {
        Scheme::Proposed => {
            if first {
                solve_frame1(stats, cfg)
            } else {
                solve_framek(stats, prev, cfg)
            }
        }
        Scheme::CoopRandom => {
            let mask = schedule_random(frame, cfg.u_max, rule_rng)?;
            coop_fixed_schedule(stats, &mask, prev, cfg)
        }
        Scheme::CoopDistance => {
            let mask = schedule_distance(frame, cfg.u_max)?;
            coop_fixed_schedule(stats, &mask, prev, cfg)
        }
        Scheme::CoopCorrelation => {
            let mask = schedule_correlation(frame, stats, cfg.u_max)?;
            coop_fixed_schedule(stats, &mask, prev, cfg)
        }
        Scheme::MrtNearest => {
            let mask = schedule_nearest_single(frame, cfg.u_max)?;
            noncoop_mrt(stats, &mask, prev, cfg)
        }
    }
}

/// Runs one seeded trial: `num_frames` frames for every configured scheme,
/// threading each scheme's schedule into the next frame.
pub fn run_scenario(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<FrameRow>> {
    cfg.validate()?;
    let seed = trial_seed(cfg.seed, trial);
    let spec = cfg.constellation();
    let elements = build_walker_delta(&spec)?;
    let center = lat_lon_to_ecef(
        cfg.service_center_lat_deg.to_radians(),
        cfg.service_center_lon_deg.to_radians(),
        spec.earth_radius,
    );
    let mut user_rng = ChaCha8Rng::seed_from_u64(seed);
    let users: Vec<GroundUser> = (0..cfg.num_users)
        .map(|i| {
            GroundUser::new(
                i,
                cfg.service_center_lat_deg.to_radians()
                    + user_rng.random_range(-cfg.user_spread_rad..cfg.user_spread_rad),
                cfg.service_center_lon_deg.to_radians()
                    + user_rng.random_range(-cfg.user_spread_rad..cfg.user_spread_rad),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let params = cfg.channel_params();
    let algo = cfg.algo_config();

    let states_of = |k: usize| {
        let t = (k as f64 - 1.0) * cfg.frame_duration_s;
        propagate(&elements, t, spec.earth_rotation_rate)
    };

    let mut rows = Vec::new();
    let mut schemes: Vec<SchemeState> = cfg
        .schemes
        .iter()
        .map(|&s| SchemeState {
            scheme: s,
            prev_by_sat: HashMap::new(),
        })
        .collect();

    for k in 1..=cfg.num_frames {
        let states = states_of(k);
        let geometry = select_frame(
            k,
            &states,
            &center,
            &users,
            cfg.num_sats,
            cfg.min_elevation_deg.to_radians(),
            spec.earth_radius,
        );
        let (frame, stats) = match geometry {
            Ok(frame) => {
                let mut ch_rng =
                    ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5851_F42D * k as u64));
                match build_channel_stats(&frame, &params, &mut ch_rng) {
                    Ok(stats) => (frame, stats),
                    Err(e) => {
                        push_error_rows(&mut rows, trial, k, &schemes, &e);
                        continue;
                    }
                }
            }
            Err(e) => {
                push_error_rows(&mut rows, trial, k, &schemes, &e);
                continue;
            }
        };

        for (si, st) in schemes.iter_mut().enumerate() {
            let prev = thread_prev(&st.prev_by_sat, &frame.serving_set, cfg.num_users);
            let first = k == 1;
            let mut rule_rng = ChaCha8Rng::seed_from_u64(
                seed ^ (0xA076_1D64_78BD_642F ^ ((si as u64) << 32 | k as u64)),
            );
            let t0 = Instant::now();
            let outcome =
                scheme_solution(st.scheme, &stats, &frame, &prev, first, &algo, &mut rule_rng);
            let solve_ms = if cfg.timing {
                t0.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            match outcome {
                Ok(sol) => {
                    // thread the realized schedule into the next frame
                    st.prev_by_sat.clear();
                    for (l, &sat) in frame.serving_set.iter().enumerate() {
                        st.prev_by_sat.insert(sat, sol.mask.delta[l].clone());
                    }
                    let status = if sol.feasible {
                        "feasible"
                    } else if sol.degraded {
                        "degraded"
                    } else {
                        "infeasible"
                    };
                    rows.push(FrameRow {
                        trial,
                        frame: k,
                        scheme: st.scheme.name().to_string(),
                        status: status.to_string(),
                        power_w: sol.power.total,
                        ho_power_w: sol.power.handover_power,
                        ho_events: sol.power.handover_event_count,
                        min_rate: sol
                            .rates
                            .iter()
                            .cloned()
                            .fold(f64::INFINITY, f64::min),
                        solve_ms,
                    });
                }
                Err(e) => {
                    st.prev_by_sat.clear();
                    rows.push(FrameRow {
                        trial,
                        frame: k,
                        scheme: st.scheme.name().to_string(),
                        status: format!("error:{}", compact_error(&e)),
                        power_w: f64::NAN,
                        ho_power_w: f64::NAN,
                        ho_events: 0,
                        min_rate: f64::NAN,
                        solve_ms,
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn compact_error(e: &Error) -> String {
    let s = e.to_string();
    s.split(':').next().unwrap_or("error").replace(' ', "-")
}

fn push_error_rows(
    rows: &mut Vec<FrameRow>,
    trial: usize,
    frame: usize,
    schemes: &[SchemeState],
    e: &Error,
) {
    for st in schemes {
        rows.push(FrameRow {
            trial,
            frame,
            scheme: st.scheme.name().to_string(),
            status: format!("error:{}", compact_error(e)),
            power_w: f64::NAN,
            ho_power_w: f64::NAN,
            ho_events: 0,
            min_rate: f64::NAN,
            solve_ms: 0.0,
        });
    }
}

fn select_frame(
    frame_index: usize,
    states: &[crate::orbits::SatState],
    center: &nalgebra::Vector3<f64>,
    users: &[GroundUser],
    n_sats: usize,
    min_elevation: f64,
    earth_radius: f64,
) -> Result<FrameSnapshot> {
    let serving =
        crate::orbits::select_serving_set(states, center, n_sats, min_elevation)?;
    frame_geometry(frame_index, &serving, states, users, earth_radius, min_elevation)
}

/// All trials of one configuration, in parallel, rows in trial order.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<FrameRow>> {
    cfg.validate()?;
    let mut per_trial: Vec<(usize, Result<Vec<FrameRow>>)> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| (t, run_scenario(cfg, t)))
        .collect();
    per_trial.sort_by_key(|(t, _)| *t);
    let mut rows = Vec::new();
    for (_, r) in per_trial {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Sweepable configuration axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    RateMin,
    NumUsers,
    NumSats,
    PHoDbm,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::RateMin => "rate_min",
            SweepParam::NumUsers => "num_users",
            SweepParam::NumSats => "num_sats",
            SweepParam::PHoDbm => "p_ho_dbm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rate_min" => Ok(SweepParam::RateMin),
            "num_users" => Ok(SweepParam::NumUsers),
            "num_sats" => Ok(SweepParam::NumSats),
            "p_ho_dbm" => Ok(SweepParam::PHoDbm),
            other => Err(Error::Config(format!(
                "unknown sweep parameter `{other}` (expected rate_min, num_users, num_sats, or p_ho_dbm)"
            ))),
        }
    }

    pub fn apply(self, cfg: &mut ExperimentConfig, value: f64) -> Result<()> {
        match self {
            SweepParam::RateMin => cfg.rate_min_bps_hz = value,
            SweepParam::NumUsers => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::Config(format!("num_users must be a positive integer, got {value}")));
                }
                cfg.num_users = value as usize;
            }
            SweepParam::NumSats => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::Config(format!("num_sats must be a positive integer, got {value}")));
                }
                cfg.num_sats = value as usize;
            }
            SweepParam::PHoDbm => cfg.p_ho_dbm = value,
        }
        Ok(())
    }
}

/// Aggregates frame rows into one cell per scheme. A trial counts as
/// feasible for a scheme when every one of its frames is feasible; power and
/// handover means are taken over feasible trials only.
pub fn aggregate(rows: &[FrameRow], param: &str, value: f64) -> Vec<AggregateRow> {
    let mut schemes: Vec<String> = Vec::new();
    for r in rows {
        if !schemes.contains(&r.scheme) {
            schemes.push(r.scheme.clone());
        }
    }
    let mut out = Vec::new();
    for scheme in schemes {
        let mut trials: Vec<usize> = rows
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| r.trial)
            .collect();
        trials.sort_unstable();
        trials.dedup();
        let mut n_feasible = 0usize;
        let mut power_sum = 0.0;
        let mut ho_sum = 0.0;
        for &t in &trials {
            let frames: Vec<&FrameRow> = rows
                .iter()
                .filter(|r| r.scheme == scheme && r.trial == t)
                .collect();
            if frames.iter().all(|r| r.status == "feasible") && !frames.is_empty() {
                n_feasible += 1;
                power_sum +=
                    frames.iter().map(|r| r.power_w).sum::<f64>() / frames.len() as f64;
                ho_sum += frames.iter().map(|r| r.ho_events as f64).sum::<f64>();
            }
        }
        let n_trials = trials.len().max(1);
        out.push(AggregateRow {
            param: param.to_string(),
            value,
            scheme,
            mean_power_w: (n_feasible > 0).then(|| power_sum / n_feasible as f64),
            feasibility_rate: n_feasible as f64 / n_trials as f64,
            mean_ho_events: (n_feasible > 0).then(|| ho_sum / n_feasible as f64),
            n_feasible,
        });
    }
    out
}

/// Runs a one-parameter sweep; returns all frame rows plus one aggregate row
/// per `(value, scheme)`. Individual cell failures become error rows and do
/// not abort the sweep.
pub fn sweep(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    n_trials: usize,
) -> Result<(Vec<FrameRow>, Vec<AggregateRow>)> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut frames = Vec::new();
    let mut aggregates = Vec::new();
    for &v in values {
        let mut point = cfg.clone();
        point.n_trials = n_trials;
        param.apply(&mut point, v)?;
        let rows = run_trials(&point)?;
        aggregates.extend(aggregate(&rows, param.name(), v));
        frames.extend(rows);
    }
    Ok((frames, aggregates))
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        // shortest round-trip representation keeps files byte-deterministic
        format!("{v}")
    }
}

/// Serializes frame rows; stable column order and row order.
pub fn frames_csv(rows: &[FrameRow]) -> String {
    let mut s = String::from(
        "trial,frame,scheme,status,power_w,ho_power_w,ho_events,min_rate,solve_ms\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.frame,
            r.scheme,
            r.status,
            fmt_f64(r.power_w),
            fmt_f64(r.ho_power_w),
            r.ho_events,
            fmt_f64(r.min_rate),
            fmt_f64(r.solve_ms),
        );
    }
    s
}

/// Serializes aggregate rows; absent means are empty fields, not zeros.
pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = String::from(
        "param,value,scheme,mean_power_w,feasibility_rate,mean_ho_events,n_feasible\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.param,
            fmt_f64(r.value),
            r.scheme,
            r.mean_power_w.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.feasibility_rate),
            r.mean_ho_events.map(fmt_f64).unwrap_or_default(),
            r.n_feasible,
        );
    }
    s
}

/// Writes both CSV artifacts into `out_dir`.
pub fn emit_csv(
    frames: &[FrameRow],
    aggregates: &[AggregateRow],
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    for (name, content) in [
        ("frames.csv", frames_csv(frames)),
        ("aggregate.csv", aggregate_csv(aggregates)),
    ] {
        let path = out_dir.join(name);
        std::fs::write(&path, content).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

/// Outcome of one self-check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub wall_ms: f64,
}

/// Runs the cross-module invariant suite at fixed seeds. `fast` skips the
/// Monte-Carlo and end-to-end checks.
pub fn validate(fast: bool) -> Vec<CheckResult> {
    let mut results = Vec::new();
    let mut check = |name: &str, f: &dyn Fn() -> std::result::Result<String, String>| {
        let t0 = Instant::now();
        let outcome = f();
        let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        results.push(match outcome {
            Ok(detail) => CheckResult {
                name: name.to_string(),
                passed: true,
                detail,
                wall_ms,
            },
            Err(detail) => CheckResult {
                name: name.to_string(),
                passed: false,
                detail,
                wall_ms,
            },
        });
    };

    check("noise-variance-formula", &|| {
        let cfg = ExperimentConfig::default();
        let got = cfg.noise_variance_w();
        let expected = 2.585e-12;
        let db_err = 10.0 * (got / expected).log10().abs();
        if db_err <= 1e-3 {
            Ok(format!("sigma^2 = {got:.4e} W ({db_err:.2e} dB off nominal)"))
        } else {
            Err(format!("sigma^2 = {got:.4e} W, {db_err:.3} dB off nominal"))
        }
    });

    check("walker-orbit-period-and-speed", &|| {
        let spec = ExperimentConfig::default().constellation();
        let period = 2.0 * std::f64::consts::PI / spec.mean_motion();
        let speed = spec.orbital_radius() * spec.mean_motion();
        let period_ok = (period - 5779.0).abs() / 5779.0 <= 1e-3;
        let speed_ok = (speed - 7561.0).abs() / 7561.0 <= 1e-3;
        if period_ok && speed_ok {
            Ok(format!("period {period:.0} s, speed {speed:.0} m/s"))
        } else {
            Err(format!("period {period:.1} s, speed {speed:.1} m/s"))
        }
    });

    check("qos-target-closed-form", &|| {
        let cfg = ExperimentConfig::default().algo_config();
        let eta = cfg.eta(0);
        if (eta - 0.044274).abs() <= 1e-6 {
            Ok(format!("eta = {eta:.6}"))
        } else {
            Err(format!("eta = {eta:.6}, expected 0.044274"))
        }
    });

    check("covariance-factor-reconstruction", &|| {
        use nalgebra::DMatrix;
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for _ in 0..10 {
            let n = 4;
            let a = DMatrix::from_fn(n, n, |_, _| {
                nalgebra::Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let omega = &a * a.adjoint();
            let psi = crate::channel::psd_factor(&omega).map_err(|e| e.to_string())?;
            let err = (psi.adjoint() * &psi - &omega).norm() / omega.norm();
            if err > 1e-8 {
                return Err(format!("reconstruction error {err:.2e}"));
            }
        }
        Ok("10 random factors reconstruct within 1e-8".into())
    });

    check("frame-power-example", &|| {
        use crate::metrics::{frame_power, BeamformerSet, ScheduleMask};
        let mut w = BeamformerSet::zeros(1, 1, 1, 1);
        w.w[0][0][0] = nalgebra::Complex::new(10f64.sqrt(), 0.0);
        let mask = ScheduleMask {
            delta: vec![vec![true]],
            prev_delta: vec![vec![false]],
        };
        let p = frame_power(&w, &mask, 0.2, 100.0);
        if (p.total - 108.0).abs() <= 1e-9 {
            Ok("new 10 W link costs 108 W with handover".into())
        } else {
            Err(format!("total {} W, expected 108", p.total))
        }
    });

    check("schedule-rules-cover-users", &|| {
        let spec = ConstellationSpec::walker(28, 28, 53f64.to_radians(), 590e3);
        let elements = build_walker_delta(&spec).map_err(|e| e.to_string())?;
        let states = propagate(&elements, 0.0, spec.earth_rotation_rate);
        let center = lat_lon_to_ecef(25f64.to_radians(), (-85f64).to_radians(), spec.earth_radius);
        let serving = crate::orbits::select_serving_set(
            &states,
            &center,
            4,
            10f64.to_radians(),
        )
        .map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let users: Vec<GroundUser> = (0..6)
            .map(|i| {
                GroundUser::new(
                    i,
                    25f64.to_radians() + rng.random_range(-0.02..0.02),
                    (-85f64).to_radians() + rng.random_range(-0.02..0.02),
                )
                .unwrap()
            })
            .collect();
        let frame = frame_geometry(1, &serving, &states, &users, spec.earth_radius, 10f64.to_radians())
            .map_err(|e| e.to_string())?;
        for s in 0..50u64 {
            let mut rr = ChaCha8Rng::seed_from_u64(s);
            let mask = schedule_random(&frame, 4, &mut rr).map_err(|e| e.to_string())?;
            for u in 0..6 {
                if !mask.delta.iter().any(|row| row[u]) {
                    return Err(format!("seed {s}: user {u} unserved"));
                }
            }
            if mask.max_users_per_satellite() > 4 {
                return Err(format!("seed {s}: capacity violated"));
            }
        }
        Ok("50 random draws cover all users within capacity".into())
    });

    if !fast {
        check("scalar-analytic-power", &|| {
            // single user, single satellite, pure line of sight
            use crate::channel::{LinkStats, UserMoments};
            use nalgebra::{DMatrix, DVector};
            let alpha_bar = 1e-8;
            let n = 4;
            let b = DVector::from_element(n, nalgebra::Complex::new(1.0, 0.0));
            let t = DMatrix::from_element(
                1,
                1,
                nalgebra::Complex::new(alpha_bar * alpha_bar, 0.0),
            );
            let stats = ChannelStats {
                frame_index: 1,
                n_antennas: n,
                links: vec![vec![LinkStats {
                    gamma: alpha_bar * alpha_bar,
                    rician_k: f64::INFINITY,
                    alpha_bar,
                    beta: 0.0,
                    b_vec: b,
                }]],
                users: vec![UserMoments {
                    t_mat: t,
                    q_diag: DVector::zeros(1),
                    psi_blocks: vec![DMatrix::zeros(1, 1)],
                }],
                noise_variance: 2.585e-12,
            };
            let cfg = AlgoConfig::new(1, 1e4, 100.0, 0.2, vec![0.05]);
            let sol = solve_frame1(&stats, &cfg).map_err(|e| e.to_string())?;
            let p_star = cfg.eta(0) * stats.noise_variance / (alpha_bar * alpha_bar * n as f64);
            let got = sol.w.w[0][0].norm_squared();
            let rel = (got - p_star).abs() / p_star;
            if sol.feasible && rel <= 1e-5 {
                Ok(format!("p* matches inversion within {rel:.1e}"))
            } else {
                Err(format!("p = {got:.4e}, expected {p_star:.4e} (rel {rel:.1e})"))
            }
        });

        check("scenario-determinism", &|| {
            let mut cfg = ExperimentConfig::desk();
            cfg.num_sats = 3;
            cfg.num_users = 2;
            cfg.num_frames = 2;
            cfg.schemes = vec![Scheme::Proposed, Scheme::CoopDistance];
            let a = run_scenario(&cfg, 0).map_err(|e| e.to_string())?;
            let b = run_scenario(&cfg, 0).map_err(|e| e.to_string())?;
            if frames_csv(&a) == frames_csv(&b) {
                Ok(format!("{} rows byte-identical across reruns", a.len()))
            } else {
                Err("rows differ between identical runs".into())
            }
        });
    }

    results
}
