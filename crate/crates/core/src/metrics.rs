//! Rate and power evaluation: effective beamformed gains, the
//! hardening-bound and segmented ergodic rates, the handover-aware power
//! model, and a Monte-Carlo rate oracle.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{sample_instantaneous, ChannelStats};

/// Beamformers of one frame, `w[l][u]` of length N per entry.
#[derive(Debug, Clone)]
pub struct BeamformerSet {
    pub frame_index: usize,
    pub w: Vec<Vec<DVector<Complex64>>>,
}

impl BeamformerSet {
    pub fn zeros(frame_index: usize, n_sats: usize, n_users: usize, n_antennas: usize) -> Self {
        Self {
            frame_index,
            w: vec![vec![DVector::zeros(n_antennas); n_users]; n_sats],
        }
    }

    pub fn n_sats(&self) -> usize {
        self.w.len()
    }

    pub fn n_users(&self) -> usize {
        self.w.first().map_or(0, |row| row.len())
    }

    /// Radiated power of satellite `l`: sum of squared beam norms.
    pub fn satellite_power(&self, l: usize) -> f64 {
        self.w[l].iter().map(|w| w.norm_squared()).sum()
    }

    pub fn max_satellite_power(&self) -> f64 {
        (0..self.n_sats())
            .map(|l| self.satellite_power(l))
            .fold(0.0, f64::max)
    }
}

/// Current- and previous-frame serving indicators, both indexed by the
/// current frame's local satellite order. Entries of `prev_delta` are false
/// for satellites that were not in the previous serving set.
#[derive(Debug, Clone)]
pub struct ScheduleMask {
    pub delta: Vec<Vec<bool>>,
    pub prev_delta: Vec<Vec<bool>>,
}

impl ScheduleMask {
    /// Mask with no previously established links (first frame).
    pub fn first_frame(delta: Vec<Vec<bool>>) -> Self {
        let prev = delta
            .iter()
            .map(|row| vec![false; row.len()])
            .collect();
        Self {
            delta,
            prev_delta: prev,
        }
    }

    /// Number of newly activated links.
    pub fn handover_events(&self) -> usize {
        self.delta
            .iter()
            .zip(&self.prev_delta)
            .flat_map(|(d, p)| d.iter().zip(p))
            .filter(|(d, p)| **d && !**p)
            .count()
    }

    pub fn max_users_per_satellite(&self) -> usize {
        self.delta
            .iter()
            .map(|row| row.iter().filter(|d| **d).count())
            .max()
            .unwrap_or(0)
    }
}

/// Power breakdown of one frame.
#[derive(Debug, Clone)]
pub struct PowerReport {
    pub per_satellite: Vec<f64>,
    pub total: f64,
    pub handover_power: f64,
    pub radiated_power: f64,
    pub handover_event_count: usize,
}

/// Effective beamformed gains `g[l][u][i] = b(theta_{l,u})^T w_{l,i}`.
///
/// Note the transpose (not conjugate transpose): the conjugation convention
/// is carried by the beamformers themselves.
pub fn effective_gains(
    w: &BeamformerSet,
    stats: &ChannelStats,
) -> Vec<Vec<Vec<Complex64>>> {
    let (l_dim, u_dim) = (stats.n_sats(), stats.n_users());
    debug_assert_eq!(w.n_sats(), l_dim);
    debug_assert_eq!(w.n_users(), u_dim);
    (0..l_dim)
        .map(|l| {
            (0..u_dim)
                .map(|u| {
                    let b = &stats.links[l][u].b_vec;
                    (0..u_dim)
                        .map(|i| b.iter().zip(w.w[l][i].iter()).map(|(bn, wn)| bn * wn).sum())
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Hardening-bound rate per user from a precomputed gain tensor.
fn rate_from_gains(g: &[Vec<Vec<Complex64>>], stats: &ChannelStats) -> Vec<f64> {
    let (l_dim, u_dim) = (stats.n_sats(), stats.n_users());
    (0..u_dim)
        .map(|u| {
            let mean: Complex64 = (0..l_dim)
                .map(|l| g[l][u][u] * stats.links[l][u].alpha_bar)
                .sum();
            let serving_var: f64 = (0..l_dim)
                .map(|l| stats.links[l][u].beta * g[l][u][u].norm_sqr())
                .sum();
            let t_mat = &stats.users[u].t_mat;
            let mut interference = 0.0;
            for i in 0..u_dim {
                if i == u {
                    continue;
                }
                for r in 0..l_dim {
                    for c in 0..l_dim {
                        interference += (g[r][u][i].conj() * t_mat[(r, c)] * g[c][u][i]).re;
                    }
                }
            }
            let sinr = mean.norm_sqr() / (serving_var + interference + stats.noise_variance);
            (1.0 + sinr).log2()
        })
        .collect()
}

/// Hardening-bound ergodic rate per user, bps/Hz.
pub fn hardening_rate(w: &BeamformerSet, stats: &ChannelStats) -> Vec<f64> {
    rate_from_gains(&effective_gains(w, stats), stats)
}

/// Segmented rate `tau_ho * R_tilde + (1 - tau_ho) * R`, where the
/// handover-subframe rate gates the gains of user `u` from satellite `l`
/// by the previous-frame indicator of the receiving pair `(l, u)`.
pub fn segmented_rate(
    w: &BeamformerSet,
    stats: &ChannelStats,
    mask: &ScheduleMask,
    tau_ho: f64,
) -> Vec<f64> {
    debug_assert!(tau_ho > 0.0 && tau_ho < 1.0);
    let g = effective_gains(w, stats);
    let r = rate_from_gains(&g, stats);
    let mut g_tilde = g;
    for (l, row) in g_tilde.iter_mut().enumerate() {
        for (u, streams) in row.iter_mut().enumerate() {
            if !mask.prev_delta[l][u] {
                streams.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            }
        }
    }
    let r_tilde = rate_from_gains(&g_tilde, stats);
    r.iter()
        .zip(&r_tilde)
        .map(|(r, rt)| tau_ho * rt + (1.0 - tau_ho) * r)
        .collect()
}

/// Handover-aware per-frame power: each link pays a handover cost when
/// newly activated, plus its radiated power weighted by subframe durations
/// (previously established links transmit in both subframes).
pub fn frame_power(
    w: &BeamformerSet,
    mask: &ScheduleMask,
    tau_ho: f64,
    p_ho: f64,
) -> PowerReport {
    let l_dim = w.n_sats();
    let u_dim = w.n_users();
    let mut per_satellite = Vec::with_capacity(l_dim);
    let mut handover_power = 0.0;
    let mut radiated_power = 0.0;
    let mut events = 0usize;
    for l in 0..l_dim {
        let mut sat_ho = 0.0;
        let mut sat_rad = 0.0;
        for u in 0..u_dim {
            let delta = mask.delta[l][u];
            let prev = mask.prev_delta[l][u];
            if delta && !prev {
                sat_ho += p_ho;
                events += 1;
            }
            let p = w.w[l][u].norm_squared();
            let prev_ind = if prev { 1.0 } else { 0.0 };
            sat_rad += tau_ho * prev_ind * p + (1.0 - tau_ho) * p;
        }
        per_satellite.push(sat_ho + sat_rad);
        handover_power += sat_ho;
        radiated_power += sat_rad;
    }
    PowerReport {
        per_satellite,
        total: handover_power + radiated_power,
        handover_power,
        radiated_power,
        handover_event_count: events,
    }
}

/// Monte-Carlo ergodic rate: per-user sample mean and standard error of
/// `log2(1 + |Y_uu|^2 / (sum_{i!=u} |Y_ui|^2 + sigma^2))` over channel draws.
pub fn ergodic_rate_mc<R: Rng>(
    w: &BeamformerSet,
    stats: &ChannelStats,
    n_samples: usize,
    rng: &mut R,
) -> Vec<(f64, f64)> {
    assert!(n_samples >= 2);
    let g = effective_gains(w, stats);
    let (l_dim, u_dim) = (stats.n_sats(), stats.n_users());
    let mut sum = vec![0.0; u_dim];
    let mut sum_sq = vec![0.0; u_dim];
    for _ in 0..n_samples {
        let alpha = sample_instantaneous(stats, rng);
        for u in 0..u_dim {
            let mut signal = Complex64::new(0.0, 0.0);
            let mut interference = 0.0;
            for i in 0..u_dim {
                let y: Complex64 = (0..l_dim).map(|l| alpha[l][u] * g[l][u][i]).sum();
                if i == u {
                    signal = y;
                } else {
                    interference += y.norm_sqr();
                }
            }
            let rate =
                (1.0 + signal.norm_sqr() / (interference + stats.noise_variance)).log2();
            sum[u] += rate;
            sum_sq[u] += rate * rate;
        }
    }
    let n = n_samples as f64;
    (0..u_dim)
        .map(|u| {
            let mean = sum[u] / n;
            let var = (sum_sq[u] / n - mean * mean).max(0.0) * n / (n - 1.0);
            (mean, (var / n).sqrt())
        })
        .collect()
}
