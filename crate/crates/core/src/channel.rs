//! Statistical CSI for one frame: per-link Rician moments, deterministic
//! array-response vectors, and the per-user second-moment matrices consumed
//! by the rate bound and the conic formulations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::orbits::FrameSnapshot;
use crate::{Error, Result};

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Peak amplitude of the element radiation pattern sqrt(3/(2*pi)).
pub fn element_peak_gain() -> f64 {
    (3.0 / std::f64::consts::TAU).sqrt()
}

/// Channel-model parameters shared by all links of a frame.
#[derive(Debug, Clone)]
pub struct ChannelParams {
    pub nh: usize,
    pub nv: usize,
    /// Element spacing over wavelength (0.5 for half-wavelength UPA).
    pub spacing_over_lambda: f64,
    pub carrier_freq_hz: f64,
    pub rician_k_min_db: f64,
    pub rician_k_max_db: f64,
    /// Noise variance sigma^2 = F * N0 * B, watts.
    pub noise_variance_w: f64,
}

impl ChannelParams {
    pub fn n_antennas(&self) -> usize {
        self.nh * self.nv
    }
}

/// Statistical parameters of one satellite-user link.
#[derive(Debug, Clone)]
pub struct LinkStats {
    /// Linear large-scale power gain E|alpha|^2.
    pub gamma: f64,
    /// Linear Rician factor.
    pub rician_k: f64,
    /// Common mean of the real and imaginary parts of alpha.
    pub alpha_bar: f64,
    /// Common variance of the real and imaginary parts of alpha.
    pub beta: f64,
    /// Array response scaled by the elevation-dependent element gain.
    pub b_vec: DVector<Complex64>,
}

/// Per-user second-moment structure.
///
/// `Omega_u` is block diagonal over the `U` stream blocks: block `i` equals
/// `T_u` for `i != u` and `Q_u = diag(beta_u)` for `i == u`. `psi_blocks`
/// holds a per-block factor with `Psi^H Psi = block`.
#[derive(Debug, Clone)]
pub struct UserMoments {
    /// L x L matrix `alpha_bar alpha_bar^T + diag(beta)`.
    pub t_mat: DMatrix<Complex64>,
    /// Diagonal of `Q_u` (the per-satellite beta values).
    pub q_diag: DVector<f64>,
    /// Factor of each Omega block, indexed by stream.
    pub psi_blocks: Vec<DMatrix<Complex64>>,
}

/// Statistical CSI for one frame.
#[derive(Debug, Clone)]
pub struct ChannelStats {
    pub frame_index: usize,
    pub n_antennas: usize,
    /// `links[l][u]` for local satellite index `l` and user `u`.
    pub links: Vec<Vec<LinkStats>>,
    pub users: Vec<UserMoments>,
    pub noise_variance: f64,
}

impl ChannelStats {
    pub fn n_sats(&self) -> usize {
        self.links.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Stacked mean vector of user `u` across satellites.
    pub fn alpha_bar_vec(&self, u: usize) -> DVector<f64> {
        DVector::from_fn(self.n_sats(), |l, _| self.links[l][u].alpha_bar)
    }

    /// Materializes the LU x LU block-diagonal `Omega_u` (debug/oracle use).
    pub fn omega(&self, u: usize) -> DMatrix<Complex64> {
        let (l_dim, u_dim) = (self.n_sats(), self.n_users());
        let mut m = DMatrix::zeros(l_dim * u_dim, l_dim * u_dim);
        for i in 0..u_dim {
            for r in 0..l_dim {
                for c in 0..l_dim {
                    m[(i * l_dim + r, i * l_dim + c)] = if i == u {
                        if r == c {
                            Complex64::new(self.users[u].q_diag[r], 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    } else {
                        self.users[u].t_mat[(r, c)]
                    };
                }
            }
        }
        m
    }

    /// Materializes the block-diagonal factor `Psi_u` (debug/oracle use).
    pub fn psi(&self, u: usize) -> DMatrix<Complex64> {
        let (l_dim, u_dim) = (self.n_sats(), self.n_users());
        let mut m = DMatrix::zeros(l_dim * u_dim, l_dim * u_dim);
        for i in 0..u_dim {
            let blk = &self.users[u].psi_blocks[i];
            for r in 0..l_dim {
                for c in 0..l_dim {
                    m[(i * l_dim + r, i * l_dim + c)] = blk[(r, c)];
                }
            }
        }
        m
    }
}

/// Free-space path gain `(lambda / (4 pi d))^2`; zero for invisible links.
/// Antenna gain is not folded in here; it lives in the array response.
pub fn path_gain(distance_m: f64, visible: bool, carrier_freq_hz: f64) -> f64 {
    assert!(distance_m > 0.0);
    if !visible {
        return 0.0;
    }
    let lambda = SPEED_OF_LIGHT_M_S / carrier_freq_hz;
    let amp = lambda / (4.0 * std::f64::consts::PI * distance_m);
    amp * amp
}

/// Rician moment split: mean and variance of the real/imaginary parts.
pub fn rician_params(gamma: f64, rician_k: f64) -> (f64, f64) {
    debug_assert!(gamma >= 0.0 && rician_k >= 0.0);
    let alpha_bar = (rician_k * gamma / (2.0 * (1.0 + rician_k))).sqrt();
    let beta = gamma / (2.0 * (1.0 + rician_k));
    (alpha_bar, beta)
}

/// UPA steering vector: Kronecker product of the horizontal and vertical
/// phase ramps with spatial frequencies
/// `phi_h = d/lambda * cos(az) cos(el)` and `phi_v = d/lambda * sin(az) cos(el)`.
pub fn steering_vector(
    theta_az: f64,
    theta_el: f64,
    nh: usize,
    nv: usize,
    spacing_over_lambda: f64,
) -> DVector<Complex64> {
    assert!(nh >= 1 && nv >= 1);
    let phi_h = spacing_over_lambda * theta_az.cos() * theta_el.cos();
    let phi_v = spacing_over_lambda * theta_az.sin() * theta_el.cos();
    let ramp = |phi: f64, n: usize| -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::from_polar(1.0, -std::f64::consts::TAU * phi * i as f64))
            .collect()
    };
    let h = ramp(phi_h, nh);
    let v = ramp(phi_v, nv);
    let mut out = DVector::zeros(nh * nv);
    for (i, hi) in h.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            out[i * nv + j] = hi * vj;
        }
    }
    out
}

/// Element amplitude gain at off-boresight angle `theta_b`:
/// `sqrt(3/(2 pi)) cos(theta_b)`, clamped to zero beyond the horizon.
pub fn element_gain(boresight_angle: f64) -> f64 {
    if boresight_angle >= std::f64::consts::FRAC_PI_2 {
        0.0
    } else {
        element_peak_gain() * boresight_angle.cos()
    }
}

/// Array response `b = G(theta_b) * a(theta)`.
pub fn array_response(
    theta_az: f64,
    theta_el: f64,
    boresight_angle: f64,
    nh: usize,
    nv: usize,
    spacing_over_lambda: f64,
) -> DVector<Complex64> {
    steering_vector(theta_az, theta_el, nh, nv, spacing_over_lambda)
        * Complex64::new(element_gain(boresight_angle), 0.0)
}

/// Factors a Hermitian PSD matrix as `Psi^H Psi`.
///
/// Cholesky first (with a small diagonal jitter retry), eigendecomposition
/// square root as the fallback for singular matrices.
pub fn psd_factor(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = m.nrows();
    if let Some(chol) = nalgebra::linalg::Cholesky::new(m.clone()) {
        return Ok(chol.l().adjoint());
    }
    let trace: f64 = (0..n).map(|i| m[(i, i)].re).sum();
    let jitter = 1e-12 * trace.max(1e-300) / n as f64;
    let mut jittered = m.clone();
    for i in 0..n {
        jittered[(i, i)] += Complex64::new(jitter, 0.0);
    }
    if let Some(chol) = nalgebra::linalg::Cholesky::new(jittered) {
        return Ok(chol.l().adjoint());
    }
    let eig = nalgebra::linalg::SymmetricEigen::new(m.clone());
    let mut factor = eig.eigenvectors.adjoint();
    for (i, ev) in eig.eigenvalues.iter().enumerate() {
        let s = ev.max(0.0).sqrt();
        for c in 0..n {
            factor[(i, c)] *= Complex64::new(s, 0.0);
        }
    }
    Ok(factor)
}

/// Assembles the statistical CSI of one frame. Rician factors are drawn
/// i.i.d. per link from the configured dB range.
pub fn build_channel_stats<R: Rng>(
    frame: &FrameSnapshot,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<ChannelStats> {
    let l_dim = frame.n_sats();
    let u_dim = frame.n_users();
    if l_dim == 0 || u_dim == 0 {
        return Err(Error::Parameter("empty frame snapshot".into()));
    }
    let k_dist = Uniform::new_inclusive(params.rician_k_min_db, params.rician_k_max_db)
        .map_err(|e| Error::Parameter(format!("bad rician range: {e}")))?;

    let mut links = Vec::with_capacity(l_dim);
    for row in &frame.links {
        let mut stats_row = Vec::with_capacity(u_dim);
        for link in row {
            let gamma = path_gain(link.distance_m, link.visible, params.carrier_freq_hz);
            let k_db = k_dist.sample(rng);
            let rician_k = 10f64.powf(k_db / 10.0);
            let (alpha_bar, beta) = rician_params(gamma, rician_k);
            let b_vec = array_response(
                link.theta_az_rad,
                link.theta_el_rad,
                link.boresight_angle_rad,
                params.nh,
                params.nv,
                params.spacing_over_lambda,
            );
            stats_row.push(LinkStats {
                gamma,
                rician_k,
                alpha_bar,
                beta,
                b_vec,
            });
        }
        links.push(stats_row);
    }

    let mut users = Vec::with_capacity(u_dim);
    for u in 0..u_dim {
        let alpha_bar = DVector::<f64>::from_fn(l_dim, |l, _| links[l][u].alpha_bar);
        let beta = DVector::<f64>::from_fn(l_dim, |l, _| links[l][u].beta);
        let mut t_mat = DMatrix::<Complex64>::zeros(l_dim, l_dim);
        for r in 0..l_dim {
            for c in 0..l_dim {
                let mut v = alpha_bar[r] * alpha_bar[c];
                if r == c {
                    v += beta[r];
                }
                t_mat[(r, c)] = Complex64::new(v, 0.0);
            }
        }
        let mut q_block = DMatrix::<Complex64>::zeros(l_dim, l_dim);
        for l in 0..l_dim {
            q_block[(l, l)] = Complex64::new(beta[l], 0.0);
        }
        let t_factor = psd_factor(&t_mat)
            .map_err(|_| Error::Numeric(format!("Omega factorization failed for user {u}")))?;
        let q_factor = psd_factor(&q_block)
            .map_err(|_| Error::Numeric(format!("Omega factorization failed for user {u}")))?;
        let psi_blocks = (0..u_dim)
            .map(|i| if i == u { q_factor.clone() } else { t_factor.clone() })
            .collect();
        users.push(UserMoments {
            t_mat,
            q_diag: beta,
            psi_blocks,
        });
    }

    Ok(ChannelStats {
        frame_index: frame.frame_index,
        n_antennas: params.n_antennas(),
        links,
        users,
        noise_variance: params.noise_variance_w,
    })
}

/// Draws one instantaneous realization of every effective channel gain:
/// real and imaginary parts independent `Normal(alpha_bar, beta)`.
pub fn sample_instantaneous<R: Rng>(stats: &ChannelStats, rng: &mut R) -> Vec<Vec<Complex64>> {
    stats
        .links
        .iter()
        .map(|row| {
            row.iter()
                .map(|link| {
                    if link.beta == 0.0 {
                        return Complex64::new(link.alpha_bar, link.alpha_bar);
                    }
                    let dist = Normal::new(link.alpha_bar, link.beta.sqrt()).unwrap();
                    Complex64::new(dist.sample(rng), dist.sample(rng))
                })
                .collect()
        })
        .collect()
}
