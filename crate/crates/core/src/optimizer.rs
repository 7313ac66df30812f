//! Joint cooperative beamforming and implicit user scheduling.
//!
//! Frame 1 is a single-loop reweighted-l2 procedure over exact second-order
//! cone subproblems. Later frames add the segmented QoS structure and run a
//! double loop: an outer reweighting loop and an inner fractional-programming
//! (FP) loop whose subproblems mix second-order and exponential cones.
//!
//! All programs are built in normalized units: beamformers are scaled by
//! `1/sqrt(P_rad)` and effective gains by `sqrt(P_rad)/sigma`, which keeps
//! every constraint row O(1) regardless of the physical link budget.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::ChannelStats;
use crate::conic::{ComplexBlock, ConeProgram, LinExpr, SolveStatus};
use crate::metrics::{
    effective_gains, frame_power, segmented_rate, BeamformerSet, PowerReport, ScheduleMask,
};
use crate::{Error, Result};

const TOL_FEAS: f64 = 1e-8;
const TOL_GAP: f64 = 1e-8;
const SOLVER_MAX_ITER: usize = 200;

/// Algorithm knobs plus the per-frame problem constants.
#[derive(Debug, Clone)]
pub struct AlgoConfig {
    /// Reweighting floor in `z = 1/(omega^2 + epsilon)`.
    pub epsilon_reweight: f64,
    /// Initial cardinality-penalty coefficient and its growth schedule.
    pub mu0: f64,
    pub rho: f64,
    pub mu_max: f64,
    /// Relative beam-power threshold for schedule extraction.
    pub delta_threshold: f64,
    /// Relative-change stopping threshold on total power.
    pub rel_tol: f64,
    pub outer_max: usize,
    pub inner_max: usize,
    /// Per-satellite served-user cap.
    pub u_max: usize,
    /// Per-satellite radiated power budget, watts.
    pub p_rad: f64,
    /// Per-link handover cost, watts.
    pub p_ho: f64,
    /// Handover subframe fraction.
    pub tau_ho: f64,
    /// Per-user minimum segmented rate, bps/Hz.
    pub rate_min: Vec<f64>,
}

impl AlgoConfig {
    pub fn new(u_max: usize, p_rad: f64, p_ho: f64, tau_ho: f64, rate_min: Vec<f64>) -> Self {
        Self {
            epsilon_reweight: 1e-6,
            mu0: 1.0,
            rho: 3.0,
            mu_max: 1e6,
            delta_threshold: 1e-5,
            rel_tol: 1e-3,
            outer_max: 15,
            inner_max: 20,
            u_max,
            p_rad,
            p_ho,
            tau_ho,
            rate_min,
        }
    }

    /// Single-segment SINR target `2^(rate_min / (1 - tau_ho)) - 1`.
    pub fn eta(&self, u: usize) -> f64 {
        (self.rate_min[u] / (1.0 - self.tau_ho)).exp2() - 1.0
    }

    pub fn validate(&self, n_users: usize) -> Result<()> {
        if !(self.tau_ho > 0.0 && self.tau_ho < 1.0) {
            return Err(Error::Parameter("tau_ho must lie in (0, 1)".into()));
        }
        if self.rho <= 1.0 {
            return Err(Error::Parameter("rho must exceed 1".into()));
        }
        if self.outer_max < 1 || self.inner_max < 1 {
            return Err(Error::Parameter("iteration caps must be >= 1".into()));
        }
        if self.rate_min.len() != n_users {
            return Err(Error::Parameter(format!(
                "rate_min has {} entries for {} users",
                self.rate_min.len(),
                n_users
            )));
        }
        if self.p_rad <= 0.0 || self.p_ho < 0.0 || self.u_max == 0 {
            return Err(Error::Parameter("invalid power/cardinality constants".into()));
        }
        Ok(())
    }
}

/// Fixed-point variables of the FP inner loop.
#[derive(Debug, Clone)]
pub struct FPAux {
    pub lambda_tilde: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// One subproblem solve in the iteration trace.
#[derive(Debug, Clone)]
pub struct IterRecord {
    pub outer: usize,
    pub inner: usize,
    pub status: SolveStatus,
    pub objective: f64,
    pub mu: f64,
    /// Count of power weights above 1e-3.
    pub active_weights: usize,
    pub max_violation: f64,
}

/// Output of one frame solve.
#[derive(Debug, Clone)]
pub struct FrameSolution {
    pub w: BeamformerSet,
    pub mask: ScheduleMask,
    pub power: PowerReport,
    /// Segmented rates of the returned (thresholded) beamformers.
    pub rates: Vec<f64>,
    pub feasible: bool,
    /// True when a numerical failure forced falling back to an earlier iterate.
    pub degraded: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub trace: Vec<IterRecord>,
}

/// How one `(satellite, user)` beam enters a program.
#[derive(Debug, Clone)]
pub(crate) enum BeamVar {
    /// Free complex vector (normalized by `sqrt(P_rad)`).
    Full(ComplexBlock),
    /// Nonnegative amplitude along a fixed unit-norm direction.
    Scalar { var: usize, dir: DVector<Complex64> },
    /// Identically zero (link excluded by a fixed schedule).
    Zero,
}

impl BeamVar {
    /// Affine rows of `sum_i c_i w_i` in normalized beam units.
    fn combo(&self, c: &DVector<Complex64>) -> (LinExpr, LinExpr) {
        match self {
            BeamVar::Full(block) => block.linear_combo(c),
            BeamVar::Scalar { var, dir } => {
                let m: Complex64 = c.iter().zip(dir.iter()).map(|(ci, di)| ci * di).sum();
                (LinExpr::term(*var, m.re), LinExpr::term(*var, m.im))
            }
            BeamVar::Zero => (LinExpr::new(), LinExpr::new()),
        }
    }

    /// Rows whose squared sum equals the normalized beam power.
    fn power_rows(&self) -> Vec<LinExpr> {
        match self {
            BeamVar::Full(block) => (0..2 * block.dim)
                .map(|i| LinExpr::var(block.start + i))
                .collect(),
            BeamVar::Scalar { var, .. } => vec![LinExpr::var(*var)],
            BeamVar::Zero => Vec::new(),
        }
    }

    fn value(&self, x: &[f64]) -> Option<DVector<Complex64>> {
        match self {
            BeamVar::Full(block) => Some(block.value(x)),
            BeamVar::Scalar { var, dir } => Some(dir * Complex64::new(x[*var], 0.0)),
            BeamVar::Zero => None,
        }
    }
}

/// Requested variable kind per beam when assembling a program.
#[derive(Debug, Clone)]
pub(crate) enum BeamKind {
    Full,
    Scalar(DVector<Complex64>),
    Zero,
}

/// Shared scaffolding for the per-frame conic subproblems.
pub(crate) struct ProgramBuilder<'a> {
    stats: &'a ChannelStats,
    cfg: &'a AlgoConfig,
    pub prog: ConeProgram,
    pub beams: Vec<Vec<BeamVar>>,
    /// Effective-gain scale `sqrt(P_rad)/sigma`.
    g_scale: f64,
}

impl<'a> ProgramBuilder<'a> {
    pub fn new(stats: &'a ChannelStats, cfg: &'a AlgoConfig, kinds: &[Vec<BeamKind>]) -> Self {
        let mut prog = ConeProgram::new();
        let n = stats.n_antennas;
        let beams = kinds
            .iter()
            .map(|row| {
                row.iter()
                    .map(|k| match k {
                        BeamKind::Full => BeamVar::Full(prog.add_complex_block(n)),
                        BeamKind::Scalar(dir) => {
                            let var = prog.add_vars(1);
                            prog.set_lower(var, 0.0);
                            BeamVar::Scalar {
                                var,
                                dir: dir.clone(),
                            }
                        }
                        BeamKind::Zero => BeamVar::Zero,
                    })
                    .collect()
            })
            .collect();
        let g_scale = cfg.p_rad.sqrt() / stats.noise_variance.sqrt();
        Self {
            stats,
            cfg,
            prog,
            beams,
            g_scale,
        }
    }

    /// Gain expressions toward user `u`: `ghat[l][i] = g_{l,u,i} / sigma`.
    pub fn gain_exprs(&self, u: usize) -> Vec<Vec<(LinExpr, LinExpr)>> {
        let (l_dim, u_dim) = (self.stats.n_sats(), self.stats.n_users());
        (0..l_dim)
            .map(|l| {
                let c = self.stats.links[l][u]
                    .b_vec
                    .map(|e| e * self.g_scale);
                (0..u_dim).map(|i| self.beams[l][i].combo(&c)).collect()
            })
            .collect()
    }

    /// Per-beam power epigraphs `q >= ||w||^2` (normalized) and the
    /// per-satellite budget `sum_u q <= 1`.
    pub fn add_power_epigraphs(&mut self) -> Vec<Vec<usize>> {
        let (l_dim, u_dim) = (self.stats.n_sats(), self.stats.n_users());
        let mut q = vec![vec![usize::MAX; u_dim]; l_dim];
        for l in 0..l_dim {
            let mut budget = LinExpr::constant(-1.0);
            for u in 0..u_dim {
                let var = self.prog.add_vars(1);
                self.prog.set_lower(var, 0.0);
                let rows = self.beams[l][u].power_rows();
                if rows.is_empty() {
                    self.prog.set_upper(var, 0.0);
                } else {
                    self.prog.add_squared_norm_le(rows, LinExpr::var(var));
                }
                budget.push(var, 1.0);
                q[l][u] = var;
            }
            self.prog.add_linear_le(budget);
        }
        q
    }

    /// Power weights, their squares, the relaxed cardinality constraint with
    /// slacks, and the penalty term. `ho_coef[l][u]` is the objective
    /// coefficient placed on `omega^2` (the handover surrogate).
    pub fn add_cardinality_relaxation(
        &mut self,
        z: &[Vec<f64>],
        mu: f64,
        ho_coef: &[Vec<f64>],
    ) -> Vec<Vec<usize>> {
        let (l_dim, u_dim) = (self.stats.n_sats(), self.stats.n_users());
        let mut omega = vec![vec![usize::MAX; u_dim]; l_dim];
        for l in 0..l_dim {
            let mut card = LinExpr::constant(-(self.cfg.u_max as f64));
            for u in 0..u_dim {
                let om = self.prog.add_vars(1);
                self.prog.set_lower(om, 0.0);
                self.prog.set_upper(om, 1.0);
                let sq = self.prog.add_vars(1);
                self.prog.set_lower(sq, 0.0);
                self.prog
                    .add_squared_norm_le(vec![LinExpr::var(om)], LinExpr::var(sq));
                // ||w|| <= omega (normalized units)
                let rows = self.beams[l][u].power_rows();
                if !rows.is_empty() {
                    self.prog.add_soc(rows, LinExpr::var(om));
                } else {
                    self.prog.set_upper(om, 0.0);
                }
                card.push(sq, z[l][u]);
                self.prog.add_objective(sq, ho_coef[l][u]);
                omega[l][u] = om;
            }
            let zeta = self.prog.add_vars(1);
            self.prog.set_lower(zeta, 0.0);
            card.push(zeta, -1.0);
            self.prog.add_linear_le(card);
            self.prog.add_objective(zeta, mu);
        }
        omega
    }

    /// Exact SOC QoS for user `u` at single-segment SINR target `eta`:
    /// `||(Psi ghat, 1)|| <= (1/sqrt(eta)) Re{sum alpha_bar ghat_uu}` with the
    /// imaginary part pinned to zero.
    pub fn add_qos_exact(&mut self, u: usize, ghat: &[Vec<(LinExpr, LinExpr)>], eta: f64) {
        let (a_re, a_im) = self.signal_exprs(u, ghat);
        self.prog.add_eq(a_im);
        let mut rows = self.psi_rows(u, ghat);
        rows.push(LinExpr::constant(1.0));
        self.prog.add_soc(rows, a_re.scaled(1.0 / eta.sqrt()));
    }

    /// FP-linearized QoS segment for user `u`: with `lh` the noise-scaled FP
    /// variable, `lh^2 ||Psi ghat||^2 <= 2 lh A - lh^2 - t + 1` together with
    /// the rate epigraph `t >= 2^gamma`.
    pub fn add_qos_fp(
        &mut self,
        u: usize,
        ghat: &[Vec<(LinExpr, LinExpr)>],
        lambda_hat: f64,
        gamma: usize,
        t: usize,
    ) {
        let (a_re, a_im) = self.signal_exprs(u, ghat);
        if !(a_im.terms.is_empty() && a_im.constant == 0.0) {
            self.prog.add_eq(a_im);
        }
        let rows: Vec<LinExpr> = self
            .psi_rows(u, ghat)
            .into_iter()
            .map(|r| r.scaled(lambda_hat))
            .collect();
        let bound = a_re
            .scaled(2.0 * lambda_hat)
            .plus(&LinExpr::term(t, -1.0))
            .add_const(1.0 - lambda_hat * lambda_hat);
        self.prog.add_squared_norm_le(rows, bound);
        self.prog.add_exp(
            LinExpr::term(gamma, std::f64::consts::LN_2),
            LinExpr::constant(1.0),
            LinExpr::var(t),
        );
    }

    /// `Re` and `Im` expressions of `sum_l alpha_bar_{l,u} ghat_{l,u,u}`.
    pub fn signal_exprs(
        &self,
        u: usize,
        ghat: &[Vec<(LinExpr, LinExpr)>],
    ) -> (LinExpr, LinExpr) {
        let mut re = LinExpr::new();
        let mut im = LinExpr::new();
        for (l, row) in ghat.iter().enumerate() {
            let a = self.stats.links[l][u].alpha_bar;
            if a == 0.0 {
                continue;
            }
            re = re.plus(&row[u].0.clone().scaled(a));
            im = im.plus(&row[u].1.clone().scaled(a));
        }
        (re, im)
    }

    /// Real rows of `Psi_u ghat_u` (2 rows per complex entry).
    fn psi_rows(&self, u: usize, ghat: &[Vec<(LinExpr, LinExpr)>]) -> Vec<LinExpr> {
        let (l_dim, u_dim) = (self.stats.n_sats(), self.stats.n_users());
        let mut rows = Vec::with_capacity(2 * l_dim * u_dim);
        for i in 0..u_dim {
            let blk = &self.stats.users[u].psi_blocks[i];
            for r in 0..l_dim {
                let mut re = LinExpr::new();
                let mut im = LinExpr::new();
                for c in 0..l_dim {
                    let m = blk[(r, c)];
                    if m.norm_sqr() == 0.0 {
                        continue;
                    }
                    let (g_re, g_im) = &ghat[c][i];
                    re = re
                        .plus(&g_re.clone().scaled(m.re))
                        .plus(&g_im.clone().scaled(-m.im));
                    im = im
                        .plus(&g_re.clone().scaled(m.im))
                        .plus(&g_im.clone().scaled(m.re));
                }
                rows.push(re);
                rows.push(im);
            }
        }
        rows
    }

    /// Reads physical beamformers out of a solution vector.
    pub fn beamformers(&self, x: &[f64], frame_index: usize) -> BeamformerSet {
        let scale = Complex64::new(self.cfg.p_rad.sqrt(), 0.0);
        let mut w = BeamformerSet::zeros(
            frame_index,
            self.stats.n_sats(),
            self.stats.n_users(),
            self.stats.n_antennas,
        );
        for (l, row) in self.beams.iter().enumerate() {
            for (u, beam) in row.iter().enumerate() {
                if let Some(v) = beam.value(x) {
                    w.w[l][u] = v * scale;
                }
            }
        }
        w
    }
}

/// Assembled subproblem plus the handles needed to read its solution.
pub struct FrameProgram<'a> {
    builder: ProgramBuilder<'a>,
    omega: Vec<Vec<usize>>,
    obj_scale: f64,
}

impl<'a> FrameProgram<'a> {
    pub fn program(&self) -> &ConeProgram {
        &self.builder.prog
    }

    pub fn solve(&self) -> Result<crate::conic::SolveResult> {
        let mut res = self.builder.prog.solve(TOL_FEAS, TOL_GAP, SOLVER_MAX_ITER)?;
        res.objective_value *= self.obj_scale;
        Ok(res)
    }

    pub fn beamformers(&self, x: &[f64], frame_index: usize) -> BeamformerSet {
        self.builder.beamformers(x, frame_index)
    }

    pub fn omegas(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.omega
            .iter()
            .map(|row| row.iter().map(|&i| x[i]).collect())
            .collect()
    }
}

fn all_full(l: usize, u: usize) -> Vec<Vec<BeamKind>> {
    vec![vec![BeamKind::Full; u]; l]
}

fn mask_kinds(delta: &[Vec<bool>]) -> Vec<Vec<BeamKind>> {
    delta
        .iter()
        .map(|row| {
            row.iter()
                .map(|&on| if on { BeamKind::Full } else { BeamKind::Zero })
                .collect()
        })
        .collect()
}

/// First-frame subproblem: exact SOC QoS, reweighted cardinality surrogate,
/// handover surrogate `z omega^2 P_HO` on every link (no previous schedule).
pub fn build_frame1_program<'a>(
    stats: &'a ChannelStats,
    z: &[Vec<f64>],
    mu: f64,
    cfg: &'a AlgoConfig,
) -> Result<FrameProgram<'a>> {
    let (l_dim, u_dim) = (stats.n_sats(), stats.n_users());
    cfg.validate(u_dim)?;
    if z.len() != l_dim || z.iter().any(|r| r.len() != u_dim) {
        return Err(Error::Build("reweighting matrix dimension mismatch".into()));
    }
    let kinds = all_full(l_dim, u_dim);
    let mut b = ProgramBuilder::new(stats, cfg, &kinds);

    let q = b.add_power_epigraphs();
    for l in 0..l_dim {
        for u in 0..u_dim {
            b.prog
                .add_objective(q[l][u], (1.0 - cfg.tau_ho) * cfg.p_rad);
        }
    }
    let ho_coef: Vec<Vec<f64>> = z
        .iter()
        .map(|row| row.iter().map(|&zi| zi * cfg.p_ho).collect())
        .collect();
    let omega = b.add_cardinality_relaxation(z, mu, &ho_coef);

    for u in 0..u_dim {
        let ghat = b.gain_exprs(u);
        b.add_qos_exact(u, &ghat, cfg.eta(u));
    }
    let obj_scale = b.prog.normalize_objective();
    Ok(FrameProgram {
        builder: b,
        omega,
        obj_scale,
    })
}

/// Subsequent-frame subproblem for fixed FP variables: segmented QoS via
/// rate-split variables with exponential-cone epigraphs, handover surrogate
/// only on links absent from the previous schedule.
pub fn build_framek_program<'a>(
    stats: &'a ChannelStats,
    prev_delta: &[Vec<bool>],
    z: &[Vec<f64>],
    fp: &FPAux,
    mu: f64,
    cfg: &'a AlgoConfig,
) -> Result<FrameProgram<'a>> {
    let (l_dim, u_dim) = (stats.n_sats(), stats.n_users());
    cfg.validate(u_dim)?;
    if prev_delta.len() != l_dim || prev_delta.iter().any(|r| r.len() != u_dim) {
        return Err(Error::Build("previous schedule dimension mismatch".into()));
    }
    if z.len() != l_dim || fp.lambda.len() != u_dim || fp.lambda_tilde.len() != u_dim {
        return Err(Error::Build("auxiliary state dimension mismatch".into()));
    }
    let sigma = stats.noise_variance.sqrt();
    let kinds = all_full(l_dim, u_dim);
    let mut b = ProgramBuilder::new(stats, cfg, &kinds);

    let q = b.add_power_epigraphs();
    for l in 0..l_dim {
        for u in 0..u_dim {
            let prev = if prev_delta[l][u] { 1.0 } else { 0.0 };
            let coef = (cfg.tau_ho * prev + (1.0 - cfg.tau_ho)) * cfg.p_rad;
            b.prog.add_objective(q[l][u], coef);
        }
    }
    let ho_coef: Vec<Vec<f64>> = z
        .iter()
        .enumerate()
        .map(|(l, row)| {
            row.iter()
                .enumerate()
                .map(|(u, &zi)| if prev_delta[l][u] { 0.0 } else { zi * cfg.p_ho })
                .collect()
        })
        .collect();
    let omega = b.add_cardinality_relaxation(z, mu, &ho_coef);

    for u in 0..u_dim {
        let ghat = b.gain_exprs(u);
        let ghat_tilde: Vec<Vec<(LinExpr, LinExpr)>> = ghat
            .iter()
            .enumerate()
            .map(|(l, row)| {
                if prev_delta[l][u] {
                    row.clone()
                } else {
                    vec![(LinExpr::new(), LinExpr::new()); u_dim]
                }
            })
            .collect();

        let gamma_tilde = b.prog.add_vars(1);
        let gamma = b.prog.add_vars(1);
        let t_tilde = b.prog.add_vars(1);
        let t = b.prog.add_vars(1);
        for v in [gamma_tilde, gamma] {
            b.prog.set_lower(v, 0.0);
        }
        for v in [t_tilde, t] {
            b.prog.set_lower(v, 1.0);
        }

        b.add_qos_fp(u, &ghat_tilde, fp.lambda_tilde[u] * sigma, gamma_tilde, t_tilde);
        b.add_qos_fp(u, &ghat, fp.lambda[u] * sigma, gamma, t);

        // tau * gamma_tilde + (1 - tau) * gamma >= rate_min
        let mix = LinExpr::term(gamma_tilde, -cfg.tau_ho)
            .plus(&LinExpr::term(gamma, -(1.0 - cfg.tau_ho)))
            .add_const(cfg.rate_min[u]);
        b.prog.add_linear_le(mix);
    }
    let obj_scale = b.prog.normalize_objective();
    Ok(FrameProgram {
        builder: b,
        omega,
        obj_scale,
    })
}

/// Power minimization over fixed first-frame beam variables: exact SOC QoS,
/// no cardinality surrogate (handover cost is a constant once the schedule is
/// fixed).
pub(crate) fn build_fixed_frame1_program<'a>(
    stats: &'a ChannelStats,
    kinds: &[Vec<BeamKind>],
    cfg: &'a AlgoConfig,
) -> Result<FrameProgram<'a>> {
    let (l_dim, u_dim) = (stats.n_sats(), stats.n_users());
    cfg.validate(u_dim)?;
    if kinds.len() != l_dim || kinds.iter().any(|r| r.len() != u_dim) {
        return Err(Error::Build("schedule dimension mismatch".into()));
    }
    let mut b = ProgramBuilder::new(stats, cfg, kinds);
    let q = b.add_power_epigraphs();
    for l in 0..l_dim {
        for u in 0..u_dim {
            b.prog
                .add_objective(q[l][u], (1.0 - cfg.tau_ho) * cfg.p_rad);
        }
    }
    for u in 0..u_dim {
        let ghat = b.gain_exprs(u);
        b.add_qos_exact(u, &ghat, cfg.eta(u));
    }
    let obj_scale = b.prog.normalize_objective();
    Ok(FrameProgram {
        builder: b,
        omega: Vec::new(),
        obj_scale,
    })
}

/// Power minimization over fixed subsequent-frame beam variables at fixed FP
/// variables: segmented QoS, beams only on scheduled links.
pub(crate) fn build_fixed_framek_program<'a>(
    stats: &'a ChannelStats,
    kinds: &[Vec<BeamKind>],
    prev_delta: &[Vec<bool>],
    fp: &FPAux,
    cfg: &'a AlgoConfig,
) -> Result<FrameProgram<'a>> {
    let (l_dim, u_dim) = (stats.n_sats(), stats.n_users());
    cfg.validate(u_dim)?;
    if kinds.len() != l_dim
        || kinds.iter().any(|r| r.len() != u_dim)
        || prev_delta.len() != l_dim
        || prev_delta.iter().any(|r| r.len() != u_dim)
    {
        return Err(Error::Build("schedule dimension mismatch".into()));
    }
    let sigma = stats.noise_variance.sqrt();
    let mut b = ProgramBuilder::new(stats, cfg, kinds);
    let q = b.add_power_epigraphs();
    for l in 0..l_dim {
        for u in 0..u_dim {
            let prev = if prev_delta[l][u] { 1.0 } else { 0.0 };
            let coef = (cfg.tau_ho * prev + (1.0 - cfg.tau_ho)) * cfg.p_rad;
            b.prog.add_objective(q[l][u], coef);
        }
    }
    for u in 0..u_dim {
        let ghat = b.gain_exprs(u);
        let ghat_tilde: Vec<Vec<(LinExpr, LinExpr)>> = ghat
            .iter()
            .enumerate()
            .map(|(l, row)| {
                if prev_delta[l][u] {
                    row.clone()
                } else {
                    vec![(LinExpr::new(), LinExpr::new()); u_dim]
                }
            })
            .collect();
        let gamma_tilde = b.prog.add_vars(1);
        let gamma = b.prog.add_vars(1);
        let t_tilde = b.prog.add_vars(1);
        let t = b.prog.add_vars(1);
        for v in [gamma_tilde, gamma] {
            b.prog.set_lower(v, 0.0);
        }
        for v in [t_tilde, t] {
            b.prog.set_lower(v, 1.0);
        }
        b.add_qos_fp(u, &ghat_tilde, fp.lambda_tilde[u] * sigma, gamma_tilde, t_tilde);
        b.add_qos_fp(u, &ghat, fp.lambda[u] * sigma, gamma, t);
        let mix = LinExpr::term(gamma_tilde, -cfg.tau_ho)
            .plus(&LinExpr::term(gamma, -(1.0 - cfg.tau_ho)))
            .add_const(cfg.rate_min[u]);
        b.prog.add_linear_le(mix);
    }
    let obj_scale = b.prog.normalize_objective();
    Ok(FrameProgram {
        builder: b,
        omega: Vec::new(),
        obj_scale,
    })
}

/// Quadratic form `g^H Omega_u g` over the stacked gains of user `u`.
fn omega_quad(g: &[Vec<Vec<Complex64>>], stats: &ChannelStats, u: usize) -> f64 {
    let (l_dim, u_dim) = (stats.n_sats(), stats.n_users());
    let mut acc: f64 = (0..l_dim)
        .map(|l| stats.users[u].q_diag[l] * g[l][u][u].norm_sqr())
        .sum();
    for i in 0..u_dim {
        if i == u {
            continue;
        }
        for r in 0..l_dim {
            for c in 0..l_dim {
                acc += (g[r][u][i].conj() * stats.users[u].t_mat[(r, c)] * g[c][u][i]).re;
            }
        }
    }
    acc
}

fn signal_magnitude(g: &[Vec<Vec<Complex64>>], stats: &ChannelStats, u: usize) -> f64 {
    g.iter()
        .enumerate()
        .map(|(l, row)| row[u][u] * stats.links[l][u].alpha_bar)
        .sum::<Complex64>()
        .norm()
}

/// FP variable update at fixed beamformers: `lambda = A / B` with `A` the
/// coherent signal magnitude and `B` the full interference-plus-noise
/// quadratic; the handover-segment copy uses gains gated by `prev_delta`.
pub fn update_fp_aux(
    w: &BeamformerSet,
    stats: &ChannelStats,
    prev_delta: &[Vec<bool>],
) -> FPAux {
    let g = effective_gains(w, stats);
    let mut g_tilde = g.clone();
    for (l, row) in g_tilde.iter_mut().enumerate() {
        for (u, streams) in row.iter_mut().enumerate() {
            if !prev_delta[l][u] {
                streams.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            }
        }
    }
    let u_dim = stats.n_users();
    let lambda = (0..u_dim)
        .map(|u| signal_magnitude(&g, stats, u) / (omega_quad(&g, stats, u) + stats.noise_variance))
        .collect();
    let lambda_tilde = (0..u_dim)
        .map(|u| {
            signal_magnitude(&g_tilde, stats, u)
                / (omega_quad(&g_tilde, stats, u) + stats.noise_variance)
        })
        .collect();
    FPAux {
        lambda_tilde,
        lambda,
    }
}

/// Thresholds beam powers into a schedule, zeroing sub-threshold beams in
/// place. When thresholding leaves more than `u_max` users on a satellite,
/// only the `u_max` strongest beams are kept; a user that loses every
/// above-threshold link to the cap is reattached to its strongest satellite
/// with spare capacity so a pinned re-solve can restore its rate.
pub fn extract_schedule(w: &mut BeamformerSet, cfg: &AlgoConfig) -> Vec<Vec<bool>> {
    let threshold = cfg.delta_threshold * cfg.p_rad;
    let (l_dim, u_dim) = (w.n_sats(), w.n_users());
    let p: Vec<Vec<f64>> = (0..l_dim)
        .map(|l| (0..u_dim).map(|u| w.w[l][u].norm_squared()).collect())
        .collect();
    let mut delta = vec![vec![false; u_dim]; l_dim];
    let mut load = vec![0usize; l_dim];
    for l in 0..l_dim {
        let mut active: Vec<(usize, f64)> = (0..u_dim)
            .filter_map(|u| (p[l][u] > threshold).then_some((u, p[l][u])))
            .collect();
        if active.len() > cfg.u_max {
            active.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            active.truncate(cfg.u_max);
        }
        for &(u, _) in &active {
            delta[l][u] = true;
        }
        load[l] = active.len();
    }
    for u in 0..u_dim {
        let had_power = (0..l_dim).any(|l| p[l][u] > threshold);
        if !had_power || (0..l_dim).any(|l| delta[l][u]) {
            continue;
        }
        let mut spare: Vec<(usize, f64)> = (0..l_dim)
            .filter(|&l| load[l] < cfg.u_max)
            .map(|l| (l, p[l][u]))
            .collect();
        spare.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        if let Some(&(l, _)) = spare.first() {
            delta[l][u] = true;
            load[l] += 1;
        }
    }
    for l in 0..l_dim {
        for u in 0..u_dim {
            if !delta[l][u] {
                w.w[l][u].iter_mut().for_each(|e| *e = Complex64::new(0.0, 0.0));
            }
        }
    }
    delta
}

/// MRT warm start: a greedy strongest-link schedule with matched-filter beams
/// scaled to the single-segment SINR target ignoring interference, clipped to
/// the per-satellite budget.
fn mrt_initialization(stats: &ChannelStats, cfg: &AlgoConfig) -> BeamformerSet {
    let (l_dim, u_dim) = (stats.n_sats(), stats.n_users());
    let mut w = BeamformerSet::zeros(stats.frame_index, l_dim, u_dim, stats.n_antennas);
    let mut capacity = vec![cfg.u_max; l_dim];
    let mut sat_power = vec![0.0f64; l_dim];
    let mut order: Vec<usize> = (0..u_dim).collect();
    let best_gamma = |u: usize| {
        (0..l_dim)
            .map(|l| stats.links[l][u].gamma)
            .fold(0.0, f64::max)
    };
    order.sort_by(|&a, &b| best_gamma(b).partial_cmp(&best_gamma(a)).unwrap().then(a.cmp(&b)));
    for u in order {
        let mut sats: Vec<usize> = (0..l_dim)
            .filter(|&l| capacity[l] > 0 && stats.links[l][u].gamma > 0.0)
            .collect();
        sats.sort_by(|&a, &b| {
            stats.links[b][u]
                .gamma
                .partial_cmp(&stats.links[a][u].gamma)
                .unwrap()
                .then(a.cmp(&b))
        });
        let Some(&l) = sats.first() else { continue };
        let link = &stats.links[l][u];
        let b_norm_sq = link.b_vec.norm_squared();
        if b_norm_sq == 0.0 || link.alpha_bar == 0.0 {
            continue;
        }
        let p = (cfg.eta(u) * stats.noise_variance / (link.alpha_bar * link.alpha_bar * b_norm_sq))
            .min(cfg.p_rad - sat_power[l]);
        if p <= 0.0 {
            continue;
        }
        w.w[l][u] =
            link.b_vec.map(|e| e.conj()) * Complex64::new((p / b_norm_sq).sqrt(), 0.0);
        capacity[l] -= 1;
        sat_power[l] += p;
    }
    w
}

fn reweight(omega: &[Vec<f64>], eps: f64) -> Vec<Vec<f64>> {
    omega
        .iter()
        .map(|row| row.iter().map(|&o| 1.0 / (o * o + eps)).collect())
        .collect()
}


fn count_active(omega: &[Vec<f64>]) -> usize {
    omega
        .iter()
        .flat_map(|r| r.iter())
        .filter(|&&o| o > 1e-3)
        .count()
}

fn all_false(l: usize, u: usize) -> Vec<Vec<bool>> {
    vec![vec![false; u]; l]
}

/// Thresholded total power of the current iterate (the convergence metric).
fn iterate_power(w: &BeamformerSet, prev_delta: &[Vec<bool>], cfg: &AlgoConfig) -> f64 {
    let mut w_thr = w.clone();
    let delta = extract_schedule(&mut w_thr, cfg);
    let mask = ScheduleMask {
        delta,
        prev_delta: prev_delta.to_vec(),
    };
    frame_power(&w_thr, &mask, cfg.tau_ho, cfg.p_ho).total
}

/// Re-solves the power minimization with the schedule pinned, removing the
/// rate shortfall introduced by thresholding away sub-threshold beams. First
/// frames need a single exact solve; later frames run the FP loop from the
/// supplied beams. Returns `None` when the pinned schedule is infeasible.
fn polish_beams(
    w0: &BeamformerSet,
    kinds: &[Vec<BeamKind>],
    prev_delta: &[Vec<bool>],
    stats: &ChannelStats,
    cfg: &AlgoConfig,
) -> Result<Option<BeamformerSet>> {
    let first_frame = prev_delta.iter().all(|r| r.iter().all(|&b| !b));
    if first_frame {
        let prog = build_fixed_frame1_program(stats, kinds, cfg)?;
        let res = prog.solve()?;
        if matches!(res.status, SolveStatus::Optimal | SolveStatus::MaxIterations) {
            return Ok(Some(prog.beamformers(&res.x, stats.frame_index)));
        }
        return Ok(None);
    }
    let mut w = w0.clone();
    let mut fp = update_fp_aux(&w, stats, prev_delta);
    let mut best = None;
    let mut prev_obj = f64::INFINITY;
    for _ in 0..cfg.inner_max {
        let prog = build_fixed_framek_program(stats, kinds, prev_delta, &fp, cfg)?;
        let res = prog.solve()?;
        if !matches!(res.status, SolveStatus::Optimal | SolveStatus::MaxIterations) {
            break;
        }
        w = prog.beamformers(&res.x, stats.frame_index);
        fp = update_fp_aux(&w, stats, prev_delta);
        best = Some(w.clone());
        if prev_obj.is_finite()
            && (prev_obj - res.objective_value).abs() <= cfg.rel_tol * prev_obj.abs().max(1e-12)
        {
            break;
        }
        prev_obj = res.objective_value;
    }
    Ok(best)
}

fn finalize(
    mut w: BeamformerSet,
    prev_delta: Vec<Vec<bool>>,
    stats: &ChannelStats,
    cfg: &AlgoConfig,
    feasible_hint: bool,
    degraded: bool,
    outer_iterations: usize,
    inner_iterations: usize,
    trace: Vec<IterRecord>,
    polish: bool,
) -> FrameSolution {
    let delta = extract_schedule(&mut w, cfg);
    if polish && feasible_hint {
        if let Ok(Some(pw)) = polish_beams(&w, &mask_kinds(&delta), &prev_delta, stats, cfg) {
            w = pw;
        }
    }
    // project tiny solver-tolerance overshoots back onto the power budget
    for l in 0..w.n_sats() {
        let p = w.satellite_power(l);
        if p > cfg.p_rad && p <= cfg.p_rad * (1.0 + 1e-4) {
            let s = Complex64::new((cfg.p_rad / p).sqrt(), 0.0);
            for beam in w.w[l].iter_mut() {
                *beam *= s;
            }
        }
    }
    let mask = ScheduleMask { delta, prev_delta };
    let rates = segmented_rate(&w, stats, &mask, cfg.tau_ho);
    let power = frame_power(&w, &mask, cfg.tau_ho, cfg.p_ho);
    let qos_ok = rates
        .iter()
        .zip(&cfg.rate_min)
        .all(|(r, t)| *r >= t - 1e-6);
    let feasible = feasible_hint
        && qos_ok
        && mask.max_users_per_satellite() <= cfg.u_max
        && w.max_satellite_power() <= cfg.p_rad * (1.0 + 1e-8);
    FrameSolution {
        w,
        mask,
        power,
        rates,
        feasible,
        degraded,
        outer_iterations,
        inner_iterations,
        trace,
    }
}

/// Finalizes the cheapest iterate whose extracted schedule survives the
/// full post-processing (thresholding, cardinality cap, polish, QoS audit).
///
/// The penalty coefficient keeps growing across iterations, so later
/// iterates can be sparser but costlier than needed, while early iterates
/// can be cheap yet lose coverage once the cap truncates their support.
/// Candidates are tried in ascending realized-power order (distinct
/// schedules only, capped to bound the extra polish solves); if none
/// finalizes feasibly, the last iterate is kept as before.
#[allow(clippy::too_many_arguments)]
fn finalize_cheapest(
    mut candidates: Vec<(f64, BeamformerSet)>,
    last: BeamformerSet,
    prev_delta: Vec<Vec<bool>>,
    stats: &ChannelStats,
    cfg: &AlgoConfig,
    degraded: bool,
    outer_iterations: usize,
    inner_iterations: usize,
    trace: Vec<IterRecord>,
) -> FrameSolution {
    const MAX_POLISH_ATTEMPTS: usize = 4;
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut seen: Vec<Vec<Vec<bool>>> = Vec::new();
    for (_, cand) in candidates {
        if seen.len() >= MAX_POLISH_ATTEMPTS {
            break;
        }
        let mut thresholded = cand.clone();
        let delta = extract_schedule(&mut thresholded, cfg);
        if seen.contains(&delta) {
            continue;
        }
        seen.push(delta);
        let sol = finalize(
            cand,
            prev_delta.clone(),
            stats,
            cfg,
            true,
            degraded,
            outer_iterations,
            inner_iterations,
            trace.clone(),
            true,
        );
        if sol.feasible {
            return sol;
        }
    }
    finalize(
        last,
        prev_delta,
        stats,
        cfg,
        true,
        degraded,
        outer_iterations,
        inner_iterations,
        trace,
        true,
    )
}

/// First-frame solve: reweighted-l2 loop over exact SOC subproblems.
pub fn solve_frame1(stats: &ChannelStats, cfg: &AlgoConfig) -> Result<FrameSolution> {
    let (l_dim, u_dim) = (stats.n_sats(), stats.n_users());
    cfg.validate(u_dim)?;
    let prev = all_false(l_dim, u_dim);

    let mut w = mrt_initialization(stats, cfg);
    // Uniform reweighting start: seeding z from a warm-start support biases
    // the relaxation against every other link and strands users on few
    // satellites. All-equal weights let the first solve spread the load.
    let mut omega = vec![vec![0.0; u_dim]; l_dim];
    let mut z = reweight(&omega, cfg.epsilon_reweight);
    let mut mu = cfg.mu0;
    let mut trace = Vec::new();
    let mut prev_power = f64::INFINITY;
    let mut candidates: Vec<(f64, BeamformerSet)> = Vec::new();
    let mut solved_any = false;
    let mut degraded = false;
    let mut outer = 0;

    for it in 0..cfg.outer_max {
        let prog = build_frame1_program(stats, &z, mu, cfg)?;
        let res = prog.solve()?;
        let usable = matches!(res.status, SolveStatus::Optimal | SolveStatus::MaxIterations);
        if !usable {
            if !solved_any {
                return Ok(finalize(
                    BeamformerSet::zeros(stats.frame_index, l_dim, u_dim, stats.n_antennas),
                    prev,
                    stats,
                    cfg,
                    false,
                    false,
                    it + 1,
                    0,
                    trace,
                    false,
                ));
            }
            degraded = true;
            break;
        }
        w = prog.beamformers(&res.x, stats.frame_index);
        omega = prog.omegas(&res.x);
        solved_any = true;
        outer = it + 1;
        let power = iterate_power(&w, &prev, cfg);
        candidates.push((power, w.clone()));
        trace.push(IterRecord {
            outer: it,
            inner: 0,
            status: res.status,
            objective: res.objective_value,
            mu,
            active_weights: count_active(&omega),
            max_violation: prog.program().check_feasibility(&res.x).max_violation(),
        });
        z = reweight(&omega, cfg.epsilon_reweight);
        mu = (cfg.rho * mu).min(cfg.mu_max);
        if prev_power.is_finite()
            && (prev_power - power).abs() <= cfg.rel_tol * prev_power.abs().max(1e-12)
        {
            break;
        }
        prev_power = power;
    }
    Ok(finalize_cheapest(
        candidates, w, prev, stats, cfg, degraded, outer, 0, trace,
    ))
}

/// Subsequent-frame solve: outer reweighting loop around an inner FP loop.
pub fn solve_framek(
    stats: &ChannelStats,
    prev_delta: &[Vec<bool>],
    cfg: &AlgoConfig,
) -> Result<FrameSolution> {
    let (l_dim, u_dim) = (stats.n_sats(), stats.n_users());
    cfg.validate(u_dim)?;
    if prev_delta.len() != l_dim || prev_delta.iter().any(|r| r.len() != u_dim) {
        return Err(Error::Build("previous schedule dimension mismatch".into()));
    }

    let mut w = mrt_initialization(stats, cfg);
    // Uniform reweighting start; see the note in `solve_frame1`.
    let mut omega = vec![vec![0.0; u_dim]; l_dim];
    let mut z = reweight(&omega, cfg.epsilon_reweight);
    let mut mu = cfg.mu0;
    let mut trace = Vec::new();
    let mut solved_any = false;
    let mut degraded = false;
    let mut outer = 0;
    let mut total_inner = 0;
    let mut prev_outer_power = f64::INFINITY;
    let mut candidates: Vec<(f64, BeamformerSet)> = Vec::new();

    // Bootstrap the FP loop from a QoS-feasible point: the matched-filter
    // start can leave users without power (lambda = 0 pins their rate split
    // to zero and the linearized subproblem becomes infeasible). An exact
    // single-segment solve guarantees every user clears the surrogate. If the
    // single-segment target is out of reach, retry at the full-frame target,
    // which maintained links can still meet.
    'bootstrap: for shrink in [1.0, 1.0 - cfg.tau_ho] {
        let mut boot_cfg = cfg.clone();
        boot_cfg.rate_min = cfg.rate_min.iter().map(|r| r * shrink).collect();
        let prog = build_frame1_program(stats, &z, mu, &boot_cfg)?;
        let res = prog.solve()?;
        if matches!(res.status, SolveStatus::Optimal | SolveStatus::MaxIterations) {
            w = prog.beamformers(&res.x, stats.frame_index);
            omega = prog.omegas(&res.x);
            z = reweight(&omega, cfg.epsilon_reweight);
            break 'bootstrap;
        }
    }

    'outer: for ot in 0..cfg.outer_max {
        let mut fp = update_fp_aux(&w, stats, prev_delta);
        let mut prev_inner_power = f64::INFINITY;
        let mut power = f64::INFINITY;
        for it in 0..cfg.inner_max {
            let prog = build_framek_program(stats, prev_delta, &z, &fp, mu, cfg)?;
            let res = prog.solve()?;
            let usable =
                matches!(res.status, SolveStatus::Optimal | SolveStatus::MaxIterations);
            if !usable {
                if !solved_any {
                    return Ok(finalize(
                        BeamformerSet::zeros(stats.frame_index, l_dim, u_dim, stats.n_antennas),
                        prev_delta.to_vec(),
                        stats,
                        cfg,
                        false,
                        false,
                        ot + 1,
                        total_inner,
                        trace,
                        false,
                    ));
                }
                degraded = true;
                break 'outer;
            }
            w = prog.beamformers(&res.x, stats.frame_index);
            omega = prog.omegas(&res.x);
            fp = update_fp_aux(&w, stats, prev_delta);
            solved_any = true;
            total_inner += 1;
            power = iterate_power(&w, prev_delta, cfg);
            candidates.push((power, w.clone()));
            trace.push(IterRecord {
                outer: ot,
                inner: it,
                status: res.status,
                objective: res.objective_value,
                mu,
                active_weights: count_active(&omega),
                max_violation: prog.program().check_feasibility(&res.x).max_violation(),
            });
            if prev_inner_power.is_finite()
                && (prev_inner_power - power).abs()
                    <= cfg.rel_tol * prev_inner_power.abs().max(1e-12)
            {
                break;
            }
            prev_inner_power = power;
        }
        outer = ot + 1;
        z = reweight(&omega, cfg.epsilon_reweight);
        mu = (cfg.rho * mu).min(cfg.mu_max);
        if prev_outer_power.is_finite()
            && (prev_outer_power - power).abs()
                <= cfg.rel_tol * prev_outer_power.abs().max(1e-12)
        {
            break;
        }
        prev_outer_power = power;
    }
    let sol = finalize_cheapest(
        candidates,
        w,
        prev_delta.to_vec(),
        stats,
        cfg,
        degraded,
        outer,
        total_inner,
        trace,
    );
    if sol.feasible {
        return Ok(sol);
    }
    // Recovery: when no iterate finalizes feasibly (e.g. the relaxation loses
    // its sparsification signal at an extreme handover price), fall back to a
    // hand-built schedule. Stage one gives each user its strongest surviving
    // previous link (maintained, free of handover charges) or its strongest
    // satellite with spare capacity. The lean single-link schedule is tried
    // first; if the link budget demands cooperative combining, a second
    // attempt fills every satellite to the cardinality cap with its strongest
    // remaining users.
    for fill in [false, true] {
        let mut delta = vec![vec![false; u_dim]; l_dim];
        let mut load = vec![0usize; l_dim];
        for u in 0..u_dim {
            let pick = |kept_only: bool, load: &[usize]| {
                (0..l_dim)
                    .filter(|&l| load[l] < cfg.u_max && (!kept_only || prev_delta[l][u]))
                    .max_by(|&a, &b| {
                        stats.links[a][u]
                            .gamma
                            .partial_cmp(&stats.links[b][u].gamma)
                            .unwrap()
                            .then(b.cmp(&a))
                    })
            };
            if let Some(l) = pick(true, &load).or_else(|| pick(false, &load)) {
                delta[l][u] = true;
                load[l] += 1;
            }
        }
        if !(0..u_dim).all(|u| (0..l_dim).any(|l| delta[l][u])) {
            continue;
        }
        if fill {
            // Give the least-covered user its strongest remaining satellite
            // until every slot is used, so cooperative combining is spread
            // evenly instead of piling onto the users with the best links.
            let mut cover: Vec<usize> = (0..u_dim)
                .map(|u| (0..l_dim).filter(|&l| delta[l][u]).count())
                .collect();
            loop {
                let next = (0..u_dim)
                    .filter_map(|u| {
                        (0..l_dim)
                            .filter(|&l| !delta[l][u] && load[l] < cfg.u_max)
                            .max_by(|&a, &b| {
                                stats.links[a][u]
                                    .gamma
                                    .partial_cmp(&stats.links[b][u].gamma)
                                    .unwrap()
                                    .then(b.cmp(&a))
                            })
                            .map(|l| (u, l))
                    })
                    .min_by_key(|&(u, _)| (cover[u], u));
                let Some((u, l)) = next else { break };
                delta[l][u] = true;
                load[l] += 1;
                cover[u] += 1;
            }
        }
        if let Ok(kept) = solve_fixed_schedule(stats, &delta, prev_delta, cfg) {
            if kept.feasible {
                return Ok(FrameSolution {
                    degraded: true,
                    outer_iterations: sol.outer_iterations,
                    inner_iterations: sol.inner_iterations,
                    trace: sol.trace,
                    ..kept
                });
            }
        }
    }
    Ok(sol)
}

/// Minimum-power beamforming for an externally fixed schedule: a single exact
/// solve on first frames, an exact bootstrap followed by the FP loop on later
/// frames. Used by the scheduling baselines and to evaluate a given mask.
pub fn solve_fixed_schedule(
    stats: &ChannelStats,
    delta: &[Vec<bool>],
    prev_delta: &[Vec<bool>],
    cfg: &AlgoConfig,
) -> Result<FrameSolution> {
    if delta.len() != stats.n_sats() || delta.iter().any(|r| r.len() != stats.n_users()) {
        return Err(Error::Build("schedule dimension mismatch".into()));
    }
    solve_fixed_kinds(stats, &mask_kinds(delta), prev_delta, cfg)
}

/// Minimum-power beamforming with each beam's variable kind fixed up front
/// (full vector, nonnegative amplitude along a fixed direction, or zero).
pub(crate) fn solve_fixed_kinds(
    stats: &ChannelStats,
    kinds: &[Vec<BeamKind>],
    prev_delta: &[Vec<bool>],
    cfg: &AlgoConfig,
) -> Result<FrameSolution> {
    let (l_dim, u_dim) = (stats.n_sats(), stats.n_users());
    cfg.validate(u_dim)?;
    if kinds.len() != l_dim
        || kinds.iter().any(|r| r.len() != u_dim)
        || prev_delta.len() != l_dim
        || prev_delta.iter().any(|r| r.len() != u_dim)
    {
        return Err(Error::Build("schedule dimension mismatch".into()));
    }
    let first_frame = prev_delta.iter().all(|r| r.iter().all(|&b| !b));
    let infeasible = |solves: usize| {
        finalize(
            BeamformerSet::zeros(stats.frame_index, l_dim, u_dim, stats.n_antennas),
            prev_delta.to_vec(),
            stats,
            cfg,
            false,
            false,
            solves,
            0,
            Vec::new(),
            false,
        )
    };
    // exact bootstrap at the single-segment target, then at the relaxed
    // full-frame target that maintained links can still meet
    let mut w = None;
    for shrink in [1.0, 1.0 - cfg.tau_ho] {
        let mut boot_cfg = cfg.clone();
        boot_cfg.rate_min = cfg.rate_min.iter().map(|r| r * shrink).collect();
        let prog = build_fixed_frame1_program(stats, kinds, &boot_cfg)?;
        let res = prog.solve()?;
        if matches!(res.status, SolveStatus::Optimal | SolveStatus::MaxIterations) {
            w = Some(prog.beamformers(&res.x, stats.frame_index));
            break;
        }
        if first_frame {
            // the relaxed target has no exact counterpart on a first frame
            break;
        }
    }
    let Some(w) = w else {
        return Ok(infeasible(1));
    };
    if first_frame {
        return Ok(finalize(
            w,
            prev_delta.to_vec(),
            stats,
            cfg,
            true,
            false,
            1,
            0,
            Vec::new(),
            false,
        ));
    }
    match polish_beams(&w, kinds, prev_delta, stats, cfg)? {
        Some(pw) => Ok(finalize(
            pw,
            prev_delta.to_vec(),
            stats,
            cfg,
            true,
            false,
            1,
            cfg.inner_max,
            Vec::new(),
            false,
        )),
        None => Ok(infeasible(1)),
    }
}
