//! Linear-quadratic mean-reversion game on a 1-D grid.
//!
//! `x_{n+1} = x_n + (K(m_n - x_n) + a_n)Δ + σ(ρ ξ_n + √(1-ρ²) ε_n)√Δ`, rounded
//! to the nearest grid point and clamped at the edges. The grid spacing is
//! `σ√Δ`, so one noise atom moves a player by one cell.
//!
//! The terminal reward differs from the running one; it is selected through
//! the noise symbol: symbols `0..alphabet` are running steps with atom `j`,
//! symbols `alphabet + j` are the terminal step.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distribution::push_forward;
use crate::error::{Error, Result};
use crate::model::{
    Dynamics, FiniteMFG, Kernel, MeanFieldDynamics, Mode, NoiseTree, PolicyFlow, Reward, Symbol,
};

/// Largest scenario tree built for exact common-noise evaluation.
pub const TREE_NODE_LIMIT: usize = 100_000;

/// Idiosyncratic noise atoms, in grid steps.
const ATOMS: [i32; 7] = [-3, -2, -1, 0, 1, 2, 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LqParams {
    pub num_states: usize,
    pub horizon: usize,
    /// Actions are `-M..=M`.
    pub max_action: usize,
    pub dt: f64,
    /// Mean-reversion gain `K`.
    pub drift: f64,
    pub q: f64,
    pub kappa: f64,
    pub c_term: f64,
    pub sigma: f64,
    /// Weight of the common noise in the total noise.
    pub rho: f64,
    /// Number of common-noise values; 1 means no common noise.
    pub alphabet: usize,
    /// Centres of the two initial bumps, as fractions of the grid.
    pub init_centers: [f64; 2],
    /// Standard deviation of each bump, in grid steps.
    pub init_std: f64,
}

impl Default for LqParams {
    fn default() -> Self {
        Self {
            num_states: 100,
            horizon: 30,
            max_action: 37,
            dt: 0.1,
            drift: 1.0,
            q: 0.01,
            kappa: 0.5,
            c_term: 1.0,
            sigma: 3.0,
            rho: 0.0,
            alphabet: 1,
            init_centers: [0.25, 0.75],
            init_std: 6.0,
        }
    }
}

impl LqParams {
    /// Desk-scale common-noise configuration: binary ξ, ρ = 0.5, N = 8.
    pub fn common_noise() -> Self {
        Self {
            horizon: 8,
            rho: 0.5,
            alphabet: 2,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.num_states < 3 {
            return bad(format!("LQ needs at least 3 states, got {}", self.num_states));
        }
        if !(self.dt > 0.0) {
            return bad(format!("time step {} must be positive", self.dt));
        }
        if !(self.sigma >= 0.0) {
            return bad(format!("sigma {} must be non-negative", self.sigma));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho {} is outside [0, 1]", self.rho));
        }
        if self.alphabet == 0 {
            return bad("noise alphabet must have at least one value".into());
        }
        if !(self.kappa - self.q * self.q > 0.0) {
            return bad(format!(
                "kappa - q² = {} must be positive",
                self.kappa - self.q * self.q
            ));
        }
        Ok(())
    }

    pub fn num_actions(&self) -> usize {
        2 * self.max_action + 1
    }

    /// Grid spacing `σ√Δ` (one when σ = 0).
    pub fn spacing(&self) -> f64 {
        let h = self.sigma * self.dt.sqrt();
        if h > 0.0 {
            h
        } else {
            1.0
        }
    }

    pub fn position(&self, i: usize) -> f64 {
        (i as f64 - (self.num_states - 1) as f64 / 2.0) * self.spacing()
    }

    pub fn action_value(&self, a: usize) -> f64 {
        a as f64 - self.max_action as f64
    }

    pub fn mean(&self, mu: &[f64]) -> f64 {
        mu.iter().enumerate().map(|(i, m)| m * self.position(i)).sum()
    }

    /// Common-noise atoms and their probabilities.
    pub fn noise_alphabet(&self) -> Vec<(f64, f64)> {
        match self.alphabet {
            1 => vec![(0.0, 1.0)],
            2 => vec![(-1.0, 0.5), (1.0, 0.5)],
            k => normal_atoms(k),
        }
    }

    fn terminal_time(&self) -> f64 {
        self.horizon as f64 * self.dt
    }
}

/// `k` equally spaced atoms on `[-3, 3]` weighted by the normal density.
fn normal_atoms(k: usize) -> Vec<(f64, f64)> {
    let pts: Vec<f64> = (0..k)
        .map(|i| -3.0 + 6.0 * i as f64 / (k - 1) as f64)
        .collect();
    let w: Vec<f64> = pts.iter().map(|z| (-0.5 * z * z).exp()).collect();
    let s: f64 = w.iter().sum();
    pts.into_iter().zip(w).map(|(z, w)| (z, w / s)).collect()
}

#[derive(Debug)]
struct LqDynamics {
    p: LqParams,
    atoms: Vec<(f64, f64)>,
    idio: Vec<f64>,
}

impl LqDynamics {
    fn new(p: LqParams) -> Self {
        let w: Vec<f64> = ATOMS.iter().map(|&k| (-0.5 * (k * k) as f64).exp()).collect();
        let s: f64 = w.iter().sum();
        Self {
            atoms: p.noise_alphabet(),
            idio: w.into_iter().map(|w| w / s).collect(),
            p,
        }
    }

    fn atom(&self, symbol: Symbol) -> (f64, bool) {
        let k = self.atoms.len();
        let s = symbol as usize;
        if s < k {
            (self.atoms[s].0, false)
        } else {
            (self.atoms[(s - k).min(k - 1)].0, true)
        }
    }
}

impl MeanFieldDynamics for LqDynamics {
    fn kernel(&self, symbol: Symbol, mu: &[f64]) -> Kernel {
        let p = &self.p;
        let (xi, _) = self.atom(symbol);
        let m = p.mean(mu);
        let h = p.spacing();
        let centre = (p.num_states - 1) as f64 / 2.0;
        let last = (p.num_states - 1) as f64;
        let idio_scale = (1.0 - p.rho * p.rho).sqrt();
        let sigma_on = p.sigma > 0.0;
        Kernel::from_fn(p.num_states, p.num_actions(), |x, a, row| {
            let pos = p.position(x);
            let det = pos + (p.drift * (m - pos) + p.action_value(a)) * p.dt;
            if !sigma_on {
                let i = (det / h + centre).round().clamp(0.0, last);
                row.push((i as usize, 1.0));
                return;
            }
            for (&k, &w) in ATOMS.iter().zip(&self.idio) {
                let y = det + h * (p.rho * xi + idio_scale * k as f64);
                let i = (y / h + centre).round().clamp(0.0, last);
                row.push((i as usize, w));
            }
        })
    }
}

#[derive(Debug)]
struct LqReward {
    p: LqParams,
    alphabet: usize,
}

impl Reward for LqReward {
    fn fill(&self, symbol: Symbol, mu: &[f64], out: &mut [f64]) {
        let p = &self.p;
        let m = p.mean(mu);
        let na = p.num_actions();
        let terminal = symbol as usize >= self.alphabet;
        for x in 0..p.num_states {
            let d = m - p.position(x);
            for a in 0..na {
                out[x * na + a] = if terminal {
                    -0.5 * p.c_term * d * d
                } else {
                    let v = p.action_value(a);
                    (-0.5 * v * v + p.q * v * d - 0.5 * p.kappa * d * d) * p.dt
                };
            }
        }
    }
}

fn initial_distribution(p: &LqParams) -> Vec<f64> {
    let last = (p.num_states - 1) as f64;
    let mut mu: Vec<f64> = (0..p.num_states)
        .map(|i| {
            p.init_centers
                .iter()
                .map(|c| {
                    let z = (i as f64 - c * last) / p.init_std;
                    (-0.5 * z * z).exp()
                })
                .sum()
        })
        .collect();
    let s: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|m| *m /= s);
    mu
}

fn build(name: &str, p: &LqParams, tree: NoiseTree) -> FiniteMFG {
    FiniteMFG::new(
        name,
        p.num_states,
        p.num_actions(),
        Mode::Finite { horizon: p.horizon },
        initial_distribution(p),
        Some(tree),
        Dynamics::MeanField(Arc::new(LqDynamics::new(p.clone()))),
        Arc::new(LqReward {
            p: p.clone(),
            alphabet: p.noise_alphabet().len(),
        }),
    )
}

/// LQ game without common noise (the alphabet is forced to one value).
pub fn build_lq(params: &LqParams) -> Result<FiniteMFG> {
    let p = LqParams {
        alphabet: 1,
        ..params.clone()
    };
    p.check()?;
    let n = p.horizon;
    let tree = NoiseTree::degenerate_with_symbols(n + 1, |d| if d == n { 1 } else { 0 });
    Ok(build("lq", &p, tree))
}

/// LQ game with the full product tree over the common-noise alphabet.
pub fn build_lq_cn(params: &LqParams) -> Result<FiniteMFG> {
    params.check()?;
    let p = params.clone();
    let atoms = p.noise_alphabet();
    let k = atoms.len() as Symbol;
    let n = p.horizon;
    let tree = NoiseTree::build(n + 1, TREE_NODE_LIMIT, |path| {
        let offset = if path.len() == n { k } else { 0 };
        atoms
            .iter()
            .enumerate()
            .map(|(j, &(_, w))| (j as Symbol + offset, w))
            .collect()
    })?;
    Ok(build("lq_cn", &p, tree))
}

/// Closed-form solution `η_t` of `η̇ = 2(K+q)η + η² - (κ-q²)`, `η_T = c_term`.
pub fn lq_riccati_eta(t: f64, params: &LqParams) -> Result<f64> {
    let (k, q, kappa, c) = (params.drift, params.q, params.kappa, params.c_term);
    let gap = kappa - q * q;
    if !(gap > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa - q² = {gap} must be positive"
        )));
    }
    let big_t = params.terminal_time();
    if t > big_t + 1e-12 {
        return Err(Error::InvalidParameter(format!("t = {t} exceeds T = {big_t}")));
    }
    let r = (k + q).powi(2) + gap;
    let (dp, dm) = (-(k + q) + r.sqrt(), -(k + q) - r.sqrt());
    let e = ((dp - dm) * (big_t - t)).exp();
    let num = -gap * (e - 1.0) - c * (dp * e - dm);
    let den = (dm * e - dp) - c * (e - 1.0);
    Ok(num / den)
}

/// `η` at the grid times `nΔ`, by RK4 backward from `T` with `substeps`
/// steps per `Δ`.
pub fn riccati_ode(params: &LqParams, substeps: usize) -> Result<Vec<(f64, f64)>> {
    params.check()?;
    if substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be ≥ 1".into()));
    }
    let (k, q) = (params.drift, params.q);
    let gap = params.kappa - q * q;
    // dη/ds with s = T - t.
    let f = |eta: f64| -(2.0 * (k + q) * eta + eta * eta - gap);
    let n = params.horizon;
    let h = params.dt / substeps as f64;
    let mut out = vec![(0.0, 0.0); n + 1];
    let mut eta = params.c_term;
    out[n] = (params.terminal_time(), eta);
    for step in (0..n).rev() {
        for _ in 0..substeps {
            let k1 = f(eta);
            let k2 = f(eta + 0.5 * h * k1);
            let k3 = f(eta + 0.5 * h * k2);
            let k4 = f(eta + h * k3);
            eta += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out[step] = (step as f64 * params.dt, eta);
    }
    Ok(out)
}

/// Grid projection of the closed-form control `a = (q + η_t)(m_t - x)`.
///
/// The flow is built forward: at each slot the mean is read from the
/// distribution the projected policy itself induces.
pub fn lq_exact_policy(model: &FiniteMFG, params: &LqParams) -> Result<PolicyFlow> {
    let horizon = model.require_finite("LQ exact policy")?;
    if model.num_states() != params.num_states || model.num_actions() != params.num_actions() {
        return Err(Error::ShapeMismatch("LQ parameters do not match the model".into()));
    }
    let (ns, na) = (params.num_states, params.num_actions());
    let tree = model.tree();
    let mut policy = PolicyFlow::uniform(model);
    let mut flow = vec![Vec::new(); model.num_slots()];
    flow[0] = model.mu0().to_vec();
    let m_max = params.max_action as f64;
    for depth in 0..=horizon {
        let gain = params.q + lq_riccati_eta(depth as f64 * params.dt, params)?;
        for node in tree.level(depth) {
            let m = params.mean(&flow[node]);
            let slice = policy.slice_mut(node);
            slice.iter_mut().for_each(|p| *p = 0.0);
            for x in 0..ns {
                let a = (gain * (m - params.position(x))).round().clamp(-m_max, m_max);
                slice[x * na + (a + m_max) as usize] = 1.0;
            }
            if depth == horizon {
                continue;
            }
            for &child in tree.children(node) {
                let kernel = model.kernel(tree.node(child).symbol, &flow[node]);
                let mut next = vec![0.0; ns];
                push_forward(&kernel, policy.slice(node), &flow[node], &mut next);
                flow[child] = next;
            }
        }
    }
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_mfg;

    #[test]
    fn default_configuration_validates() {
        let m = build_lq(&LqParams::default()).unwrap();
        let r = validate_mfg(&m);
        assert!(r.is_valid(), "{r}");
        assert_eq!(m.num_actions(), 75);
    }

    #[test]
    fn no_noise_no_drift_is_identity() {
        let p = LqParams {
            sigma: 0.0,
            drift: 0.0,
            num_states: 9,
            max_action: 2,
            ..LqParams::default()
        };
        let m = build_lq(&p).unwrap();
        let k = m.kernel(0, m.mu0());
        for x in 0..9 {
            let (t, w) = k.row(x, 2);
            assert_eq!((t, w), (&[x as u32][..], &[1.0][..]));
        }
    }

    #[test]
    fn terminal_condition_holds() {
        let p = LqParams::default();
        let eta = lq_riccati_eta(p.terminal_time(), &p).unwrap();
        assert!((eta - p.c_term).abs() < 1e-12);
        assert!((p.q + eta - 1.01).abs() < 1e-12);
    }

    #[test]
    fn non_convex_costs_are_rejected() {
        let p = LqParams {
            kappa: 0.0001,
            q: 0.1,
            ..LqParams::default()
        };
        assert!(lq_riccati_eta(0.0, &p).is_err());
        assert!(build_lq(&p).is_err());
    }

    #[test]
    fn tiny_grid_is_rejected() {
        let p = LqParams {
            num_states: 2,
            ..LqParams::default()
        };
        assert!(matches!(build_lq(&p), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn common_noise_tree_size() {
        let m = build_lq_cn(&LqParams::common_noise()).unwrap();
        assert_eq!(m.tree().level(9).len(), 512);
        assert_eq!(m.tree().num_nodes(), 1023);
        let big = LqParams {
            horizon: 30,
            ..LqParams::common_noise()
        };
        assert!(matches!(build_lq_cn(&big), Err(Error::TreeTooLarge { .. })));
    }

    #[test]
    fn zero_deviation_picks_zero_action() {
        let p = LqParams {
            num_states: 11,
            horizon: 3,
            init_centers: [0.5, 0.5],
            init_std: 1.0,
            ..LqParams::default()
        };
        let m = build_lq(&p).unwrap();
        let pol = lq_exact_policy(&m, &p).unwrap();
        // symmetric μ0 puts the mean on the middle cell
        assert_eq!(pol.action_of(0, 5), Some(p.max_action));
    }
}
