//! Two-walker Hamiltonians and the interaction regimes.

use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{single_walker_hamiltonian, Graph, HoppingProfile};
use crate::hilbert::kron;
use crate::linalg::{identity, matmul, real, CMat};

/// Interaction strength presets.
pub const WEAK: f64 = 0.1;
pub const MEDIUM: f64 = 1.0;
pub const STRONG: f64 = 10.0;

/// Default conditional hopping weight of the FIFH regime.
pub const DEFAULT_FIXED_HOPPING: f64 = 0.1;

/// Look up a named strength preset (`weak`, `medium`, `strong`).
pub fn strength_preset(name: &str) -> Option<f64> {
    match name.to_ascii_lowercase().as_str() {
        "weak" => Some(WEAK),
        "medium" => Some(MEDIUM),
        "strong" => Some(STRONG),
        _ => None,
    }
}

/// Parameters of the total Hamiltonian. Walker A carries `t` and `ε_i`,
/// walker B carries `s` and `ω_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub t: f64,
    pub s: f64,
    pub onsite_a: Vec<f64>,
    pub onsite_b: Vec<f64>,
}

impl InteractionParams {
    /// Unit hopping and on-site potential 2 on every vertex.
    pub fn new(n: usize, alphas: [f64; 4]) -> Self {
        Self {
            alpha1: alphas[0],
            alpha2: alphas[1],
            alpha3: alphas[2],
            alpha4: alphas[3],
            t: 1.0,
            s: 1.0,
            onsite_a: vec![2.0; n],
            onsite_b: vec![2.0; n],
        }
    }

    pub fn for_regime(n: usize, regime: &Regime) -> Self {
        Self::new(n, regime_alphas(regime))
    }

    pub fn alphas(&self) -> [f64; 4] {
        [self.alpha1, self.alpha2, self.alpha3, self.alpha4]
    }

    fn validate(&self, g: &Graph) -> Result<()> {
        let n = g.n_vertices();
        if self.onsite_a.len() != n || self.onsite_b.len() != n {
            return Err(Error::Shape(format!(
                "on-site lists have lengths {} and {}, graph has {n} vertices",
                self.onsite_a.len(),
                self.onsite_b.len()
            )));
        }
        let scalars = self.alphas().into_iter().chain([self.t, self.s]);
        if scalars.chain(self.onsite_a.iter().chain(&self.onsite_b).copied()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("Hamiltonian parameters must be finite".into()));
        }
        Ok(())
    }

    fn walker_hamiltonians(&self, g: &Graph) -> Result<(CMat, CMat)> {
        self.validate(g)?;
        let ha = single_walker_hamiltonian(g, &HoppingProfile::new(self.t, self.onsite_a.clone())?)?;
        let hb = single_walker_hamiltonian(g, &HoppingProfile::new(self.s, self.onsite_b.clone())?)?;
        Ok((ha, hb))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeKind {
    /// Full interaction, all four weights equal.
    #[serde(rename = "FI")]
    Fi,
    /// On-site (Hubbard-like) term only.
    #[serde(rename = "HI")]
    Hi,
    /// On-site plus correlated hopping.
    #[serde(rename = "CHI")]
    Chi,
    /// Full interaction with fixed conditional hopping.
    #[serde(rename = "FIFH")]
    Fifh,
    #[serde(rename = "NONE")]
    None,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 5] =
        [RegimeKind::Fi, RegimeKind::Hi, RegimeKind::Chi, RegimeKind::Fifh, RegimeKind::None];

    pub fn name(self) -> &'static str {
        match self {
            RegimeKind::Fi => "FI",
            RegimeKind::Hi => "HI",
            RegimeKind::Chi => "CHI",
            RegimeKind::Fifh => "FIFH",
            RegimeKind::None => "NONE",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            RegimeKind::Fi => "full interaction, all alphas equal",
            RegimeKind::Hi => "Hubbard-like on-site term only",
            RegimeKind::Chi => "on-site plus correlated hopping",
            RegimeKind::Fifh => "full interaction with fixed conditional hopping",
            RegimeKind::None => "no interaction",
        }
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegimeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegimeKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownRegime(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    pub kind: RegimeKind,
    pub strength: f64,
    pub fixed_hopping: f64,
}

impl Regime {
    pub fn new(kind: RegimeKind, strength: f64) -> Result<Self> {
        Self::with_fixed_hopping(kind, strength, DEFAULT_FIXED_HOPPING)
    }

    pub fn with_fixed_hopping(kind: RegimeKind, strength: f64, fixed_hopping: f64) -> Result<Self> {
        if !strength.is_finite() || strength < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "interaction strength must be finite and ≥ 0, got {strength}"
            )));
        }
        if !fixed_hopping.is_finite() {
            return Err(Error::InvalidParameter("fixed hopping must be finite".into()));
        }
        Ok(Self { kind, strength, fixed_hopping })
    }

    pub fn none() -> Self {
        Self { kind: RegimeKind::None, strength: 0.0, fixed_hopping: DEFAULT_FIXED_HOPPING }
    }
}

/// `(α_1, α_2, α_3, α_4)` for a regime.
pub fn regime_alphas(r: &Regime) -> [f64; 4] {
    let g = r.strength;
    match r.kind {
        RegimeKind::Fi => [g, g, g, g],
        RegimeKind::Hi => [g, 0.0, 0.0, 0.0],
        RegimeKind::Chi => [g, 0.0, 0.0, g],
        RegimeKind::Fifh => [g, r.fixed_hopping, r.fixed_hopping, g],
        RegimeKind::None => [0.0; 4],
    }
}

/// Recover the regime from an α vector, if it matches one.
pub fn classify_alphas(a: [f64; 4]) -> Option<RegimeKind> {
    let [a1, a2, a3, a4] = a;
    let zero = |x: f64| x == 0.0;
    if a.iter().all(|&x| zero(x)) {
        Some(RegimeKind::None)
    } else if zero(a1) {
        None
    } else if a.iter().all(|&x| x == a1) {
        Some(RegimeKind::Fi)
    } else if zero(a2) && zero(a3) && zero(a4) {
        Some(RegimeKind::Hi)
    } else if zero(a2) && zero(a3) && !zero(a4) {
        Some(RegimeKind::Chi)
    } else if !zero(a2) && a2 == a3 && a4 == a1 {
        Some(RegimeKind::Fifh)
    } else {
        None
    }
}

/// `H_A ⊗ I_B + I_A ⊗ H_B`
pub fn free_hamiltonian(p: &InteractionParams, g: &Graph) -> Result<CMat> {
    let (ha, hb) = p.walker_hamiltonians(g)?;
    let n = g.n_vertices();
    let id = identity(n);
    Ok(kron(ha.as_ref(), id.as_ref()) + kron(id.as_ref(), hb.as_ref()))
}

/// `H_A ⊗ H_B`
pub fn interaction_hamiltonian(p: &InteractionParams, g: &Graph) -> Result<CMat> {
    let (ha, hb) = p.walker_hamiltonians(g)?;
    Ok(kron(ha.as_ref(), hb.as_ref()))
}

/// `H_A ⊗ H_B` assembled term by term: on-site product, the two conditional
/// hopping sums and the correlated hopping sum.
pub fn interaction_hamiltonian_expanded(p: &InteractionParams, g: &Graph) -> Result<CMat> {
    p.validate(g)?;
    let weights = ExpandedWeights {
        onsite_sum: 0.0,
        onsite_product: 1.0,
        hop_a: |k| -p.t * p.onsite_b[k],
        hop_b: |i| -p.s * p.onsite_a[i],
        correlated: p.t * p.s,
    };
    Ok(assemble(p, g, weights))
}

/// The α-weighted total Hamiltonian on the product space.
pub fn total_hamiltonian(p: &InteractionParams, g: &Graph) -> Result<CMat> {
    p.validate(g)?;
    let weights = ExpandedWeights {
        onsite_sum: 1.0,
        onsite_product: p.alpha1,
        hop_a: |k| -p.t * (1.0 + p.alpha2 * p.onsite_b[k]),
        hop_b: |i| -p.s * (1.0 + p.alpha3 * p.onsite_a[i]),
        correlated: p.alpha4 * p.t * p.s,
    };
    Ok(assemble(p, g, weights))
}

struct ExpandedWeights<FA, FB> {
    onsite_sum: f64,
    onsite_product: f64,
    hop_a: FA,
    hop_b: FB,
    correlated: f64,
}

fn assemble<FA, FB>(p: &InteractionParams, g: &Graph, w: ExpandedWeights<FA, FB>) -> CMat
where
    FA: Fn(usize) -> f64,
    FB: Fn(usize) -> f64,
{
    let n = g.n_vertices();
    let idx = |a: usize, b: usize| a * n + b;
    let mut h = Mat::<c64>::zeros(n * n, n * n);
    for i in 0..n {
        for k in 0..n {
            let (e, o) = (p.onsite_a[i], p.onsite_b[k]);
            h[(idx(i, k), idx(i, k))] += real(w.onsite_sum * (e + o) + w.onsite_product * e * o);
        }
    }
    let edges = g.edges();
    for &(i, j) in &edges {
        for k in 0..n {
            let v = real((w.hop_a)(k));
            h[(idx(i, k), idx(j, k))] += v;
            h[(idx(j, k), idx(i, k))] += v;
        }
    }
    for i in 0..n {
        for &(k, l) in &edges {
            let v = real((w.hop_b)(i));
            h[(idx(i, k), idx(i, l))] += v;
            h[(idx(i, l), idx(i, k))] += v;
        }
    }
    if w.correlated != 0.0 {
        let v = real(w.correlated);
        for &(i, j) in &edges {
            for &(k, l) in &edges {
                h[(idx(i, k), idx(j, l))] += v;
                h[(idx(i, l), idx(j, k))] += v;
                h[(idx(j, l), idx(i, k))] += v;
                h[(idx(j, k), idx(i, l))] += v;
            }
        }
    }
    h
}

/// `P_a H P_a`
pub fn project_antisym(h: MatRef<'_, c64>, p_a: MatRef<'_, c64>) -> Result<CMat> {
    if h.shape() != p_a.shape() || h.nrows() != h.ncols() {
        return Err(Error::Shape(format!(
            "cannot project a {}x{} operator with a {}x{} projector",
            h.nrows(),
            h.ncols(),
            p_a.nrows(),
            p_a.ncols()
        )));
    }
    let ph = matmul(p_a, h);
    Ok(matmul(ph.as_ref(), p_a))
}

/// Largest entry-wise modulus, handy for scale-aware tolerances.
pub fn max_entry(h: MatRef<'_, c64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..h.ncols() {
        for i in 0..h.nrows() {
            worst = worst.max(h[(i, j)].norm());
        }
    }
    worst
}
