//! Finite game models: storage, validation and the built-in fixtures.
//!
//! A model stores the joint kernel `p(z, y | x, u, v)` of next state and next
//! observation. With counting measure on states and the uniform law on
//! observations the density form used in the analysis is `phi = ny * p`, so
//! nothing else needs to be stored.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Tolerance on row sums and on the initial belief.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Rows whose sum is further than this from one are rescaled at construction.
const RENORMALIZE_TOL: f64 = 1e-12;

/// Cardinalities of the state, observation and action sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub states: usize,
    pub observations: usize,
    pub actions_p1: usize,
    pub actions_p2: usize,
}

impl Dims {
    pub const fn new(states: usize, observations: usize, actions_p1: usize, actions_p2: usize) -> Self {
        Dims { states, observations, actions_p1, actions_p2 }
    }

    /// Number of entries in the flattened kernel `[x][u][v][z][y]`.
    pub fn kernel_len(&self) -> usize {
        self.cost_len() * self.slice_len()
    }

    /// Number of entries in the flattened cost `[x][u][v]`.
    pub fn cost_len(&self) -> usize {
        self.states * self.actions_p1 * self.actions_p2
    }

    /// Length of one kernel slice `p(., . | x, u, v)`, laid out `[z][y]`.
    pub fn slice_len(&self) -> usize {
        self.states * self.observations
    }

    #[inline]
    pub fn cost_index(&self, x: usize, u: usize, v: usize) -> usize {
        (x * self.actions_p1 + u) * self.actions_p2 + v
    }

    #[inline]
    pub fn slice_offset(&self, x: usize, u: usize, v: usize) -> usize {
        self.cost_index(x, u, v) * self.slice_len()
    }

    #[inline]
    pub fn kernel_index(&self, x: usize, u: usize, v: usize, z: usize, y: usize) -> usize {
        self.slice_offset(x, u, v) + z * self.observations + y
    }
}

/// Lyapunov drift certificate: `E[V(X')] - V(x) <= -h(x) + drift_c * 1{x in K}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovCert {
    pub v: Vec<f64>,
    pub h: Vec<f64>,
    pub small_set: Vec<usize>,
    pub drift_c: f64,
}

/// Unvalidated model data, as read from a file or assembled by hand.
#[derive(Clone, Debug, PartialEq)]
pub struct RawModel {
    pub name: String,
    pub dims: Dims,
    /// Flattened `[x][u][v][z][y]`.
    pub kernel: Vec<f64>,
    /// Flattened `[x][u][v]`; what player 2 pays player 1.
    pub cost: Vec<f64>,
    pub initial_belief: Vec<f64>,
    pub lyapunov: Option<LyapunovCert>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Which tensor entry or row is at fault.
    pub location: String,
    pub message: String,
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.location, self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub strict_positive: bool,
    pub c_max: f64,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "violations: {}", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {}", v)?;
        }
        writeln!(f, "strict_positive: {}", self.strict_positive)?;
        write!(f, "c_max: {}", self.c_max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    Invalid(ValidationReport),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Invalid(report) => {
                write!(f, "model failed validation with {} violation(s)", report.violations.len())?;
                for v in &report.violations {
                    write!(f, "; {}", v)?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ModelError {}

fn violation(location: String, message: String, magnitude: f64) -> Violation {
    Violation { location, message, magnitude }
}

/// Checks every model invariant and reports each failure with its location.
pub fn validate(raw: &RawModel) -> ValidationReport {
    let d = raw.dims;
    let mut out = Vec::new();

    for (label, n) in [
        ("num_states", d.states),
        ("num_obs", d.observations),
        ("num_actions_p1", d.actions_p1),
        ("num_actions_p2", d.actions_p2),
    ] {
        if n == 0 {
            out.push(violation(label.to_string(), "must be positive".to_string(), 0.0));
        }
    }
    if !out.is_empty() {
        return ValidationReport { violations: out, strict_positive: false, c_max: 0.0 };
    }

    let mut shapes_ok = true;
    for (label, got, want) in [
        ("kernel", raw.kernel.len(), d.kernel_len()),
        ("cost", raw.cost.len(), d.cost_len()),
        ("initial_belief", raw.initial_belief.len(), d.states),
    ] {
        if got != want {
            shapes_ok = false;
            out.push(violation(
                label.to_string(),
                format!("has {} entries, expected {}", got, want),
                got as f64,
            ));
        }
    }

    let mut strict_positive = shapes_ok;
    if shapes_ok {
        for x in 0..d.states {
            for u in 0..d.actions_p1 {
                for v in 0..d.actions_p2 {
                    let off = d.slice_offset(x, u, v);
                    let slice = &raw.kernel[off..off + d.slice_len()];
                    let mut finite = true;
                    for (k, &p) in slice.iter().enumerate() {
                        let (z, y) = (k / d.observations, k % d.observations);
                        if !p.is_finite() {
                            finite = false;
                            out.push(violation(
                                format!("kernel[{}][{}][{}][{}][{}]", x, u, v, z, y),
                                "is not finite".to_string(),
                                p,
                            ));
                        } else if p < 0.0 {
                            out.push(violation(
                                format!("kernel[{}][{}][{}][{}][{}]", x, u, v, z, y),
                                format!("is negative ({})", p),
                                p,
                            ));
                        }
                        if !(p > 0.0) {
                            strict_positive = false;
                        }
                    }
                    if finite {
                        let s: f64 = slice.iter().sum();
                        if (s - 1.0).abs() > STOCHASTIC_TOL {
                            out.push(violation(
                                format!("row (x={},u={},v={})", x, u, v),
                                format!("sums to {}", s),
                                s,
                            ));
                        }
                    }
                }
            }
        }
    }

    let mut c_max = 0.0f64;
    for (i, &c) in raw.cost.iter().enumerate() {
        if c.is_finite() {
            c_max = c_max.max(c.abs());
        } else if shapes_ok {
            let x = i / (d.actions_p1 * d.actions_p2);
            let u = (i / d.actions_p2) % d.actions_p1;
            let v = i % d.actions_p2;
            out.push(violation(format!("cost[{}][{}][{}]", x, u, v), "is not finite".to_string(), c));
        }
    }

    if shapes_ok {
        let mut finite = true;
        for (x, &p) in raw.initial_belief.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                finite &= p.is_finite();
                out.push(violation(
                    format!("initial_belief[{}]", x),
                    format!("is not a probability ({})", p),
                    p,
                ));
            }
        }
        let s: f64 = raw.initial_belief.iter().sum();
        if finite && (s - 1.0).abs() > STOCHASTIC_TOL {
            out.push(violation("initial_belief".to_string(), format!("sums to {}", s), s));
        }
    }

    if let Some(cert) = &raw.lyapunov {
        validate_cert(cert, d.states, &mut out);
    }

    ValidationReport { violations: out, strict_positive, c_max }
}

fn validate_cert(cert: &LyapunovCert, nx: usize, out: &mut Vec<Violation>) {
    if cert.v.len() != nx {
        out.push(violation("lyapunov.V".into(), format!("has {} entries, expected {}", cert.v.len(), nx), 0.0));
    }
    if cert.h.len() != nx {
        out.push(violation("lyapunov.h".into(), format!("has {} entries, expected {}", cert.h.len(), nx), 0.0));
    }
    for (x, &val) in cert.v.iter().enumerate() {
        if !val.is_finite() {
            out.push(violation(format!("lyapunov.V[{}]", x), "is not finite".into(), val));
        }
    }
    for (x, &h) in cert.h.iter().enumerate() {
        if !(h >= 1.0) || !h.is_finite() {
            out.push(violation(format!("lyapunov.h[{}]", x), format!("must be >= 1 ({})", h), h));
        }
    }
    if cert.small_set.is_empty() {
        out.push(violation("lyapunov.K".into(), "must be nonempty".into(), 0.0));
    }
    for &k in &cert.small_set {
        if k >= nx {
            out.push(violation("lyapunov.K".into(), format!("index {} out of range", k), k as f64));
        }
    }
    if !(cert.drift_c >= 0.0) || !cert.drift_c.is_finite() {
        out.push(violation("lyapunov.drift_c".into(), format!("must be nonnegative ({})", cert.drift_c), cert.drift_c));
    }
}

/// A validated finite game. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct GameModel {
    raw: RawModel,
    strict_positive: bool,
    c_max: f64,
    /// `p(z | x, u, v)` laid out `[x][u][v][z]`.
    marginal: Vec<f64>,
}

impl GameModel {
    /// Validates `raw`, then rescales kernel rows and the initial belief so
    /// they sum to one.
    pub fn new(mut raw: RawModel) -> Result<GameModel, ModelError> {
        let report = validate(&raw);
        if !report.is_clean() {
            return Err(ModelError::Invalid(report));
        }
        let d = raw.dims;
        for row in raw.kernel.chunks_mut(d.slice_len()) {
            renormalize(row);
        }
        renormalize(&mut raw.initial_belief);

        let mut marginal = vec![0.0; d.cost_len() * d.states];
        for (i, row) in raw.kernel.chunks(d.slice_len()).enumerate() {
            for z in 0..d.states {
                marginal[i * d.states + z] = row[z * d.observations..(z + 1) * d.observations].iter().sum();
            }
        }

        Ok(GameModel {
            strict_positive: report.strict_positive,
            c_max: report.c_max,
            raw,
            marginal,
        })
    }

    pub fn name(&self) -> &str {
        &self.raw.name
    }

    pub fn dims(&self) -> Dims {
        self.raw.dims
    }

    pub fn num_states(&self) -> usize {
        self.raw.dims.states
    }

    pub fn num_obs(&self) -> usize {
        self.raw.dims.observations
    }

    pub fn num_actions_p1(&self) -> usize {
        self.raw.dims.actions_p1
    }

    pub fn num_actions_p2(&self) -> usize {
        self.raw.dims.actions_p2
    }

    #[inline]
    pub fn kernel(&self, x: usize, u: usize, v: usize, z: usize, y: usize) -> f64 {
        self.raw.kernel[self.raw.dims.kernel_index(x, u, v, z, y)]
    }

    /// `p(., . | x, u, v)` laid out `[z][y]`.
    #[inline]
    pub fn kernel_slice(&self, x: usize, u: usize, v: usize) -> &[f64] {
        let d = self.raw.dims;
        let off = d.slice_offset(x, u, v);
        &self.raw.kernel[off..off + d.slice_len()]
    }

    /// Density against counting measure on states and the uniform law on
    /// observations.
    pub fn phi(&self, x: usize, u: usize, v: usize, z: usize, y: usize) -> f64 {
        self.raw.dims.observations as f64 * self.kernel(x, u, v, z, y)
    }

    /// State marginal `p(. | x, u, v)`.
    #[inline]
    pub fn marginal(&self, x: usize, u: usize, v: usize) -> &[f64] {
        let nx = self.raw.dims.states;
        let off = self.raw.dims.cost_index(x, u, v) * nx;
        &self.marginal[off..off + nx]
    }

    #[inline]
    pub fn cost(&self, x: usize, u: usize, v: usize) -> f64 {
        self.raw.cost[self.raw.dims.cost_index(x, u, v)]
    }

    pub fn initial_belief(&self) -> &[f64] {
        &self.raw.initial_belief
    }

    pub fn lyapunov(&self) -> Option<&LyapunovCert> {
        self.raw.lyapunov.as_ref()
    }

    pub fn strict_positive(&self) -> bool {
        self.strict_positive
    }

    /// `max |c|`.
    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn raw(&self) -> &RawModel {
        &self.raw
    }

    pub fn into_raw(self) -> RawModel {
        self.raw
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.raw)
    }

    /// Same model with a different initial belief.
    pub fn with_initial_belief(&self, belief: Vec<f64>) -> Result<GameModel, ModelError> {
        let mut raw = self.raw.clone();
        raw.initial_belief = belief;
        GameModel::new(raw)
    }

    pub fn with_lyapunov(&self, cert: Option<LyapunovCert>) -> Result<GameModel, ModelError> {
        let mut raw = self.raw.clone();
        raw.lyapunov = cert;
        GameModel::new(raw)
    }
}

fn renormalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > RENORMALIZE_TOL {
        for p in row.iter_mut() {
            *p /= s;
        }
    }
}

/// Builds a raw model whose kernel factors as `trans(x,u,v,z) * obs(z,y)`.
fn factored(
    name: &str,
    dims: Dims,
    trans: impl Fn(usize, usize, usize, usize) -> f64,
    obs: impl Fn(usize, usize) -> f64,
    cost: impl Fn(usize, usize, usize) -> f64,
    initial_belief: Vec<f64>,
) -> RawModel {
    let mut kernel = vec![0.0; dims.kernel_len()];
    let mut costs = vec![0.0; dims.cost_len()];
    for x in 0..dims.states {
        for u in 0..dims.actions_p1 {
            for v in 0..dims.actions_p2 {
                costs[dims.cost_index(x, u, v)] = cost(x, u, v);
                for z in 0..dims.states {
                    for y in 0..dims.observations {
                        kernel[dims.kernel_index(x, u, v, z, y)] = trans(x, u, v, z) * obs(z, y);
                    }
                }
            }
        }
    }
    RawModel { name: name.to_string(), dims, kernel, cost: costs, initial_belief, lyapunov: None }
}

const CANON2_P: [[f64; 2]; 2] = [[0.8, 0.2], [0.3, 0.7]];
const CANON2_Q: [[f64; 2]; 2] = [[0.9, 0.1], [0.2, 0.8]];
const PENNIES: [[f64; 2]; 2] = [[1.0, -1.0], [-1.0, 1.0]];
const SEPARABLE_G: [[f64; 2]; 2] = [[3.0, 1.0], [0.0, 2.0]];

/// Two hidden states, noisy observations, action-independent dynamics and a
/// matching-pennies payoff that ignores the state.
pub fn canon2() -> GameModel {
    let raw = factored(
        "CANON2",
        Dims::new(2, 2, 2, 2),
        |x, _, _, z| CANON2_P[x][z],
        |z, y| CANON2_Q[z][y],
        |_, u, v| PENNIES[u][v],
        vec![0.5, 0.5],
    );
    GameModel::new(raw).expect("CANON2 is valid")
}

/// CANON2 dynamics with the state-independent payoff `[[3,1],[0,2]]`.
pub fn sep2() -> GameModel {
    let raw = factored(
        "SEP2",
        Dims::new(2, 2, 2, 2),
        |x, _, _, z| CANON2_P[x][z],
        |z, y| CANON2_Q[z][y],
        |_, u, v| SEPARABLE_G[u][v],
        vec![0.5, 0.5],
    );
    GameModel::new(raw).expect("SEP2 is valid")
}

const FULLOBS3_P: [[[[f64; 3]; 3]; 2]; 2] = [
    [
        [[0.6, 0.4, 0.0], [0.0, 0.6, 0.4], [0.4, 0.0, 0.6]],
        [[0.2, 0.8, 0.0], [0.0, 0.2, 0.8], [0.8, 0.0, 0.2]],
    ],
    [
        [[0.5, 0.0, 0.5], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]],
        [[0.1, 0.1, 0.8], [0.8, 0.1, 0.1], [0.1, 0.8, 0.1]],
    ],
];
const FULLOBS3_C: [[[f64; 2]; 2]; 3] = [
    [[2.0, -1.0], [-1.0, 1.0]],
    [[0.0, 1.0], [1.0, -2.0]],
    [[1.0, 0.0], [-1.0, 3.0]],
];

/// Three states observed exactly (`y = z`), action-dependent sparse dynamics.
pub fn fullobs3() -> GameModel {
    let raw = factored(
        "FULLOBS3",
        Dims::new(3, 3, 2, 2),
        |x, u, v, z| FULLOBS3_P[u][v][x][z],
        |z, y| if z == y { 1.0 } else { 0.0 },
        |x, u, v| FULLOBS3_C[x][u][v],
        vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    );
    GameModel::new(raw).expect("FULLOBS3 is valid")
}

pub const UNCTRL2_P: [[f64; 2]; 2] = [[0.9, 0.1], [0.4, 0.6]];
const UNCTRL2_Q: [[f64; 2]; 2] = [[0.7, 0.3], [0.2, 0.8]];
pub const UNCTRL2_C: [f64; 2] = [2.0, -1.0];

/// Single action per player: a hidden Markov chain with a state cost.
pub fn unctrl2() -> GameModel {
    let raw = factored(
        "UNCTRL2",
        Dims::new(2, 2, 1, 1),
        |x, _, _, z| UNCTRL2_P[x][z],
        |z, y| UNCTRL2_Q[z][y],
        |x, _, _| UNCTRL2_C[x],
        vec![0.5, 0.5],
    );
    GameModel::new(raw).expect("UNCTRL2 is valid")
}

const PATROL2_P: [[[[f64; 2]; 2]; 2]; 2] = [
    [[[0.9, 0.1], [0.2, 0.8]], [[0.6, 0.4], [0.3, 0.7]]],
    [[[0.5, 0.5], [0.5, 0.5]], [[0.3, 0.7], [0.7, 0.3]]],
];
const PATROL2_Q: [[f64; 2]; 2] = [[0.85, 0.15], [0.25, 0.75]];
const PATROL2_C: [[[f64; 2]; 2]; 2] = [[[3.0, -1.0], [0.0, 1.0]], [[-2.0, 2.0], [1.0, -1.0]]];

/// Strictly positive, action-dependent and state-dependent: the fixture where
/// beliefs actually matter.
pub fn patrol2() -> GameModel {
    let raw = factored(
        "PATROL2",
        Dims::new(2, 2, 2, 2),
        |x, u, v, z| PATROL2_P[u][v][x][z],
        |z, y| PATROL2_Q[z][y],
        |x, u, v| PATROL2_C[x][u][v],
        vec![0.5, 0.5],
    );
    GameModel::new(raw).expect("PATROL2 is valid")
}

/// One state, two equally likely observations, one action each.
pub fn point1() -> GameModel {
    let raw = factored("POINT1", Dims::new(1, 2, 1, 1), |_, _, _, _| 1.0, |_, _| 0.5, |_, _, _| 1.0, vec![1.0]);
    GameModel::new(raw).expect("POINT1 is valid")
}

/// Every built-in fixture.
pub fn canonical_models() -> Vec<GameModel> {
    vec![canon2(), fullobs3(), unctrl2(), sep2(), patrol2(), point1()]
}

/// Looks up a built-in fixture by name (case-insensitive).
pub fn canonical(name: &str) -> Option<GameModel> {
    canonical_models().into_iter().find(|m| m.name().eq_ignore_ascii_case(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_models_are_clean() {
        for m in canonical_models() {
            let report = m.validate();
            assert!(report.is_clean(), "{}: {}", m.name(), report);
        }
    }

    #[test]
    fn positivity_flags() {
        assert!(canon2().strict_positive());
        assert!(!fullobs3().strict_positive());
        assert!(unctrl2().strict_positive());
    }

    #[test]
    fn short_row_is_reported() {
        let mut raw = canon2().into_raw();
        let d = raw.dims;
        raw.kernel[d.kernel_index(0, 0, 0, 0, 0)] -= 0.01;
        let report = validate(&raw);
        assert_eq!(report.violations.len(), 1);
        let text = report.violations[0].to_string();
        assert!(text.starts_with("row (x=0,u=0,v=0) sums to 0.99"), "{}", text);
        assert!((report.violations[0].magnitude - 0.99).abs() < 1e-12);
    }

    #[test]
    fn zero_entry_is_not_a_violation() {
        let mut raw = canon2().into_raw();
        let d = raw.dims;
        let a = d.kernel_index(1, 1, 0, 0, 0);
        let b = d.kernel_index(1, 1, 0, 0, 1);
        raw.kernel[b] += raw.kernel[a];
        raw.kernel[a] = 0.0;
        let report = validate(&raw);
        assert!(report.is_clean());
        assert!(!report.strict_positive);
    }

    #[test]
    fn negative_entry_fails_construction() {
        let mut raw = canon2().into_raw();
        let d = raw.dims;
        raw.kernel[d.kernel_index(0, 0, 0, 0, 0)] = -0.1;
        raw.kernel[d.kernel_index(0, 0, 0, 0, 1)] += 0.82;
        match GameModel::new(raw) {
            Err(ModelError::Invalid(r)) => {
                assert!(r.violations.iter().any(|v| v.location == "kernel[0][0][0][0][0]"));
            }
            other => panic!("expected validation failure, got {:?}", other),
        }
    }

    #[test]
    fn c_max_and_phi() {
        assert_eq!(fullobs3().c_max(), 3.0);
        let m = canon2();
        assert!((m.phi(0, 0, 0, 0, 0) - 2.0 * 0.72).abs() < 1e-15);
        assert!((m.marginal(1, 0, 1)[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn small_drift_is_rescaled() {
        let mut raw = canon2().into_raw();
        for p in raw.kernel[..4].iter_mut() {
            *p *= 1.0 + 1e-10;
        }
        let m = GameModel::new(raw).unwrap();
        let s: f64 = m.kernel_slice(0, 0, 0).iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bad_certificate_is_reported() {
        let cert = LyapunovCert { v: vec![0.0, 0.0], h: vec![0.5, 1.0], small_set: vec![], drift_c: -1.0 };
        let mut raw = canon2().into_raw();
        raw.lyapunov = Some(cert);
        let report = validate(&raw);
        assert_eq!(report.violations.len(), 3);
    }
}
