//! Problem descriptors and the perturbed family.
//!
//! Everything the solver and the estimate machinery consume is described by a
//! closed algebra of descriptors — small data types with a fixed variant set,
//! not arbitrary user code. That keeps every run reproducible from its
//! configuration alone and lets the tail-integral machinery lower temporal
//! amplitudes to exact exponential atoms.
//!
//! A single problem instance couples four descriptors:
//!
//! * viscosity `a` — a continuous function of the nonlocal value, bounded
//!   below by a positive floor `m`;
//! * reaction `f` — an odd-power dissipative nonlinearity, optionally with a
//!   bounded offset, together with *declared* growth/dissipativity constants
//!   (kappa1, alpha1, kappa2, alpha2, p) that [`check_a1`] audits by sampling;
//! * forcing `h(t)` — a sum of separable terms, spatial profile times
//!   temporal amplitude;
//! * weight `g_l` — the profile defining the nonlocal value l(u) = (g_l, u).
//!
//! A [`PerturbedFamily`] maps a perturbation level `eta` from a fixed
//! decreasing schedule to a full problem instance, plus the decay exponent
//! `mu_eta` used by the absorbing estimates, and a candidate exponent
//! `mu_zero` for the limit problem.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D};
use crate::verdict::{ConditionVerdict, EvidenceRow, Verdict};

// ---------------------------------------------------------------------------
// Viscosity
// ---------------------------------------------------------------------------

/// Nonlocal viscosity coefficient a(s). All variants are continuous and
/// bounded below by a positive floor.
#[derive(Debug, Clone, PartialEq)]
pub enum ViscosityDesc {
    /// a(s) = value.
    Constant { value: f64 },
    /// a(s) = floor + amplitude / (1 + ((s - center)/width)^2).
    RationalBump {
        floor: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Piecewise linear through the knots (s_i, a_i), interpolated between
    /// them (never stepped) and extended by constants outside.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl ViscosityDesc {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            ViscosityDesc::Constant { value } => *value,
            ViscosityDesc::RationalBump {
                floor,
                amplitude,
                center,
                width,
            } => {
                let r = (s - center) / width;
                floor + amplitude / (1.0 + r * r)
            }
            ViscosityDesc::PiecewiseLinear { knots } => {
                let first = knots.first().expect("validated: nonempty");
                let last = knots.last().unwrap();
                if s <= first.0 {
                    return first.1;
                }
                if s >= last.0 {
                    return last.1;
                }
                let idx = knots.partition_point(|k| k.0 <= s);
                let (s0, a0) = knots[idx - 1];
                let (s1, a1) = knots[idx];
                let w = (s - s0) / (s1 - s0);
                a0 + w * (a1 - a0)
            }
        }
    }

    /// The lower bound m in force for this descriptor.
    pub fn m_floor(&self) -> f64 {
        match self {
            ViscosityDesc::Constant { value } => *value,
            ViscosityDesc::RationalBump { floor, .. } => *floor,
            ViscosityDesc::PiecewiseLinear { knots } => {
                knots.iter().map(|k| k.1).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Points where the descriptor changes analytic form; the sampling audit
    /// always includes them.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ViscosityDesc::Constant { .. } => Vec::new(),
            ViscosityDesc::RationalBump { center, .. } => vec![*center],
            ViscosityDesc::PiecewiseLinear { knots } => knots.iter().map(|k| k.0).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fin = |v: f64| v.is_finite();
        match self {
            ViscosityDesc::Constant { value } => {
                if !fin(*value) || *value <= 0.0 {
                    return Err(Error::Descriptor(format!(
                        "constant viscosity must be positive, got {value}"
                    )));
                }
            }
            ViscosityDesc::RationalBump {
                floor,
                amplitude,
                center,
                width,
            } => {
                if !fin(*floor) || *floor <= 0.0 {
                    return Err(Error::Descriptor(format!(
                        "viscosity floor must be positive, got {floor}"
                    )));
                }
                if !fin(*amplitude) || *amplitude < 0.0 {
                    return Err(Error::Descriptor(format!(
                        "bump amplitude must be nonnegative, got {amplitude}"
                    )));
                }
                if !fin(*center) || !fin(*width) || *width <= 0.0 {
                    return Err(Error::Descriptor(
                        "bump center/width must be finite with width > 0".into(),
                    ));
                }
            }
            ViscosityDesc::PiecewiseLinear { knots } => {
                if knots.len() < 2 {
                    return Err(Error::Descriptor(
                        "piecewise-linear viscosity needs at least 2 knots".into(),
                    ));
                }
                for w in knots.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::Descriptor(
                            "piecewise-linear knots must be strictly increasing in s".into(),
                        ));
                    }
                }
                for k in knots {
                    if !fin(k.0) || !fin(k.1) || k.1 <= 0.0 {
                        return Err(Error::Descriptor(
                            "piecewise-linear values must be finite and positive".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Reaction
// ---------------------------------------------------------------------------

/// Structural shape of the reaction term.
#[derive(Debug, Clone, PartialEq)]
pub enum ReactionShape {
    /// f(s) = -alpha |s|^{p-2} s.
    OddPower { alpha: f64 },
    /// f(s) = -alpha |s|^{p-2} s + offset (constant bounded part).
    OddPowerPlusBounded { alpha: f64, offset: f64 },
}

/// Declared growth/dissipativity constants:
/// |f(s)| <= kappa1 + alpha1 |s|^{p-1} and f(s) s <= kappa2 - alpha2 |s|^p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthCertificate {
    pub kappa1: f64,
    pub alpha1: f64,
    pub kappa2: f64,
    pub alpha2: f64,
}

/// Reaction descriptor: shape, growth exponent p >= 2 and the declared
/// certificate. The certificate is what the a-priori bounds consume; whether
/// it actually holds is audited by [`check_a1`], not assumed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionDesc {
    pub shape: ReactionShape,
    pub p: f64,
    pub certificate: GrowthCertificate,
}

/// |s|^{p-2} s with fast paths for the common exponents.
fn odd_power(s: f64, p: f64) -> f64 {
    if (p - 2.0).abs() < 1e-12 {
        s
    } else if (p - 4.0).abs() < 1e-12 {
        s * s * s
    } else {
        s.abs().powf(p - 2.0) * s
    }
}

impl ReactionDesc {
    /// Pure odd power with its canonical certificate
    /// (kappa1, alpha1, kappa2, alpha2) = (0, alpha, 0, alpha).
    pub fn odd_power(alpha: f64, p: f64) -> Self {
        ReactionDesc {
            shape: ReactionShape::OddPower { alpha },
            p,
            certificate: GrowthCertificate {
                kappa1: 0.0,
                alpha1: alpha,
                kappa2: 0.0,
                alpha2: alpha,
            },
        }
    }

    pub fn with_certificate(mut self, certificate: GrowthCertificate) -> Self {
        self.certificate = certificate;
        self
    }

    pub fn odd_power_plus_bounded(
        alpha: f64,
        p: f64,
        offset: f64,
        certificate: GrowthCertificate,
    ) -> Self {
        ReactionDesc {
            shape: ReactionShape::OddPowerPlusBounded { alpha, offset },
            p,
            certificate,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match &self.shape {
            ReactionShape::OddPower { alpha } => -alpha * odd_power(s, self.p),
            ReactionShape::OddPowerPlusBounded { alpha, offset } => {
                -alpha * odd_power(s, self.p) + offset
            }
        }
    }

    /// Conjugate exponent q = p / (p - 1).
    pub fn conjugate_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.certificate;
        if !(self.p.is_finite() && self.p >= 2.0) {
            return Err(Error::Descriptor(format!(
                "reaction exponent p must be >= 2, got {}",
                self.p
            )));
        }
        if !(c.alpha1 > 0.0 && c.alpha2 > 0.0) {
            return Err(Error::Descriptor(
                "certificate alpha1, alpha2 must be positive".into(),
            ));
        }
        if !(c.kappa1 >= 0.0 && c.kappa2 >= 0.0) {
            return Err(Error::Descriptor(
                "certificate kappa1, kappa2 must be nonnegative".into(),
            ));
        }
        for v in [c.kappa1, c.alpha1, c.kappa2, c.alpha2] {
            if !v.is_finite() {
                return Err(Error::Descriptor("certificate constants must be finite".into()));
            }
        }
        let structural = match &self.shape {
            ReactionShape::OddPower { alpha } => [*alpha, 0.0],
            ReactionShape::OddPowerPlusBounded { alpha, offset } => [*alpha, *offset],
        };
        if structural.iter().any(|v| !v.is_finite()) {
            return Err(Error::Descriptor("reaction parameters must be finite".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Temporal amplitudes and their exponential-atom lowering
// ---------------------------------------------------------------------------

/// One term of the canonical lowering of a temporal amplitude:
/// coeff * e^{rate * s} on the window [lo, hi] (lo may be -inf, hi +inf).
/// Products of atoms are atoms, which is what makes every tail integral of a
/// descriptor forcing exactly computable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpAtom {
    pub coeff: f64,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ExpAtom {
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.lo || t > self.hi {
            0.0
        } else {
            self.coeff * (self.rate * t).exp()
        }
    }

    /// Pointwise product; `None` when the windows do not overlap.
    pub fn product(&self, other: &ExpAtom) -> Option<ExpAtom> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo >= hi {
            return None;
        }
        Some(ExpAtom {
            coeff: self.coeff * other.coeff,
            rate: self.rate + other.rate,
            lo,
            hi,
        })
    }
}

/// Temporal amplitude phi(t) of one forcing term.
#[derive(Debug, Clone, PartialEq)]
pub enum TemporalAmplitude {
    /// phi(t) = value.
    Constant { value: f64 },
    /// phi(t) = coeff * e^{rate t}.
    Exponential { coeff: f64, rate: f64 },
    /// phi(t) = coeff * indicator of [left, left + width].
    Bump { coeff: f64, left: f64, width: f64 },
    /// phi(t) = factor * inner(t) — the instantiated form of per-eta scaling.
    Scaled {
        factor: f64,
        inner: Box<TemporalAmplitude>,
    },
    /// phi(t) = sum of the parts.
    Sum { terms: Vec<TemporalAmplitude> },
}

impl TemporalAmplitude {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TemporalAmplitude::Constant { value } => *value,
            TemporalAmplitude::Exponential { coeff, rate } => coeff * (rate * t).exp(),
            TemporalAmplitude::Bump { coeff, left, width } => {
                if t >= *left && t <= left + width {
                    *coeff
                } else {
                    0.0
                }
            }
            TemporalAmplitude::Scaled { factor, inner } => factor * inner.eval(t),
            TemporalAmplitude::Sum { terms } => terms.iter().map(|a| a.eval(t)).sum(),
        }
    }

    /// Lower to exponential atoms, multiplying coefficients by `factor`.
    pub fn collect_atoms(&self, factor: f64, out: &mut Vec<ExpAtom>) {
        match self {
            TemporalAmplitude::Constant { value } => out.push(ExpAtom {
                coeff: factor * value,
                rate: 0.0,
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            }),
            TemporalAmplitude::Exponential { coeff, rate } => out.push(ExpAtom {
                coeff: factor * coeff,
                rate: *rate,
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            }),
            TemporalAmplitude::Bump { coeff, left, width } => out.push(ExpAtom {
                coeff: factor * coeff,
                rate: 0.0,
                lo: *left,
                hi: left + width,
            }),
            TemporalAmplitude::Scaled { factor: f, inner } => {
                inner.collect_atoms(factor * f, out)
            }
            TemporalAmplitude::Sum { terms } => {
                for t in terms {
                    t.collect_atoms(factor, out);
                }
            }
        }
    }

    pub fn atoms(&self) -> Vec<ExpAtom> {
        let mut out = Vec::new();
        self.collect_atoms(1.0, &mut out);
        out
    }

    /// Certified backward tail bound: constants (C, rho) with rho >= 0 and
    /// |phi(t)| <= C e^{rho t} for all t <= 0. `None` when no such bound
    /// exists (amplitudes that grow backward in time).
    pub fn tail_bound(&self) -> Option<(f64, f64)> {
        match self {
            TemporalAmplitude::Constant { value } => Some((value.abs(), 0.0)),
            TemporalAmplitude::Exponential { coeff, rate } => {
                if *rate >= 0.0 {
                    Some((coeff.abs(), *rate))
                } else {
                    None
                }
            }
            TemporalAmplitude::Bump { coeff, .. } => Some((coeff.abs(), 0.0)),
            TemporalAmplitude::Scaled { factor, inner } => inner
                .tail_bound()
                .map(|(c, r)| (factor.abs() * c, r)),
            TemporalAmplitude::Sum { terms } => {
                let mut c_total = 0.0;
                let mut r_min = f64::INFINITY;
                for t in terms {
                    let (c, r) = t.tail_bound()?;
                    c_total += c;
                    r_min = r_min.min(r);
                }
                if terms.is_empty() {
                    Some((0.0, 0.0))
                } else {
                    Some((c_total, r_min))
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fin = |v: f64| v.is_finite();
        match self {
            TemporalAmplitude::Constant { value } => {
                if !fin(*value) {
                    return Err(Error::Descriptor("temporal constant must be finite".into()));
                }
            }
            TemporalAmplitude::Exponential { coeff, rate } => {
                if !fin(*coeff) || !fin(*rate) {
                    return Err(Error::Descriptor(
                        "exponential amplitude parameters must be finite".into(),
                    ));
                }
            }
            TemporalAmplitude::Bump { coeff, left, width } => {
                if !fin(*coeff) || !fin(*left) || !fin(*width) || *width <= 0.0 {
                    return Err(Error::Descriptor(
                        "bump amplitude needs finite parameters and width > 0".into(),
                    ));
                }
            }
            TemporalAmplitude::Scaled { factor, inner } => {
                if !fin(*factor) {
                    return Err(Error::Descriptor("scale factor must be finite".into()));
                }
                inner.validate()?;
            }
            TemporalAmplitude::Sum { terms } => {
                for t in terms {
                    t.validate()?;
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Spatial profiles, forcing, weight
// ---------------------------------------------------------------------------

/// Spatial profile on the grid domain.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialProfile {
    /// Constant value at every interior node. Does not vanish at the
    /// boundary, so it is legal as a nonlocal weight but not as a forcing
    /// profile.
    Constant { amplitude: f64 },
    /// amplitude * sin(k pi x / L).
    SineMode { k: usize, amplitude: f64 },
    /// Sum of sine modes.
    SineSum { modes: Vec<(usize, f64)> },
}

impl SpatialProfile {
    pub fn sample(&self, grid: Grid1D) -> Field {
        match self {
            SpatialProfile::Constant { amplitude } => Field::from_fn(grid, |_| *amplitude),
            SpatialProfile::SineMode { k, amplitude } => grid.sine_mode(*k, *amplitude),
            SpatialProfile::SineSum { modes } => {
                let mut f = Field::zeros(grid);
                for (k, a) in modes {
                    let m = grid.sine_mode(*k, *a);
                    f.axpy(1.0, &m).expect("same grid by construction");
                }
                f
            }
        }
    }

    pub fn vanishes_at_boundary(&self) -> bool {
        match self {
            SpatialProfile::Constant { amplitude } => *amplitude == 0.0,
            SpatialProfile::SineMode { .. } | SpatialProfile::SineSum { .. } => true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpatialProfile::Constant { amplitude } => {
                if !amplitude.is_finite() {
                    return Err(Error::Descriptor("profile amplitude must be finite".into()));
                }
            }
            SpatialProfile::SineMode { k, amplitude } => {
                if *k == 0 || !amplitude.is_finite() {
                    return Err(Error::Descriptor(
                        "sine mode needs k >= 1 and a finite amplitude".into(),
                    ));
                }
            }
            SpatialProfile::SineSum { modes } => {
                if modes.is_empty() {
                    return Err(Error::Descriptor("sine sum needs at least one mode".into()));
                }
                for (k, a) in modes {
                    if *k == 0 || !a.is_finite() {
                        return Err(Error::Descriptor(
                            "sine sum entries need k >= 1 and finite amplitudes".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One separable forcing term: spatial profile times temporal amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingTerm {
    pub profile: SpatialProfile,
    pub amplitude: TemporalAmplitude,
}

/// Time-dependent forcing h(t) = sum_j phi_j(t) g_j(x).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForcingDesc {
    pub terms: Vec<ForcingTerm>,
}

impl ForcingDesc {
    pub fn empty() -> Self {
        ForcingDesc { terms: Vec::new() }
    }

    pub fn single(profile: SpatialProfile, amplitude: TemporalAmplitude) -> Self {
        ForcingDesc {
            terms: vec![ForcingTerm { profile, amplitude }],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Assemble h(t) on the grid.
    pub fn field_at(&self, grid: Grid1D, t: f64) -> Field {
        let mut out = Field::zeros(grid);
        for term in &self.terms {
            let phi = term.amplitude.eval(t);
            if phi != 0.0 {
                let g = term.profile.sample(grid);
                out.axpy(phi, &g).expect("same grid by construction");
            }
        }
        out
    }

    /// The formal difference self - other, still inside the algebra.
    pub fn difference(&self, other: &ForcingDesc) -> ForcingDesc {
        let mut terms = self.terms.clone();
        for t in &other.terms {
            terms.push(ForcingTerm {
                profile: t.profile.clone(),
                amplitude: TemporalAmplitude::Scaled {
                    factor: -1.0,
                    inner: Box::new(t.amplitude.clone()),
                },
            });
        }
        ForcingDesc { terms }
    }

    /// Structural validation plus a sampled consistency audit of the declared
    /// tail bounds: wherever a bound (C, rho) exists, |phi(t)| <= C e^{rho t}
    /// must hold at sampled t <= 0.
    pub fn validate(&self) -> Result<()> {
        for (j, term) in self.terms.iter().enumerate() {
            term.profile.validate()?;
            term.amplitude.validate()?;
            if !term.profile.vanishes_at_boundary() {
                return Err(Error::Descriptor(format!(
                    "forcing term {j}: spatial profile must vanish at the boundary"
                )));
            }
            if let Some((c, rho)) = term.amplitude.tail_bound() {
                for i in 0..=160 {
                    let t = -40.0 * (i as f64) / 160.0;
                    let phi = term.amplitude.eval(t).abs();
                    let bound = c * (rho * t).exp();
                    if phi > bound * (1.0 + 1e-9) + 1e-300 {
                        return Err(Error::Descriptor(format!(
                            "forcing term {j}: tail bound violated at t = {t}: |phi| = {phi} > {bound}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Weight defining the nonlocal value l(u) = (g_l, u).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDesc {
    pub profile: SpatialProfile,
}

impl WeightDesc {
    pub fn new(profile: SpatialProfile) -> Self {
        WeightDesc { profile }
    }

    pub fn sample(&self, grid: Grid1D) -> Field {
        self.profile.sample(grid)
    }
}

// ---------------------------------------------------------------------------
// Problem spec
// ---------------------------------------------------------------------------

/// One fully instantiated problem: du/dt - a(l(u)) Lap u = f(u) + h(t) on
/// (0, L) with Dirichlet conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub viscosity: ViscosityDesc,
    pub reaction: ReactionDesc,
    pub forcing: ForcingDesc,
    pub weight: WeightDesc,
    pub domain_length: f64,
}

impl ProblemSpec {
    /// |Omega| — the measure of the interval.
    pub fn omega_measure(&self) -> f64 {
        self.domain_length
    }

    pub fn m_floor(&self) -> f64 {
        self.viscosity.m_floor()
    }

    /// The kappa entering the absorbing constant 2 kappa |Omega| / mu: the
    /// dissipativity constant kappa2 of the declared certificate.
    pub fn kappa(&self) -> f64 {
        self.reaction.certificate.kappa2
    }

    /// Viscosity coefficient a(l(u)) for the current state.
    pub fn nonlocal_coefficient(&self, u: &Field) -> Result<f64> {
        let w = self.weight.sample(u.grid());
        let l = crate::grid::nonlocal_value(&w, u)?;
        Ok(self.viscosity.eval(l))
    }

    pub fn forcing_field(&self, grid: Grid1D, t: f64) -> Field {
        self.forcing.field_at(grid, t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.domain_length.is_finite() && self.domain_length > 0.0) {
            return Err(Error::Descriptor(format!(
                "domain length must be positive, got {}",
                self.domain_length
            )));
        }
        self.viscosity.validate()?;
        self.reaction.validate()?;
        self.forcing.validate()?;
        self.weight.profile.validate()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// check_A1: sampled audit of the structural assumptions
// ---------------------------------------------------------------------------

/// Audit the declared growth/dissipativity certificate and the viscosity
/// floor by dense sampling on [-sample_range, sample_range] (endpoints, zero
/// and descriptor breakpoints always included). A sampling audit cannot prove
/// the inequalities globally; the verdict records the range it covered.
pub fn check_a1(spec: &ProblemSpec, sample_range: f64, n_samples: usize) -> ConditionVerdict {
    assert!(sample_range > 0.0 && n_samples >= 2);
    let cert = spec.reaction.certificate;
    let p = spec.reaction.p;
    let m = spec.m_floor();

    let mut points: Vec<f64> = (0..n_samples)
        .map(|i| -sample_range + 2.0 * sample_range * (i as f64) / (n_samples as f64 - 1.0))
        .collect();
    points.push(0.0);
    for b in spec.viscosity.breakpoints() {
        if b.abs() <= sample_range {
            points.push(b);
        }
    }

    // margin >= 0 means the inequality holds at that sample.
    let mut worst_growth = (f64::INFINITY, 0.0); // (margin, location)
    let mut worst_dissip = (f64::INFINITY, 0.0);
    let mut worst_visc = (f64::INFINITY, 0.0);
    let mut scale: f64 = 1.0;

    for &s in &points {
        let f = spec.reaction.eval(s);
        let sp1 = s.abs().powf(p - 1.0);
        let growth = cert.kappa1 + cert.alpha1 * sp1 - f.abs();
        let dissip = cert.kappa2 - cert.alpha2 * s.abs().powf(p) - f * s;
        let visc = spec.viscosity.eval(s) - m;
        if growth < worst_growth.0 {
            worst_growth = (growth, s);
        }
        if dissip < worst_dissip.0 {
            worst_dissip = (dissip, s);
        }
        if visc < worst_visc.0 {
            worst_visc = (visc, s);
        }
        scale = scale
            .max(f.abs())
            .max(cert.kappa1 + cert.alpha1 * sp1)
            .max((f * s).abs());
    }

    // Canonical certificates meet their bound with exactly zero margin;
    // allow rounding noise, nothing more.
    let slack = 1e-11 * scale;
    let ok = worst_growth.0 >= -slack && worst_dissip.0 >= -slack && worst_visc.0 >= -slack;

    let mut v = ConditionVerdict::new("A1", if ok { Verdict::Pass } else { Verdict::Fail })
        .with_threshold("sample_range", sample_range)
        .with_threshold("n_samples", n_samples as f64)
        .with_threshold("slack", slack);
    v.evidence.push(EvidenceRow::new(
        "growth margin",
        worst_growth.1,
        worst_growth.0,
    ));
    v.evidence.push(EvidenceRow::new(
        "dissipativity margin",
        worst_dissip.1,
        worst_dissip.0,
    ));
    v.evidence.push(EvidenceRow::new(
        "viscosity floor margin",
        worst_visc.1,
        worst_visc.0,
    ));
    if !ok {
        let mut failures = Vec::new();
        if worst_growth.0 < -slack {
            failures.push(format!("growth bound fails near s = {:.6}", worst_growth.1));
        }
        if worst_dissip.0 < -slack {
            failures.push(format!(
                "dissipativity bound fails near s = {:.6}",
                worst_dissip.1
            ));
        }
        if worst_visc.0 < -slack {
            failures.push(format!("viscosity floor fails near s = {:.6}", worst_visc.1));
        }
        for f in failures {
            v = v.note(f);
        }
    }
    v
}

// ---------------------------------------------------------------------------
// Perturbed family
// ---------------------------------------------------------------------------

/// How the viscosity depends on eta: the base descriptor plus an optional
/// Lorentzian bump scaled by eta^power.
#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityRule {
    pub base: ViscosityDesc,
    pub eta_bump: Option<EtaBump>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaBump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    /// The bump is scaled by eta^power; power = 0 keeps it fixed (a family
    /// that deliberately fails uniform convergence).
    pub power: f64,
}

impl ViscosityRule {
    pub fn fixed(base: ViscosityDesc) -> Self {
        ViscosityRule {
            base,
            eta_bump: None,
        }
    }

    fn instantiate(&self, eta: f64) -> Result<ViscosityDesc> {
        let bump = match (&self.eta_bump, eta) {
            (None, _) => return Ok(self.base.clone()),
            (Some(_), e) if e == 0.0 => return Ok(self.base.clone()),
            (Some(b), _) => b,
        };
        let add = eta.powf(bump.power) * bump.amplitude;
        match &self.base {
            ViscosityDesc::Constant { value } => Ok(ViscosityDesc::RationalBump {
                floor: *value,
                amplitude: add,
                center: bump.center,
                width: bump.width,
            }),
            ViscosityDesc::RationalBump {
                floor,
                amplitude,
                center,
                width,
            } if *center == bump.center && *width == bump.width => {
                Ok(ViscosityDesc::RationalBump {
                    floor: *floor,
                    amplitude: amplitude + add,
                    center: *center,
                    width: *width,
                })
            }
            _ => Err(Error::Descriptor(
                "viscosity eta-bump requires a constant base or a bump with the same center/width"
                    .into(),
            )),
        }
    }
}

/// How the reaction depends on eta: base shape with a bounded offset scaled
/// by eta^power. The certificate is shared by the whole family (the
/// structural assumptions require eta-independent constants).
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionRule {
    pub base: ReactionDesc,
    pub eta_offset: f64,
    pub eta_power: f64,
}

impl ReactionRule {
    pub fn fixed(base: ReactionDesc) -> Self {
        ReactionRule {
            base,
            eta_offset: 0.0,
            eta_power: 1.0,
        }
    }

    fn instantiate(&self, eta: f64) -> ReactionDesc {
        if eta == 0.0 || self.eta_offset == 0.0 {
            return self.base.clone();
        }
        let add = eta.powf(self.eta_power) * self.eta_offset;
        let (alpha, offset) = match &self.base.shape {
            ReactionShape::OddPower { alpha } => (*alpha, add),
            ReactionShape::OddPowerPlusBounded { alpha, offset } => (*alpha, offset + add),
        };
        ReactionDesc {
            shape: ReactionShape::OddPowerPlusBounded { alpha, offset },
            p: self.base.p,
            certificate: self.base.certificate,
        }
    }
}

/// How one forcing term scales with eta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaScaling {
    /// Multiply the declared amplitude by eta^k. k = 1 is the classical
    /// vanishing perturbation, k = 0 a fixed offset, negative k a family
    /// whose tails grow as eta shrinks.
    Power { k: f64 },
    /// Replace the declared (constant) amplitude by an indicator bump on
    /// [-1/eta - width, -1/eta] normalized so that the exponentially
    /// weighted tail integral of its square at weight mu equals the square
    /// of the declared constant. The support escapes to -infinity while the
    /// weighted mass stays put — the standard counterexample to swapping
    /// the eta and t limits.
    MovingBump { mu: f64, width: f64 },
}

/// Forcing term present only for eta > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaForcingTerm {
    pub profile: SpatialProfile,
    pub amplitude: TemporalAmplitude,
    pub scaling: EtaScaling,
}

/// h_eta = base terms + scaled eta terms; h_0 = base terms alone.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForcingRule {
    pub base_terms: Vec<ForcingTerm>,
    pub eta_terms: Vec<EtaForcingTerm>,
}

impl ForcingRule {
    fn instantiate(&self, eta: f64) -> Result<ForcingDesc> {
        let mut terms = self.base_terms.clone();
        if eta > 0.0 {
            for et in &self.eta_terms {
                let amplitude = match et.scaling {
                    EtaScaling::Power { k } => TemporalAmplitude::Scaled {
                        factor: eta.powf(k),
                        inner: Box::new(et.amplitude.clone()),
                    },
                    EtaScaling::MovingBump { mu, width } => {
                        let scale = match &et.amplitude {
                            TemporalAmplitude::Constant { value } => *value,
                            other => {
                                return Err(Error::Descriptor(format!(
                                    "moving-bump scaling needs a constant base amplitude, got {other:?}"
                                )))
                            }
                        };
                        moving_bump_amplitude(scale, mu, width, eta)?
                    }
                };
                terms.push(ForcingTerm {
                    profile: et.profile.clone(),
                    amplitude,
                });
            }
        }
        Ok(ForcingDesc { terms })
    }
}

/// Normalized moving bump: coeff chosen so that
/// integral over the support of e^{mu s} * coeff^2 ds = scale^2.
pub fn moving_bump_amplitude(
    scale: f64,
    mu: f64,
    width: f64,
    eta: f64,
) -> Result<TemporalAmplitude> {
    if !(mu > 0.0 && width > 0.0 && eta > 0.0) {
        return Err(Error::Descriptor(
            "moving bump needs mu > 0, width > 0, eta > 0".into(),
        ));
    }
    let hi = -1.0 / eta;
    // integral_{hi-width}^{hi} e^{mu s} ds = e^{mu hi} (1 - e^{-mu width}) / mu
    let exponent = -mu * hi; // = mu / eta
    if exponent > 600.0 {
        return Err(Error::Descriptor(format!(
            "moving bump amplitude overflows: mu/eta = {exponent:.1} too large"
        )));
    }
    let coeff_sq = scale * scale * mu * exponent.exp() / (1.0 - (-mu * width).exp());
    Ok(TemporalAmplitude::Bump {
        coeff: coeff_sq.sqrt(),
        left: hi - width,
        width,
    })
}

/// Weight rule: fixed base profile plus an optional eta-scaled profile.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRule {
    pub base: SpatialProfile,
    pub eta_term: Option<(SpatialProfile, f64)>,
}

impl WeightRule {
    pub fn fixed(base: SpatialProfile) -> Self {
        WeightRule {
            base,
            eta_term: None,
        }
    }

    fn instantiate(&self, eta: f64) -> Result<WeightDesc> {
        match (&self.eta_term, eta) {
            (Some((profile, power)), e) if e > 0.0 => {
                // A nonzero constant base has no mode representation, so it
                // cannot be summed with sine perturbations.
                let base_silent = match &self.base {
                    SpatialProfile::Constant { amplitude } => *amplitude == 0.0,
                    _ => true,
                };
                let mut base_modes = profile_as_modes(&self.base);
                if !base_silent && base_modes.is_empty() {
                    return Err(Error::Descriptor(
                        "weight eta-term needs a sine-mode base (a nonzero constant base cannot join a mode sum)"
                            .into(),
                    ));
                }
                let mut modes = profile_as_modes(profile);
                let factor = e.powf(*power);
                for m in &mut modes {
                    m.1 *= factor;
                }
                base_modes.append(&mut modes);
                if base_modes.is_empty() {
                    Ok(WeightDesc::new(self.base.clone()))
                } else {
                    Ok(WeightDesc::new(SpatialProfile::SineSum { modes: base_modes }))
                }
            }
            _ => Ok(WeightDesc::new(self.base.clone())),
        }
    }
}

fn profile_as_modes(p: &SpatialProfile) -> Vec<(usize, f64)> {
    match p {
        SpatialProfile::SineMode { k, amplitude } => vec![(*k, *amplitude)],
        SpatialProfile::SineSum { modes } => modes.clone(),
        SpatialProfile::Constant { .. } => Vec::new(),
    }
}

/// Decay exponent per perturbation level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuRule {
    Constant { value: f64 },
    /// mu_eta = base + slope * eta.
    Affine { base: f64, slope: f64 },
    /// Alternates between lo and hi along the schedule (used to exercise the
    /// liminf/limsup split).
    Alternating { lo: f64, hi: f64 },
}

/// A one-parameter family of problems indexed by eta from a fixed decreasing
/// schedule, together with its limit problem at eta = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedFamily {
    eta_schedule: Vec<f64>,
    pub viscosity: ViscosityRule,
    pub reaction: ReactionRule,
    pub forcing: ForcingRule,
    pub weight: WeightRule,
    pub mu: MuRule,
    mu_zero: f64,
    domain_length: f64,
    lambda1: f64,
}

impl PerturbedFamily {
    /// Build and validate: the schedule must be strictly decreasing inside
    /// (0, 1], every instantiated spec must validate, and every decay
    /// exponent (including mu_zero) must lie strictly inside
    /// (0, 2 m lambda1) for the eigenvalue handed in.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        eta_schedule: Vec<f64>,
        viscosity: ViscosityRule,
        reaction: ReactionRule,
        forcing: ForcingRule,
        weight: WeightRule,
        mu: MuRule,
        mu_zero: f64,
        domain_length: f64,
        lambda1: f64,
    ) -> Result<Self> {
        if eta_schedule.is_empty() {
            return Err(Error::Descriptor("eta schedule must be nonempty".into()));
        }
        for w in eta_schedule.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Descriptor(
                    "eta schedule must be strictly decreasing".into(),
                ));
            }
        }
        if !eta_schedule.iter().all(|e| *e > 0.0 && *e <= 1.0) {
            return Err(Error::Descriptor("eta schedule must lie in (0, 1]".into()));
        }
        if !(lambda1.is_finite() && lambda1 > 0.0) {
            return Err(Error::Descriptor("lambda1 must be positive".into()));
        }
        let fam = PerturbedFamily {
            eta_schedule,
            viscosity,
            reaction,
            forcing,
            weight,
            mu,
            mu_zero,
            domain_length,
            lambda1,
        };
        // Validate every level eagerly, limit included; m is family-wide.
        let mut m = f64::INFINITY;
        let mut levels: Vec<f64> = vec![0.0];
        levels.extend_from_slice(&fam.eta_schedule);
        for &eta in &levels {
            let spec = fam.instantiate_unchecked(eta)?;
            spec.validate()?;
            m = m.min(spec.m_floor());
        }
        let upper = 2.0 * m * lambda1;
        for &eta in &fam.eta_schedule {
            let mu_eta = fam.mu_at(eta)?;
            if !(mu_eta > 0.0 && mu_eta < upper) {
                return Err(Error::InvalidMu {
                    mu: mu_eta,
                    upper,
                });
            }
        }
        if !(mu_zero > 0.0 && mu_zero < upper) {
            return Err(Error::InvalidMu {
                mu: mu_zero,
                upper,
            });
        }
        Ok(fam)
    }

    pub fn eta_schedule(&self) -> &[f64] {
        &self.eta_schedule
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    /// The eigenvalue the family was validated against.
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn mu_zero(&self) -> f64 {
        self.mu_zero
    }

    /// The family-wide viscosity floor (minimum over all levels).
    pub fn m_floor(&self) -> f64 {
        let mut m = self
            .instantiate_unchecked(0.0)
            .map(|s| s.m_floor())
            .unwrap_or(f64::INFINITY);
        for &eta in &self.eta_schedule {
            if let Ok(s) = self.instantiate_unchecked(eta) {
                m = m.min(s.m_floor());
            }
        }
        m
    }

    fn schedule_index(&self, eta: f64) -> Option<usize> {
        self.eta_schedule.iter().position(|e| *e == eta)
    }

    /// Decay exponent mu_eta. Defined on the schedule and at eta = 0 (where
    /// it is mu_zero).
    pub fn mu_at(&self, eta: f64) -> Result<f64> {
        if eta == 0.0 {
            return Ok(self.mu_zero);
        }
        let idx = self
            .schedule_index(eta)
            .ok_or(Error::UnknownEta { eta })?;
        Ok(match self.mu {
            MuRule::Constant { value } => value,
            MuRule::Affine { base, slope } => base + slope * eta,
            MuRule::Alternating { lo, hi } => {
                if idx % 2 == 0 {
                    lo
                } else {
                    hi
                }
            }
        })
    }

    fn instantiate_unchecked(&self, eta: f64) -> Result<ProblemSpec> {
        Ok(ProblemSpec {
            viscosity: self.viscosity.instantiate(eta)?,
            reaction: self.reaction.instantiate(eta),
            forcing: self.forcing.instantiate(eta)?,
            weight: self.weight.instantiate(eta)?,
            domain_length: self.domain_length,
        })
    }

    /// Instantiate the problem at a schedule level, or the limit problem at
    /// eta = 0. Pure: identical arguments yield bitwise-identical specs.
    pub fn instantiate(&self, eta: f64) -> Result<ProblemSpec> {
        if eta != 0.0 && self.schedule_index(eta).is_none() {
            return Err(Error::UnknownEta { eta });
        }
        self.instantiate_unchecked(eta)
    }

    /// The limit problem (eta = 0).
    pub fn limit_spec(&self) -> ProblemSpec {
        self.instantiate_unchecked(0.0)
            .expect("limit spec validated at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid_lambda1() -> f64 {
        Grid1D::new(1.0, 64)
            .unwrap()
            .first_eigenvalue(crate::grid::EigenvalueMode::Discrete)
    }

    fn spec_with_reaction(reaction: ReactionDesc) -> ProblemSpec {
        ProblemSpec {
            viscosity: ViscosityDesc::Constant { value: 1.0 },
            reaction,
            forcing: ForcingDesc::empty(),
            weight: WeightDesc::new(SpatialProfile::Constant { amplitude: 1.0 }),
            domain_length: 1.0,
        }
    }

    #[test]
    fn canonical_odd_power_passes_a1_with_zero_margin() {
        let spec = spec_with_reaction(ReactionDesc::odd_power(1.0, 4.0));
        let v = check_a1(&spec, 4.0, 801);
        assert!(v.passed(), "{v:?}");
        // Canonical certificate is tight: growth margin is exactly zero.
        let growth = v
            .evidence
            .iter()
            .find(|e| e.label == "growth margin")
            .unwrap();
        assert!(growth.value.abs() < 1e-9, "margin {}", growth.value);
    }

    #[test]
    fn cubic_with_unit_offset_has_the_known_dissipativity_margin() {
        // f(s) = 1 - s^3 declared with (kappa1, alpha1, kappa2, alpha2, p) =
        // (1, 1, 0.6, 0.5, 4). The binding constraint is
        // s - s^4/2 <= 0.6, whose left side peaks at s = 2^{-1/3} ~ 0.7937
        // with value (3/4) 2^{-1/3} ~ 0.59527. Margin ~ 0.00473.
        let reaction = ReactionDesc::odd_power_plus_bounded(
            1.0,
            4.0,
            1.0,
            GrowthCertificate {
                kappa1: 1.0,
                alpha1: 1.0,
                kappa2: 0.6,
                alpha2: 0.5,
            },
        );
        let spec = spec_with_reaction(reaction);
        let v = check_a1(&spec, 4.0, 4001);
        assert!(v.passed(), "{v:?}");
        let dissip = v
            .evidence
            .iter()
            .find(|e| e.label == "dissipativity margin")
            .unwrap();

        // Independent oracle: brute-force maximization of s - s^4/2.
        let mut max_val = f64::NEG_INFINITY;
        let mut arg = 0.0;
        for i in 0..200_000 {
            let s = -4.0 + 8.0 * (i as f64) / 199_999.0;
            let g = s - 0.5 * s.powi(4);
            if g > max_val {
                max_val = g;
                arg = s;
            }
        }
        println!("oracle: max s - s^4/2 = {max_val:.6} at s = {arg:.6}");
        assert!((max_val - 0.595_275).abs() < 1e-4);
        assert!((arg - 0.793_7).abs() < 1e-3);
        assert!(
            (dissip.value - (0.6 - max_val)).abs() < 1e-6,
            "margin {} vs oracle {}",
            dissip.value,
            0.6 - max_val
        );
        assert!((dissip.index - arg).abs() < 5e-3, "worst location {}", dissip.index);
    }

    #[test]
    fn anti_dissipative_reaction_fails_a1() {
        // f(s) = s: the sign is wrong, f(s) s = s^2 grows.
        let reaction = ReactionDesc {
            shape: ReactionShape::OddPower { alpha: -1.0 },
            p: 2.0,
            certificate: GrowthCertificate {
                kappa1: 0.0,
                alpha1: 1.0,
                kappa2: 0.0,
                alpha2: 1.0,
            },
        };
        let spec = spec_with_reaction(reaction);
        let v = check_a1(&spec, 3.0, 501);
        assert_eq!(v.verdict, Verdict::Fail);
        let dissip = v
            .evidence
            .iter()
            .find(|e| e.label == "dissipativity margin")
            .unwrap();
        assert!(dissip.value < -1.0, "should fail badly, got {}", dissip.value);
    }

    #[test]
    fn understated_growth_certificate_fails_a1() {
        let reaction = ReactionDesc::odd_power(1.0, 4.0).with_certificate(GrowthCertificate {
            kappa1: 0.0,
            alpha1: 0.5, // |s|^3 <= 0.5 |s|^3 is false away from 0
            kappa2: 0.0,
            alpha2: 1.0,
        });
        let spec = spec_with_reaction(reaction);
        let v = check_a1(&spec, 2.0, 501);
        assert_eq!(v.verdict, Verdict::Fail);
        assert!(v.notes.iter().any(|n| n.contains("growth")));
    }

    #[test]
    fn piecewise_linear_viscosity_interpolates_and_clamps() {
        let v = ViscosityDesc::PiecewiseLinear {
            knots: vec![(-1.0, 2.0), (1.0, 4.0), (2.0, 3.0)],
        };
        v.validate().unwrap();
        assert_eq!(v.eval(0.0), 3.0); // midpoint, interpolated not stepped
        assert_eq!(v.eval(-10.0), 2.0);
        assert_eq!(v.eval(10.0), 3.0);
        assert_eq!(v.eval(1.5), 3.5);
        assert_eq!(v.m_floor(), 2.0);
    }

    #[test]
    fn rational_bump_never_dips_below_floor() {
        let v = ViscosityDesc::RationalBump {
            floor: 0.7,
            amplitude: 2.0,
            center: 1.0,
            width: 0.5,
        };
        for i in -100..=100 {
            let s = i as f64 * 0.3;
            assert!(v.eval(s) >= 0.7);
        }
        assert!((v.eval(1.0) - 2.7).abs() < 1e-15);
    }

    #[test]
    fn temporal_amplitudes_evaluate_and_bound_their_tails() {
        let amp = TemporalAmplitude::Sum {
            terms: vec![
                TemporalAmplitude::Constant { value: 0.5 },
                TemporalAmplitude::Exponential {
                    coeff: 2.0,
                    rate: 0.3,
                },
                TemporalAmplitude::Bump {
                    coeff: 1.5,
                    left: -4.0,
                    width: 1.0,
                },
            ],
        };
        assert!((amp.eval(-3.5) - (0.5 + 2.0 * (-0.3 * 3.5_f64).exp() + 1.5)).abs() < 1e-12);
        let (c, rho) = amp.tail_bound().unwrap();
        assert_eq!(rho, 0.0); // min over {0, 0.3, 0}
        assert!((c - 4.0).abs() < 1e-12);
        for i in 0..200 {
            let t = -20.0 * (i as f64) / 199.0;
            assert!(amp.eval(t).abs() <= c * (rho * t).exp() + 1e-12);
        }
        // Backward-growing exponential has no certified bound.
        let growing = TemporalAmplitude::Exponential {
            coeff: 1.0,
            rate: -0.2,
        };
        assert!(growing.tail_bound().is_none());
    }

    #[test]
    fn atom_products_intersect_windows_and_add_rates() {
        let a = ExpAtom {
            coeff: 2.0,
            rate: 0.5,
            lo: -3.0,
            hi: 1.0,
        };
        let b = ExpAtom {
            coeff: 3.0,
            rate: -0.2,
            lo: -1.0,
            hi: 4.0,
        };
        let p = a.product(&b).unwrap();
        assert_eq!(p.coeff, 6.0);
        assert!((p.rate - 0.3).abs() < 1e-15);
        assert_eq!((p.lo, p.hi), (-1.0, 1.0));
        let disjoint = ExpAtom {
            coeff: 1.0,
            rate: 0.0,
            lo: 2.0,
            hi: 3.0,
        };
        assert!(a.product(&disjoint).is_none());
    }

    #[test]
    fn constant_profile_is_rejected_as_forcing_but_fine_as_weight() {
        let bad = ForcingDesc::single(
            SpatialProfile::Constant { amplitude: 1.0 },
            TemporalAmplitude::Constant { value: 1.0 },
        );
        assert!(bad.validate().is_err());
        let w = WeightDesc::new(SpatialProfile::Constant { amplitude: 1.0 });
        let g = Grid1D::new(1.0, 16).unwrap();
        assert_eq!(w.sample(g).values()[3], 1.0);
    }

    fn toy_family() -> PerturbedFamily {
        PerturbedFamily::new(
            vec![0.5, 0.25, 0.125],
            ViscosityRule::fixed(ViscosityDesc::Constant { value: 1.0 }),
            ReactionRule::fixed(ReactionDesc::odd_power(1.0, 4.0)),
            ForcingRule {
                base_terms: vec![],
                eta_terms: vec![EtaForcingTerm {
                    profile: SpatialProfile::SineMode {
                        k: 1,
                        amplitude: 1.0,
                    },
                    amplitude: TemporalAmplitude::Constant { value: 1.0 },
                    scaling: EtaScaling::Power { k: 1.0 },
                }],
            },
            WeightRule::fixed(SpatialProfile::Constant { amplitude: 1.0 }),
            MuRule::Constant { value: 4.0 },
            4.0,
            1.0,
            unit_grid_lambda1(),
        )
        .unwrap()
    }

    #[test]
    fn instantiate_is_pure_and_rejects_unknown_levels() {
        let fam = toy_family();
        let a = fam.instantiate(0.25).unwrap();
        let b = fam.instantiate(0.25).unwrap();
        assert_eq!(a, b);
        match fam.instantiate(0.3) {
            Err(Error::UnknownEta { eta }) => assert_eq!(eta, 0.3),
            other => panic!("expected UnknownEta, got {other:?}"),
        }
        // The limit problem drops all eta terms.
        let limit = fam.instantiate(0.0).unwrap();
        assert!(limit.forcing.is_empty());
        assert_eq!(limit, fam.limit_spec());
    }

    #[test]
    fn family_rejects_mu_outside_the_admissible_interval() {
        let lambda1 = unit_grid_lambda1();
        let err = PerturbedFamily::new(
            vec![0.5],
            ViscosityRule::fixed(ViscosityDesc::Constant { value: 1.0 }),
            ReactionRule::fixed(ReactionDesc::odd_power(1.0, 4.0)),
            ForcingRule::default(),
            WeightRule::fixed(SpatialProfile::Constant { amplitude: 1.0 }),
            MuRule::Constant {
                value: 2.0 * lambda1, // exactly the endpoint: not allowed
            },
            4.0,
            1.0,
            lambda1,
        );
        match err {
            Err(Error::InvalidMu { mu, upper }) => {
                assert_eq!(mu, 2.0 * lambda1);
                assert!((upper - 2.0 * lambda1).abs() < 1e-12);
            }
            other => panic!("expected InvalidMu, got {other:?}"),
        }
    }

    #[test]
    fn eta_scaled_forcing_shrinks_with_eta() {
        let fam = toy_family();
        let g = Grid1D::new(1.0, 64).unwrap();
        let big = fam.instantiate(0.5).unwrap().forcing_field(g, 0.0);
        let small = fam.instantiate(0.125).unwrap().forcing_field(g, 0.0);
        assert!((big.l2_norm() - 4.0 * small.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn moving_bump_slides_left_and_keeps_finite_amplitude() {
        let amp = moving_bump_amplitude(1.0, 0.5, 1.0, 0.125).unwrap();
        match amp {
            TemporalAmplitude::Bump { coeff, left, width } => {
                assert_eq!(width, 1.0);
                assert_eq!(left, -9.0);
                assert!(coeff.is_finite() && coeff > 0.0);
            }
            other => panic!("expected bump, got {other:?}"),
        }
        // Requesting a level so small the amplitude would overflow errors out.
        assert!(moving_bump_amplitude(1.0, 0.5, 1.0, 1e-5).is_err());
    }

    #[test]
    fn reaction_shapes_match_their_formulas() {
        let f = ReactionDesc::odd_power(2.0, 4.0);
        assert!((f.eval(1.5) + 2.0 * 1.5_f64.powi(3)).abs() < 1e-12);
        assert!((f.eval(-1.5) - 2.0 * 1.5_f64.powi(3)).abs() < 1e-12);
        let g = ReactionDesc::odd_power_plus_bounded(
            1.0,
            4.0,
            1.0,
            GrowthCertificate {
                kappa1: 1.0,
                alpha1: 1.0,
                kappa2: 0.6,
                alpha2: 0.5,
            },
        );
        assert!((g.eval(2.0) - (1.0 - 8.0)).abs() < 1e-12);
        assert!((g.conjugate_exponent() - 4.0 / 3.0).abs() < 1e-14);
    }
}
