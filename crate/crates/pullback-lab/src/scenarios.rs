//! Built-in scenario library: named problem families with pinned constants,
//! plus the curated pass/fail matrix that validates the assumption audits
//! against analytically known outcomes.
//!
//! Scenario names are part of the CLI contract and stay stable; their
//! constants are chosen so every derived quantity (eigenvalues, tails,
//! radii) is exactly computable by the descriptor algebra.

use crate::error::{Error, Result};
use crate::grid::{EigenvalueMode, Grid1D};
use crate::model::{
    EtaBump, EtaForcingTerm, EtaScaling, ForcingRule, ForcingTerm, GrowthCertificate, MuRule,
    PerturbedFamily, ReactionDesc, ReactionRule, SpatialProfile, TemporalAmplitude,
    ViscosityDesc, ViscosityRule, WeightRule,
};

/// One library entry. `default_experiments` are the experiment ids a bare
/// config runs for this scenario.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioDef {
    pub name: &'static str,
    pub description: &'static str,
    pub default_experiments: &'static [&'static str],
    /// Depth of the default halving schedule eta = 2^{-1} .. 2^{-levels}.
    pub default_eta_levels: usize,
}

/// The fixed registry, in stable presentation order.
pub const SCENARIOS: [ScenarioDef; 5] = [
    ScenarioDef {
        name: "nd16_autonomous",
        description: "forcing h_eta = eta h, time-independent, with fixed viscosity and reaction; the limit problem is unforced",
        default_experiments: &["conditions", "robustness"],
        default_eta_levels: 6,
    },
    ScenarioDef {
        name: "nonautonomous_limit",
        description: "every datum perturbed at order eta around a nonautonomous limit with exponentially decaying-backward forcing",
        default_experiments: &["conditions", "robustness", "finite-time"],
        default_eta_levels: 6,
    },
    ScenarioDef {
        name: "moving_bump_counterexample",
        description: "unit-mass forcing windows sliding backward in time: the level and pullback limits do not commute",
        default_experiments: &["noncommutation"],
        default_eta_levels: 6,
    },
    ScenarioDef {
        name: "heat_benchmark",
        description: "pure diffusion (a = 1, f = 0, h = 0) with a closed-form solution; the discretization benchmark",
        default_experiments: &["energy-audit"],
        default_eta_levels: 3,
    },
    ScenarioDef {
        name: "linear_decay",
        description: "unforced linear dissipative problem: the attractor section is {0} and every bound is explicit",
        default_experiments: &["energy-audit", "gronwall", "absorbing", "attractor"],
        default_eta_levels: 3,
    },
];

pub fn find(name: &str) -> Result<&'static ScenarioDef> {
    SCENARIOS
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Descriptor(format!("unknown scenario '{name}'")))
}

/// eta = 2^{-1} .. 2^{-levels}.
pub fn halving_schedule(levels: usize) -> Vec<f64> {
    (1..=levels as i32).map(|j| 2f64.powi(-j)).collect()
}

/// f identically zero. The declared certificate holds on the audited sample
/// range (dissipativity with a positive alpha2 cannot hold globally for a
/// zero reaction, and the audit samples a declared compact anyway).
fn zero_reaction() -> ReactionDesc {
    ReactionDesc::odd_power(0.0, 2.0).with_certificate(GrowthCertificate {
        kappa1: 0.0,
        alpha1: 0.01,
        kappa2: 1.0,
        alpha2: 0.01,
    })
}

fn sine(k: usize, amplitude: f64) -> SpatialProfile {
    SpatialProfile::SineMode { k, amplitude }
}

fn unit_weight() -> WeightRule {
    WeightRule::fixed(SpatialProfile::Constant { amplitude: 1.0 })
}

fn plain_viscosity() -> ViscosityRule {
    ViscosityRule::fixed(ViscosityDesc::Constant { value: 1.0 })
}

/// Instantiate a named scenario's family on the given grid. The decay
/// exponents are tied to the grid's own first eigenvalue so that every
/// estimate holds for the scheme itself; `mu_rule` / `mu_zero` override the
/// scenario defaults when supplied.
pub fn build_family(
    name: &str,
    grid: Grid1D,
    eta_schedule: Vec<f64>,
    mu_rule: Option<MuRule>,
    mu_zero: Option<f64>,
) -> Result<PerturbedFamily> {
    let l1 = grid.first_eigenvalue(EigenvalueMode::Discrete);
    let length = grid.length();
    match name {
        "heat_benchmark" => PerturbedFamily::new(
            eta_schedule,
            plain_viscosity(),
            ReactionRule::fixed(zero_reaction()),
            ForcingRule::default(),
            unit_weight(),
            mu_rule.unwrap_or(MuRule::Constant { value: l1 }),
            mu_zero.unwrap_or(l1),
            length,
            l1,
        ),
        "linear_decay" => PerturbedFamily::new(
            eta_schedule,
            plain_viscosity(),
            ReactionRule::fixed(ReactionDesc::odd_power(1.0, 2.0)),
            ForcingRule::default(),
            unit_weight(),
            mu_rule.unwrap_or(MuRule::Constant { value: l1 }),
            mu_zero.unwrap_or(l1),
            length,
            l1,
        ),
        "nd16_autonomous" => PerturbedFamily::new(
            eta_schedule,
            plain_viscosity(),
            ReactionRule::fixed(ReactionDesc::odd_power(1.0, 4.0)),
            ForcingRule {
                base_terms: vec![],
                eta_terms: vec![EtaForcingTerm {
                    profile: sine(1, 1.0),
                    amplitude: TemporalAmplitude::Constant { value: 1.0 },
                    scaling: EtaScaling::Power { k: 1.0 },
                }],
            },
            unit_weight(),
            mu_rule.unwrap_or(MuRule::Constant { value: l1 }),
            mu_zero.unwrap_or(l1),
            length,
            l1,
        ),
        "nonautonomous_limit" => PerturbedFamily::new(
            eta_schedule,
            ViscosityRule {
                base: ViscosityDesc::Constant { value: 1.0 },
                eta_bump: Some(EtaBump {
                    amplitude: 0.5,
                    center: 0.3,
                    width: 1.0,
                    power: 1.0,
                }),
            },
            ReactionRule {
                // The certificate leaves room for the bounded eta-offset
                // (max 0.1 over the schedule).
                base: ReactionDesc::odd_power(1.0, 4.0).with_certificate(GrowthCertificate {
                    kappa1: 0.25,
                    alpha1: 1.0,
                    kappa2: 0.1,
                    alpha2: 0.5,
                }),
                eta_offset: 0.2,
                eta_power: 1.0,
            },
            ForcingRule {
                base_terms: vec![ForcingTerm {
                    profile: sine(1, 1.0),
                    amplitude: TemporalAmplitude::Exponential {
                        coeff: 1.0,
                        rate: 0.75,
                    },
                }],
                eta_terms: vec![EtaForcingTerm {
                    profile: sine(2, 1.0),
                    amplitude: TemporalAmplitude::Exponential {
                        coeff: 1.0,
                        rate: 0.75,
                    },
                    scaling: EtaScaling::Power { k: 1.0 },
                }],
            },
            WeightRule {
                base: sine(1, 1.0),
                eta_term: Some((sine(2, 1.0), 1.0)),
            },
            mu_rule.unwrap_or(MuRule::Affine {
                base: l1,
                slope: 0.5,
            }),
            mu_zero.unwrap_or(l1),
            length,
            l1,
        ),
        "moving_bump_counterexample" => PerturbedFamily::new(
            eta_schedule,
            plain_viscosity(),
            ReactionRule::fixed(ReactionDesc::odd_power(1.0, 4.0)),
            ForcingRule {
                base_terms: vec![],
                eta_terms: vec![EtaForcingTerm {
                    profile: sine(1, 1.0),
                    amplitude: TemporalAmplitude::Constant { value: 1.0 },
                    scaling: EtaScaling::MovingBump {
                        mu: 0.5,
                        width: 1.0,
                    },
                }],
            },
            unit_weight(),
            mu_rule.unwrap_or(MuRule::Constant { value: 0.5 }),
            mu_zero.unwrap_or(0.5),
            length,
            l1,
        ),
        other => Err(Error::Descriptor(format!("unknown scenario '{other}'"))),
    }
}

/// Build a scenario with its default schedule and exponents.
pub fn default_family(name: &str, grid: Grid1D) -> Result<PerturbedFamily> {
    let def = find(name)?;
    build_family(name, grid, halving_schedule(def.default_eta_levels), None, None)
}

// ---------------------------------------------------------------------------
// Curated audit matrix
// ---------------------------------------------------------------------------

/// One case of the curated matrix: a family whose verdict for one condition
/// is analytically known.
#[derive(Debug, Clone)]
pub struct MatrixCase {
    pub label: &'static str,
    /// Condition id to audit (one of the ids the conditions module accepts).
    pub condition: &'static str,
    pub expect_pass: bool,
    pub family: PerturbedFamily,
}

/// Twelve families spanning every audited condition, each with a known
/// verdict: certificates that hold or are understated, tails that converge
/// or diverge, data that converge or stall, forcing mass that vanishes,
/// grows, or escapes backward, and exponents that keep or lose their floor.
pub fn audit_matrix(grid: Grid1D) -> Result<Vec<MatrixCase>> {
    let l1 = grid.first_eigenvalue(EigenvalueMode::Discrete);
    let length = grid.length();
    let halving = halving_schedule;

    // Workhorse: every datum perturbed at order eta, certificate verified.
    let converging = PerturbedFamily::new(
        halving(6),
        ViscosityRule {
            base: ViscosityDesc::Constant { value: 1.0 },
            eta_bump: Some(EtaBump {
                amplitude: 0.5,
                center: 0.3,
                width: 1.0,
                power: 1.0,
            }),
        },
        ReactionRule {
            base: ReactionDesc::odd_power(1.0, 4.0).with_certificate(GrowthCertificate {
                kappa1: 0.25,
                alpha1: 1.0,
                kappa2: 0.1,
                alpha2: 0.5,
            }),
            eta_offset: 0.2,
            eta_power: 1.0,
        },
        ForcingRule {
            base_terms: vec![ForcingTerm {
                profile: sine(1, 1.0),
                amplitude: TemporalAmplitude::Exponential {
                    coeff: 1.0,
                    rate: 0.25,
                },
            }],
            eta_terms: vec![EtaForcingTerm {
                profile: sine(2, 1.0),
                amplitude: TemporalAmplitude::Constant { value: 1.0 },
                scaling: EtaScaling::Power { k: 1.0 },
            }],
        },
        WeightRule {
            base: sine(1, 1.0),
            eta_term: Some((sine(2, 1.0), 1.0)),
        },
        MuRule::Affine {
            base: 0.8 * l1,
            slope: 0.05 * l1,
        },
        0.8 * l1,
        length,
        l1,
    )?;

    // alpha1 = 0.5 cannot dominate the cubic growth of f.
    let understated = PerturbedFamily::new(
        halving(4),
        plain_viscosity(),
        ReactionRule::fixed(ReactionDesc::odd_power(1.0, 4.0).with_certificate(
            GrowthCertificate {
                kappa1: 0.0,
                alpha1: 0.5,
                kappa2: 0.0,
                alpha2: 1.0,
            },
        )),
        ForcingRule::default(),
        unit_weight(),
        MuRule::Constant { value: l1 },
        l1,
        length,
        l1,
    )?;

    // ||h(s)||^2 ~ e^{-0.6 s} outruns e^{0.5 s}: the weighted tail diverges.
    let backward_growing = PerturbedFamily::new(
        halving(4),
        plain_viscosity(),
        ReactionRule::fixed(ReactionDesc::odd_power(1.0, 4.0)),
        ForcingRule {
            base_terms: vec![ForcingTerm {
                profile: sine(1, 1.0),
                amplitude: TemporalAmplitude::Exponential {
                    coeff: 1.0,
                    rate: -0.3,
                },
            }],
            eta_terms: vec![],
        },
        unit_weight(),
        MuRule::Constant { value: 0.5 },
        0.5,
        length,
        l1,
    )?;

    // power = 0: the viscosity bump never shrinks.
    let stuck_viscosity = PerturbedFamily::new(
        halving(5),
        ViscosityRule {
            base: ViscosityDesc::Constant { value: 1.0 },
            eta_bump: Some(EtaBump {
                amplitude: 0.5,
                center: 0.0,
                width: 1.0,
                power: 0.0,
            }),
        },
        ReactionRule::fixed(ReactionDesc::odd_power(1.0, 4.0)),
        ForcingRule {
            base_terms: vec![ForcingTerm {
                profile: sine(1, 1.0),
                amplitude: TemporalAmplitude::Exponential {
                    coeff: 1.0,
                    rate: 0.25,
                },
            }],
            eta_terms: vec![],
        },
        unit_weight(),
        MuRule::Constant { value: l1 },
        l1,
        length,
        l1,
    )?;

    // k = 0: a forcing offset that never shrinks; both convergence routes
    // fail.
    let stuck_forcing = PerturbedFamily::new(
        halving(5),
        plain_viscosity(),
        ReactionRule::fixed(ReactionDesc::odd_power(1.0, 4.0)),
        ForcingRule {
            base_terms: vec![ForcingTerm {
                profile: sine(1, 1.0),
                amplitude: TemporalAmplitude::Exponential {
                    coeff: 1.0,
                    rate: 0.25,
                },
            }],
            eta_terms: vec![EtaForcingTerm {
                profile: sine(2, 1.0),
                amplitude: TemporalAmplitude::Constant { value: 1.0 },
                scaling: EtaScaling::Power { k: 0.0 },
            }],
        },
        unit_weight(),
        MuRule::Constant { value: l1 },
        l1,
        length,
        l1,
    )?;

    // Amplitude eta^{-1/2}: squared tails grow like 1/eta.
    let growing_tails = PerturbedFamily::new(
        halving(6),
        plain_viscosity(),
        ReactionRule::fixed(ReactionDesc::odd_power(1.0, 4.0)),
        ForcingRule {
            base_terms: vec![],
            eta_terms: vec![EtaForcingTerm {
                profile: sine(1, 1.0),
                amplitude: TemporalAmplitude::Constant { value: 1.0 },
                scaling: EtaScaling::Power { k: -0.5 },
            }],
        },
        unit_weight(),
        MuRule::Constant { value: l1 },
        l1,
        length,
        l1,
    )?;

    // Exponents sliding to zero along the schedule.
    let sliding_mu = PerturbedFamily::new(
        halving(30),
        plain_viscosity(),
        ReactionRule::fixed(ReactionDesc::odd_power(1.0, 4.0)),
        ForcingRule::default(),
        unit_weight(),
        MuRule::Affine {
            base: 0.0,
            slope: 0.3,
        },
        l1,
        length,
        l1,
    )?;

    let nd16 = build_family("nd16_autonomous", grid, halving(6), None, None)?;
    let moving_bump =
        build_family("moving_bump_counterexample", grid, halving(8), None, None)?;

    Ok(vec![
        MatrixCase {
            label: "verified growth certificate",
            condition: "A1",
            expect_pass: true,
            family: converging.clone(),
        },
        MatrixCase {
            label: "understated growth certificate",
            condition: "A1",
            expect_pass: false,
            family: understated,
        },
        MatrixCase {
            label: "tempered backward tails",
            condition: "A2",
            expect_pass: true,
            family: converging.clone(),
        },
        MatrixCase {
            label: "backward-growing forcing",
            condition: "A2",
            expect_pass: false,
            family: backward_growing,
        },
        MatrixCase {
            label: "data converge at order eta",
            condition: "A3",
            expect_pass: true,
            family: converging.clone(),
        },
        MatrixCase {
            label: "viscosity bump never shrinks",
            condition: "A3",
            expect_pass: false,
            family: stuck_viscosity,
        },
        MatrixCase {
            label: "forcing converges strongly on windows",
            condition: "A4",
            expect_pass: true,
            family: converging,
        },
        MatrixCase {
            label: "forcing offset never shrinks",
            condition: "A4",
            expect_pass: false,
            family: stuck_forcing,
        },
        MatrixCase {
            label: "envelope exponent certified",
            condition: "A5",
            expect_pass: true,
            family: nd16,
        },
        MatrixCase {
            label: "tails grow as eta shrinks",
            condition: "tail-sup",
            expect_pass: false,
            family: growing_tails,
        },
        MatrixCase {
            label: "forcing mass escapes backward",
            condition: "tail-vanish",
            expect_pass: false,
            family: moving_bump,
        },
        MatrixCase {
            label: "exponent floor lost",
            condition: "mu-floor",
            expect_pass: false,
            family: sliding_mu,
        },
    ])
}
