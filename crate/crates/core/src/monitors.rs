//! Registry of monitored quantities and the statistics applied to their
//! time series: relative drift, refinement order, exponential envelope fits
//! and calibrated inequality audits.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // unused only when std is in the build graph
use num_traits::Float;

/// Determines which statistic a monitor is judged by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonitorKind {
    /// Judged by relative drift.
    Conserved,
    /// Judged by the size of a pointwise residual.
    IdentityResidual,
    /// Reports both sides of a differential inequality.
    InequalityAudit,
    /// Least-squares fit of `log` of the series against `t`.
    EnvelopeFit,
}

impl MonitorKind {
    pub fn label(self) -> &'static str {
        match self {
            MonitorKind::Conserved => "conserved",
            MonitorKind::IdentityResidual => "identity-residual",
            MonitorKind::InequalityAudit => "inequality-audit",
            MonitorKind::EnvelopeFit => "envelope-fit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonitorSpec {
    pub name: &'static str,
    pub kind: MonitorKind,
    /// Short pointer to the statement the monitor checks.
    pub anchor: &'static str,
    pub description: &'static str,
}

const fn spec(
    name: &'static str,
    kind: MonitorKind,
    anchor: &'static str,
    description: &'static str,
) -> MonitorSpec {
    MonitorSpec {
        name,
        kind,
        anchor,
        description,
    }
}

use crate::math;
use MonitorKind::{Conserved, EnvelopeFit as Envelope, IdentityResidual, InequalityAudit};

pub const REGISTRY: [MonitorSpec; 21] = [
    spec("E1", Conserved, "free Dirac: L2 energy", "½∫|ψ|²_β"),
    spec(
        "E2",
        Conserved,
        "free Dirac: wave energy of the density",
        "wave energy of |ψ|²_β",
    ),
    spec(
        "E3",
        Conserved,
        "free Dirac: gradient energy",
        "½∫(|∂_tψ|²_β + |∂_xψ|²_β)",
    ),
    spec(
        "E4",
        Conserved,
        "free Dirac: quartic energy",
        "∫(|ψ|⁴_β + ⟨∂_x·ψ,ψ⟩²)",
    ),
    spec(
        "E5",
        Conserved,
        "free Dirac: wave energy of e(ψ)",
        "wave energy of the gradient density",
    ),
    spec(
        "E6_hat",
        Conserved,
        "massive Dirac: Klein-Gordon energy",
        "½∫(|∇ψ|²_β + λ²|ψ|²_β)",
    ),
    spec(
        "tilde_E1",
        Conserved,
        "twisted Dirac: L2 energy",
        "½∫|ψ|²_β for D^Fψ = λψ",
    ),
    spec(
        "tilde_E2",
        Conserved,
        "twisted Dirac: wave energy of the density",
        "wave energy of |ψ|²_β",
    ),
    spec(
        "tilde_E3_audit",
        InequalityAudit,
        "twisted Dirac: curvature-forced gradient energy",
        "dẼ3/dt against Ẽ3 + ½‖ψ‖²_∞‖R‖²",
    ),
    spec(
        "tilde_E4",
        Conserved,
        "twisted Dirac: quartic energy",
        "∫(|ψ|⁴_β + ⟨∂_x·ψ,ψ⟩²)",
    ),
    spec("thirring_E1", Conserved, "Thirring: L2 energy", "½∫|ψ|²_β"),
    spec(
        "thirring_box",
        IdentityResidual,
        "Thirring: wave equation for the density",
        "□|ψ|²_β + 2λ∂_x s",
    ),
    spec(
        "thirring_L6",
        IdentityResidual,
        "Thirring: sextic balance law",
        "d/dt∫(ρ³/3 + w²ρ) + 4λ∫ρws",
    ),
    spec(
        "thirring_H1_envelope",
        Envelope,
        "Thirring: H1 growth",
        "log ∫(|∂_tψ|² + |∂_xψ|²) against t",
    ),
    spec(
        "E_DW",
        Conserved,
        "Dirac-wave map: total energy",
        "½∫(|φ_t|² + |φ_x|² + Re⟨ψ, iγ_t∇̃_tψ⟩)",
    ),
    spec(
        "box_e_phi",
        IdentityResidual,
        "Dirac-wave map: wave equation for e(φ)",
        "□e(φ) − ½(∂_t²B_x − ∂_x²B_t)",
    ),
    spec(
        "T_divergence",
        IdentityResidual,
        "Dirac-wave map: energy-momentum divergence",
        "∂_tT_tj − ∂_xT_xj",
    ),
    spec(
        "E_psi_1_2_audit",
        InequalityAudit,
        "Dirac-wave map: spinor gradient energy",
        "dE/dt against C(E + E^½)",
    ),
    spec(
        "E_psi_1_4",
        Conserved,
        "free vector spinor: quartic gradient energy",
        "∫(|a_t|⁴ + |a_x|⁴ + 2|a_t|²|a_x|² + 4|⟨γ_t a_x, a_t⟩|²)",
    ),
    spec(
        "E_phi_2_2_audit",
        InequalityAudit,
        "Dirac-wave map: second derivatives of the map",
        "dE/dt against C(E∫e + E + ∫(|ψ|² + |∇ψ|⁴))",
    ),
    spec(
        "gronwall_envelope",
        Envelope,
        "Dirac-wave map: difference of two solutions",
        "log ∫(|η|²_β + |w|² + |dw|²) against t",
    ),
];

pub fn lookup(name: &str) -> Option<&'static MonitorSpec> {
    REGISTRY.iter().find(|m| m.name == name)
}

/// Relative drift `max_t |E(t) − E(0)| / max(|E(0)|, 1e-300)`.
pub fn relative_drift(values: &[f64]) -> f64 {
    let Some(&e0) = values.first() else {
        return 0.0;
    };
    let worst = values.iter().fold(0.0_f64, |m, &e| m.max((e - e0).abs()));
    worst / e0.abs().max(DRIFT_FLOOR)
}

pub const DRIFT_FLOOR: f64 = 1e-300;

/// Statistics at or below this level count as round-off.
pub const EXACT_LEVEL: f64 = 1e-12;

/// Observed convergence of a statistic under grid refinement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Convergence {
    Order(f64),
    /// The statistic is at round-off on the refined grid (or both grids).
    Exact,
}

impl Convergence {
    /// `order ≥ lo`, or exact.
    pub fn at_least(self, lo: f64) -> bool {
        match self {
            Convergence::Exact => true,
            Convergence::Order(p) => p >= lo,
        }
    }

    pub fn within(self, lo: f64, hi: f64) -> bool {
        match self {
            Convergence::Exact => true,
            Convergence::Order(p) => (lo..=hi).contains(&p),
        }
    }
}

impl fmt::Display for Convergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Convergence::Exact => write!(f, "exact"),
            Convergence::Order(p) => write!(f, "{p:.3}"),
        }
    }
}

/// `log2(coarse / fine)` for statistics from a grid and its refinement.
pub fn refinement_order(coarse: f64, fine: f64) -> Convergence {
    if fine.abs() <= EXACT_LEVEL || coarse.abs() <= EXACT_LEVEL {
        Convergence::Exact
    } else {
        Convergence::Order((coarse.abs() / fine.abs()).log2())
    }
}

/// Orders between consecutive levels of a refinement sequence.
pub fn refinement_orders(stats: &[f64]) -> Vec<Convergence> {
    stats
        .windows(2)
        .map(|w| refinement_order(w[0], w[1]))
        .collect()
}

/// A named time series.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub name: String,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, t: f64, v: f64) {
        self.t.push(t);
        self.values.push(v);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn drift(&self) -> f64 {
        relative_drift(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn value_at(&self, t: f64) -> Option<f64> {
        let i = self
            .t
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))?;
        Some(self.values[i])
    }
}

/// Least-squares line through `(t, log y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// First time included in the fit.
    pub t_start: f64,
    /// Largest excess of `log y` over the fitted line inside the window.
    pub max_excess: f64,
}

impl EnvelopeFit {
    pub fn envelope(&self, t: f64) -> f64 {
        math::exp(self.intercept + self.rate * t)
    }
}

/// Fits `log y = a + c t` over the second half of the series. `None` when
/// fewer than three positive finite samples remain.
pub fn fit_log_envelope(t: &[f64], y: &[f64]) -> Option<EnvelopeFit> {
    let start = t.len() / 2;
    let pts: Vec<(f64, f64)> = t[start..]
        .iter()
        .zip(&y[start..])
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(&s, &v)| (s, math::ln(v)))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if stt == 0.0 {
        return None;
    }
    let rate = sty / stt;
    let intercept = my - rate * mt;
    let sse: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - intercept - rate * p.0;
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let max_excess = pts
        .iter()
        .map(|p| p.1 - intercept - rate * p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Some(EnvelopeFit {
        rate,
        intercept,
        r_squared,
        t_start: pts[0].0,
        max_excess,
    })
}

/// One sample of a differential inequality `dE/dt ≤ C·shape(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateRecord {
    pub t: f64,
    pub rate: f64,
    pub shape: f64,
}

/// Result of auditing `dE/dt ≤ C·shape`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditOutcome {
    /// Constant calibrated on the opening window, times the safety factor.
    pub constant: f64,
    /// Smallest constant for which every record holds.
    pub min_constant: f64,
    pub violations: usize,
    pub records: usize,
}

impl AuditOutcome {
    pub fn pass(&self) -> bool {
        self.records > 0 && self.violations == 0
    }
}

/// Calibrates `C` as `safety · max(rate/shape)` over the first
/// `window_fraction` of the records (at least `floor`), then checks every
/// record against it. Non-finite records count as violations.
pub fn audit_inequality(
    records: &[RateRecord],
    window_fraction: f64,
    safety: f64,
    floor: f64,
) -> AuditOutcome {
    let ratio = |r: &RateRecord| {
        if r.rate <= 0.0 {
            0.0
        } else if r.shape > 0.0 {
            r.rate / r.shape
        } else {
            f64::INFINITY
        }
    };
    let window = ((records.len() as f64 * window_fraction).ceil() as usize)
        .clamp(1.min(records.len()), records.len());
    let calibrated = records[..window]
        .iter()
        .map(ratio)
        .fold(0.0, f64::max)
        .max(floor)
        * safety;
    let mut min_constant = 0.0_f64;
    let mut violations = 0;
    for r in records {
        let c = ratio(r);
        let finite = r.rate.is_finite() && r.shape.is_finite();
        if !finite || c > calibrated {
            violations += 1;
        }
        min_constant = min_constant.max(if finite { c } else { f64::INFINITY });
    }
    AuditOutcome {
        constant: calibrated,
        min_constant,
        violations,
        records: records.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Reported without a pass/fail rule.
    Info,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Info => "INFO",
        })
    }
}

/// One summary line of a report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportEntry {
    pub name: String,
    pub kind: MonitorKind,
    /// Drift, largest residual, calibrated constant or fitted rate, by kind.
    pub statistic: f64,
    pub order: Option<Convergence>,
    pub verdict: Verdict,
    pub note: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyReport {
    pub metadata: Vec<(String, String)>,
    /// Output times shared by every series.
    pub rows: Vec<f64>,
    pub series: Vec<Series>,
    pub entries: Vec<ReportEntry>,
}

impl EnergyReport {
    pub fn entry(&self, name: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }
}

impl fmt::Display for EnergyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.metadata {
            writeln!(f, "{k}: {v}")?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "{:<22} {:<18} {:>14} {:>8} {:>7}  note",
            "monitor", "kind", "statistic", "order", "verdict"
        )?;
        for e in &self.entries {
            let order = e
                .order
                .map_or_else(|| String::from("-"), |o| alloc::format!("{o}"));
            writeln!(
                f,
                "{:<22} {:<18} {:>14.6e} {:>8} {:>7}  {}",
                e.name,
                e.kind.label(),
                e.statistic,
                order,
                e.verdict,
                e.note
            )?;
        }
        Ok(())
    }
}
