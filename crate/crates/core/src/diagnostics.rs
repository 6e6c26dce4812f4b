//! Monitored quantities of a flow state, identity residuals over a run
//! history, the multi-scale concentration functional and the 4×4 matrix
//! inequality `|(H - tr H · I) v|² ≤ 3 |H|² |v|²`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::flow::{rhs_projection, FlowParams, FlowState};
use crate::lattice::{Grid4, Jet, MapField, WindowStencil};
use crate::target::SphereTarget;

/// Column order of `diag.csv`.
pub const CSV_COLUMNS: [&str; 15] = [
    "t",
    "energy",
    "dissipation",
    "volume",
    "u_min",
    "u_max",
    "df4",
    "hess2",
    "lap2",
    "concentration",
    "drift",
    "sobolev_ratio",
    "e8u",
    "e12u",
    "e16u",
];

/// Column order of the extended diagnostics file.
pub const EXT_CSV_COLUMNS: [&str; 8] = [
    "t",
    "density_p2",
    "density_p3",
    "density_p4",
    "ft3",
    "ft4",
    "concentration_min_radius",
    "flag",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationConfig {
    pub radii: Vec<f64>,
    /// Lattice stride between window centres; `None` means `n / 4`.
    pub stride: Option<usize>,
    pub epsilon1: f64,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self {
            radii: vec![PI / 8.0, PI / 4.0, PI / 2.0],
            stride: None,
            epsilon1: 0.1,
        }
    }
}

impl ConcentrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0 && *r <= PI)) {
            return Err(Error::InvalidParam("concentration radii must lie in (0, pi]".into()));
        }
        if !(self.epsilon1 > 0.0) {
            return Err(Error::InvalidParam("epsilon1 must be positive".into()));
        }
        if self.stride == Some(0) {
            return Err(Error::InvalidParam("concentration stride must be positive".into()));
        }
        Ok(())
    }

    fn stride_for(&self, grid: &Grid4) -> usize {
        self.stride.unwrap_or(grid.n() / 4).max(1)
    }

    fn sorted_radii(&self) -> Vec<f64> {
        let mut r = self.radii.clone();
        r.sort_by(|a, b| a.total_cmp(b));
        r.dedup();
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concentration {
    pub value: f64,
    pub center: [f64; 4],
    pub center_index: [usize; 4],
    pub radius: f64,
    /// Largest window integral over the centres, per radius (ascending).
    pub profile: Vec<(f64, f64)>,
    /// Raised when the smallest radius already exceeds `epsilon1`.
    pub flagged: bool,
    /// Whether every centre's integral was non-decreasing in the radius.
    pub scale_monotone: bool,
}

/// Maximum over window centres and radii of `∫ D φ⁴` for the density `D`.
/// Ties go to the smallest radius, then the lexicographically first centre.
pub fn concentration(grid: &Grid4, density: &[f64], config: &ConcentrationConfig) -> Result<Concentration> {
    config.validate()?;
    let radii = config.sorted_radii();
    let stencils = radii
        .iter()
        .map(|&r| WindowStencil::new(grid, r))
        .collect::<Result<Vec<_>>>()?;
    let stride = config.stride_for(grid);
    let steps: Vec<usize> = (0..grid.n()).step_by(stride).collect();
    let mut centers = Vec::with_capacity(steps.len().pow(4));
    for &a in &steps {
        for &b in &steps {
            for &c in &steps {
                for &d in &steps {
                    centers.push([a, b, c, d]);
                }
            }
        }
    }

    let mut best = (f64::NEG_INFINITY, [0usize; 4], radii[0]);
    let mut profile = Vec::with_capacity(radii.len());
    let mut values = vec![0.0; centers.len()];
    let mut scale_monotone = true;
    for (ri, (stencil, &r)) in stencils.iter().zip(&radii).enumerate() {
        let mut layer_max = f64::NEG_INFINITY;
        for (ci, c) in centers.iter().enumerate() {
            let v = stencil.integrate_at(grid, density, *c);
            if ri > 0 && v < values[ci] * (1.0 - 1e-12) {
                scale_monotone = false;
            }
            values[ci] = v;
            if v > best.0 {
                best = (v, *c, r);
            }
            layer_max = layer_max.max(v);
        }
        profile.push((r, layer_max));
    }
    let h = grid.h();
    let idx = best.1;
    Ok(Concentration {
        value: best.0,
        center: [idx[0] as f64 * h, idx[1] as f64 * h, idx[2] as f64 * h, idx[3] as f64 * h],
        center_index: idx,
        radius: best.2,
        flagged: profile[0].1 > config.epsilon1,
        profile,
        scale_monotone,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagRecord {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub volume: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub df4: f64,
    pub hess2: f64,
    pub lap2: f64,
    pub concentration: f64,
    pub drift: f64,
    pub sobolev_ratio: f64,
    /// `∫e^{8u}, ∫e^{12u}, ∫e^{16u}`.
    pub epu: [f64; 3],
    /// `∫D², ∫D³, ∫D⁴` (extended file only).
    pub density_moments: [f64; 3],
    /// `∫|f_t|³, ∫|f_t|⁴` (extended file only).
    pub ft_moments: [f64; 2],
    pub concentration_min_radius: f64,
    pub flagged: bool,
    pub scale_monotone: bool,
}

/// All monitored quantities of `state`, with `f_t` the flow velocity at
/// the same state.
pub fn record(
    grid: &Grid4,
    state: &FlowState,
    f_t: &MapField,
    config: &ConcentrationConfig,
) -> Result<DiagRecord> {
    let f = &state.f;
    let u = &state.conformal.u;
    let jet = Jet::first_and_second(grid, f);
    let df_sq = jet.df_sq();
    let hess_sq = jet.hessian_sq();
    let l = f.ambient_dim();
    let mut lap_sq = vec![0.0; grid.len()];
    for a in 0..l {
        for (o, v) in lap_sq.iter_mut().zip(jet.hessian_trace(a)) {
            *o += v * v;
        }
    }
    let df4: Vec<f64> = df_sq.iter().map(|s| s * s).collect();
    let density: Vec<f64> = hess_sq.iter().zip(&df4).map(|(a, b)| a + b).collect();

    let e4u: Vec<f64> = u.values.iter().map(|v| (4.0 * v).exp()).collect();
    let ft_sq = f_t.norms_sq().values;
    let integ = |g: &dyn Fn(usize) -> f64| grid.integrate_slice(&(0..grid.len()).map(g).collect::<Vec<_>>());

    let lap2 = grid.integrate_slice(&lap_sq);
    let hess2 = grid.integrate_slice(&hess_sq);
    let df4_int = grid.integrate_slice(&df4);
    let conc = concentration(grid, &density, config)?;
    Ok(DiagRecord {
        t: state.t,
        energy: 0.5 * lap2,
        dissipation: integ(&|i| e4u[i] * ft_sq[i]),
        volume: grid.integrate_slice(&e4u),
        u_min: u.min(),
        u_max: u.max(),
        df4: df4_int,
        hess2,
        lap2,
        concentration: conc.value,
        drift: state.last_drift,
        sobolev_ratio: df4_int / (1.0 + lap2 * lap2),
        epu: [
            integ(&|i| e4u[i].powi(2)),
            integ(&|i| e4u[i].powi(3)),
            integ(&|i| e4u[i].powi(4)),
        ],
        density_moments: [
            integ(&|i| density[i].powi(2)),
            integ(&|i| density[i].powi(3)),
            integ(&|i| density[i].powi(4)),
        ],
        ft_moments: [
            integ(&|i| ft_sq[i].powf(1.5)),
            integ(&|i| ft_sq[i] * ft_sq[i]),
        ],
        concentration_min_radius: conc.profile[0].1,
        flagged: conc.flagged,
        scale_monotone: conc.scale_monotone,
    })
}

/// [`record`] with `f_t = -e^{-4u} P(f) Δ²f` computed from the state.
pub fn observe(
    grid: &Grid4,
    target: &SphereTarget,
    state: &FlowState,
    config: &ConcentrationConfig,
) -> Result<DiagRecord> {
    let f_t = rhs_projection(grid, target, &state.f, state.u())?;
    record(grid, state, &f_t, config)
}

impl DiagRecord {
    pub fn csv_header() -> String {
        CSV_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.csv_values()
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    fn csv_values(&self) -> [f64; 15] {
        [
            self.t,
            self.energy,
            self.dissipation,
            self.volume,
            self.u_min,
            self.u_max,
            self.df4,
            self.hess2,
            self.lap2,
            self.concentration,
            self.drift,
            self.sobolev_ratio,
            self.epu[0],
            self.epu[1],
            self.epu[2],
        ]
    }

    /// Parses one `diag.csv` row. Extended-only fields come back as zero.
    pub fn from_csv_row(row: &str) -> Result<Self> {
        let v = row
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidParam(format!("bad diag row: {e}")))?;
        if v.len() != CSV_COLUMNS.len() {
            return Err(Error::InvalidParam(format!(
                "diag row has {} fields, expected {}",
                v.len(),
                CSV_COLUMNS.len()
            )));
        }
        Ok(Self {
            t: v[0],
            energy: v[1],
            dissipation: v[2],
            volume: v[3],
            u_min: v[4],
            u_max: v[5],
            df4: v[6],
            hess2: v[7],
            lap2: v[8],
            concentration: v[9],
            drift: v[10],
            sobolev_ratio: v[11],
            epu: [v[12], v[13], v[14]],
            density_moments: [0.0; 3],
            ft_moments: [0.0; 2],
            concentration_min_radius: 0.0,
            flagged: false,
            scale_monotone: true,
        })
    }

    pub fn ext_csv_header() -> String {
        EXT_CSV_COLUMNS.join(",")
    }

    pub fn ext_csv_row(&self) -> String {
        let vals = [
            self.t,
            self.density_moments[0],
            self.density_moments[1],
            self.density_moments[2],
            self.ft_moments[0],
            self.ft_moments[1],
            self.concentration_min_radius,
        ];
        let mut s = vals
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",");
        s.push_str(if self.flagged { ",1" } else { ",0" });
        s
    }

    /// `|hess2 - lap2| / max(lap2, tiny)`.
    pub fn flat_identity_defect(&self) -> f64 {
        (self.hess2 - self.lap2).abs() / self.lap2.max(f64::MIN_POSITIVE)
    }
}

/// `|(E₁ - E₀)/(t₁ - t₀) + (diss₀ + diss₁)/2|`.
pub fn energy_identity_residual(prev: &DiagRecord, next: &DiagRecord) -> Result<f64> {
    let dt = next.t - prev.t;
    if !(dt > 0.0) {
        return Err(Error::InvalidParam(format!(
            "records must be strictly increasing in time ({} then {})",
            prev.t, next.t
        )));
    }
    Ok(((next.energy - prev.energy) / dt + 0.5 * (prev.dissipation + next.dissipation)).abs())
}

/// Largest relative residual over the history of
///
/// ```text
/// V(t) = e^{-4at} V(0) + 4b e^{-4at} ∫₀ᵗ e^{4as} (hess2 + df4)(s) ds,
/// ```
///
/// the time integral taken by the trapezoid rule over consecutive records.
/// Exact for the quadrature route when every step is recorded.
pub fn volume_identity_residual(history: &[DiagRecord], params: &FlowParams) -> f64 {
    let Some(first) = history.first() else {
        return 0.0;
    };
    let (a, b) = (params.a, params.b);
    let t0 = first.t;
    let mut integral = 0.0;
    let mut worst: f64 = 0.0;
    for k in 1..history.len() {
        let (p, q) = (&history[k - 1], &history[k]);
        let wp = (4.0 * a * (p.t - t0)).exp();
        let wq = (4.0 * a * (q.t - t0)).exp();
        integral += 0.5 * (q.t - p.t) * (wp * (p.hess2 + p.df4) + wq * (q.hess2 + q.df4));
        let decay = (-4.0 * a * (q.t - t0)).exp();
        let predicted = decay * (first.volume + 4.0 * b * integral);
        worst = worst.max((q.volume - predicted).abs() / q.volume.abs().max(f64::MIN_POSITIVE));
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpuReport {
    pub p: u32,
    pub constant: f64,
    /// Smallest `slack · rhs - lhs` over the history; negative means a violation.
    pub margin: f64,
    pub holds: bool,
    /// `(t, ∫e^{4pu}(t) - ∫e^{4pu}(t₀), constant · ∫∫D^p)` per record.
    pub samples: Vec<(f64, f64, f64)>,
}

pub const EPU_SLACK: f64 = 1.1;

/// Checks `∫e^{4pu}(t) - ∫e^{4pu}(t₀) ≤ 4(p-1)b²/(pa) ∫∫D^p` along the
/// history for `p ∈ {2, 3, 4}`, with the time integral by trapezoid.
pub fn epu_growth_check(history: &[DiagRecord], p: u32, params: &FlowParams) -> Result<EpuReport> {
    if !(2..=4).contains(&p) {
        return Err(Error::InvalidParam(format!("p = {p} outside {{2, 3, 4}}")));
    }
    let i = (p - 2) as usize;
    let pf = p as f64;
    let constant = 4.0 * (pf - 1.0) * params.b * params.b / (pf * params.a);
    let mut samples = Vec::with_capacity(history.len());
    let mut margin = f64::INFINITY;
    if let Some(first) = history.first() {
        let mut integral = 0.0;
        for k in 0..history.len() {
            if k > 0 {
                let (a, b) = (&history[k - 1], &history[k]);
                integral += 0.5 * (b.t - a.t) * (a.density_moments[i] + b.density_moments[i]);
            }
            let r = &history[k];
            let lhs = r.epu[i] - first.epu[i];
            let rhs = constant * integral;
            margin = margin.min(EPU_SLACK * rhs - lhs);
            samples.push((r.t, lhs, rhs));
        }
    }
    Ok(EpuReport {
        p,
        constant,
        holds: margin >= 0.0,
        margin,
        samples,
    })
}

/// `(|Mv|², 3 |H|_F² |v|²)` with `M = H - tr(H) I`.
pub fn matrix_lemma_check(h: &[[f64; 4]; 4], v: &[f64; 4]) -> (f64, f64) {
    let tr = h[0][0] + h[1][1] + h[2][2] + h[3][3];
    let mut lhs = 0.0;
    let mut frob = 0.0;
    for i in 0..4 {
        let mut mv = -tr * v[i];
        for j in 0..4 {
            mv += h[i][j] * v[j];
            frob += h[i][j] * h[i][j];
        }
        lhs += mv * mv;
    }
    let v2: f64 = v.iter().map(|x| x * x).sum();
    (lhs, 3.0 * frob * v2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{step, FlowState};
    use crate::init::{generate_initial, InitSpec};
    use crate::lattice::TORUS_VOLUME;
    use crate::target::SphereTarget;
    use proptest::prelude::*;

    fn setup(n: usize) -> (Grid4, SphereTarget) {
        (Grid4::new(n, 3).unwrap(), SphereTarget::new(3).unwrap())
    }

    #[test]
    fn great_circle_record() {
        let (g, t) = setup(8);
        let f = generate_initial(&g, &t, &InitSpec::Circle(1), 0).unwrap();
        let s = FlowState::new(&g, f);
        let r = observe(&g, &t, &s, &ConcentrationConfig::default()).unwrap();
        let v = TORUS_VOLUME;
        assert!((v - 1558.5455).abs() < 1e-4);
        assert!((r.energy - 779.2727).abs() < 1e-4);
        assert!(r.dissipation.abs() <= 1e-16 * v);
        for q in [r.volume, r.hess2, r.lap2, r.df4] {
            assert!((q - v).abs() <= 1e-10 * v);
        }
        assert!(r.flat_identity_defect() <= 1e-12);
        assert!(r.sobolev_ratio.is_finite());
    }

    #[test]
    fn constant_map_record() {
        let (g, t) = setup(8);
        let f = generate_initial(&g, &t, &InitSpec::Constant, 0).unwrap();
        let p = FlowParams::default();
        let mut s = FlowState::new(&g, f);
        for _ in 0..5 {
            s = step(&g, &t, &s, &p).unwrap();
        }
        let r = observe(&g, &t, &s, &ConcentrationConfig::default()).unwrap();
        assert_eq!([r.energy, r.dissipation, r.df4, r.hess2, r.concentration], [0.0; 5]);
        let expected = TORUS_VOLUME * (-4.0 * p.a * s.t).exp();
        assert!((r.volume - expected).abs() <= 1e-13 * expected);
        assert!(!r.flagged);
    }

    #[test]
    fn csv_round_trip() {
        let (g, t) = setup(8);
        let f = generate_initial(&g, &t, &InitSpec::Circle(2), 0).unwrap();
        let r = observe(&g, &t, &FlowState::new(&g, f), &ConcentrationConfig::default()).unwrap();
        let row = r.csv_row();
        assert_eq!(row.split(',').count(), 15);
        assert_eq!(DiagRecord::csv_header().split(',').count(), 15);
        let back = DiagRecord::from_csv_row(&row).unwrap();
        assert_eq!(back.csv_values(), r.csv_values());
        assert_eq!(r.ext_csv_row().split(',').count(), EXT_CSV_COLUMNS.len());
    }

    #[test]
    fn great_circle_concentration_ties_resolve_to_origin() {
        let (g, t) = setup(8);
        let f = generate_initial(&g, &t, &InitSpec::Circle(1), 0).unwrap();
        let d = crate::flow::density(&g, &f);
        let cfg = ConcentrationConfig {
            radii: vec![PI / 2.0],
            ..ConcentrationConfig::default()
        };
        let c = concentration(&g, &d.values, &cfg).unwrap();
        let mass = WindowStencil::new(&g, PI / 2.0).unwrap().mass(&g);
        assert!((c.value - 2.0 * mass).abs() <= 1e-12 * c.value);
        assert_eq!(c.center_index, [0, 0, 0, 0]);
        assert!(c.scale_monotone);
    }

    #[test]
    fn concentration_profile_grows_with_radius() {
        let (g, t) = setup(8);
        let f = generate_initial(
            &g,
            &t,
            &InitSpec::RandomBandlimited { mode_cap: 2, amplitude: 0.5 },
            9,
        )
        .unwrap();
        let d = crate::flow::density(&g, &f);
        let c = concentration(&g, &d.values, &ConcentrationConfig::default()).unwrap();
        assert!(c.scale_monotone);
        assert!(c.profile.windows(2).all(|w| w[1].1 >= w[0].1));
        assert_eq!(c.radius, PI / 2.0);
    }

    #[test]
    fn energy_residual_rejects_non_increasing_time() {
        let (g, t) = setup(8);
        let f = generate_initial(&g, &t, &InitSpec::Circle(1), 0).unwrap();
        let r = observe(&g, &t, &FlowState::new(&g, f), &ConcentrationConfig::default()).unwrap();
        assert!(energy_identity_residual(&r, &r).is_err());
    }

    #[test]
    fn matrix_lemma_examples() {
        let mut id = [[0.0; 4]; 4];
        for (i, row) in id.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let v = [1.0, -2.0, 0.5, 3.0];
        let v2: f64 = v.iter().map(|x| x * x).sum();
        let (l, r) = matrix_lemma_check(&id, &v);
        assert!((l - 9.0 * v2).abs() < 1e-12 && (r - 12.0 * v2).abs() < 1e-12);
        let mut e = [[0.0; 4]; 4];
        e[0][0] = 1.0;
        assert_eq!(matrix_lemma_check(&e, &[1.0, 0.0, 0.0, 0.0]), (0.0, 3.0));
    }

    proptest! {
        #[test]
        fn matrix_lemma_holds(h in prop::array::uniform4(prop::array::uniform4(-10.0f64..10.0)),
                              v in prop::array::uniform4(-10.0f64..10.0)) {
            let (l, r) = matrix_lemma_check(&h, &v);
            prop_assert!(l <= r * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn epu_rejects_unsupported_power() {
        assert!(epu_growth_check(&[], 5, &FlowParams::default()).is_err());
    }
}
