use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Grid4, Jet, MapField, ScalarField};
use crate::target::{
    d2_tangential, d_tangential, second_fundamental_form_unchecked, tangential_field_unchecked,
    SphereTarget, MIN_PROJECTABLE_NORM,
};

/// `D = |∇df|² + |df|⁴`.
pub fn density(grid: &Grid4, f: &MapField) -> ScalarField {
    ScalarField {
        values: Jet::first_and_second(grid, f).density(),
    }
}

/// `½ ∫ |Δf|²`.
pub fn bienergy(grid: &Grid4, f: &MapField) -> f64 {
    let lap = grid.laplacian(f);
    0.5 * grid.integrate(&lap.norms_sq())
}

fn conformal_weight(u: &ScalarField) -> ScalarField {
    u.map(|v| (-4.0 * v).exp())
}

/// `P(f) Δ²f`, the tangential part of the bilaplacian.
pub fn tangential_bilaplacian(grid: &Grid4, target: &SphereTarget, f: &MapField) -> Result<MapField> {
    target.check_field(f)?;
    Ok(tangential_field_unchecked(f, &grid.bilaplacian(f)))
}

/// `f_t = -e^{-4u} P(f) Δ²f`. For maps into the sphere the normal term `B`
/// is exactly the normal part of `Δ²f`, so this equals the full right-hand
/// side and is tangent by construction.
pub fn rhs_projection(
    grid: &Grid4,
    target: &SphereTarget,
    f: &MapField,
    u: &ScalarField,
) -> Result<MapField> {
    let t = tangential_bilaplacian(grid, target, f)?;
    Ok(t.scale_by(&conformal_weight(u)).scale(-1.0))
}

/// Right-hand side on an intermediate Runge–Kutta stage, where `f` is only
/// near the sphere: projects onto the tangent space at `f/|f|`.
pub(crate) fn stage_rhs(grid: &Grid4, f: &MapField, u: &ScalarField, t: f64) -> Result<MapField> {
    let norms = f.norms();
    let min_norm = norms.min();
    if !(min_norm >= MIN_PROJECTABLE_NORM) {
        return Err(Error::SphereDeparture { t, min_norm });
    }
    let y = MapField {
        components: f
            .components
            .iter()
            .map(|c| c.iter().zip(&norms.values).map(|(v, r)| v / r).collect())
            .collect(),
    };
    let t = tangential_field_unchecked(&y, &grid.bilaplacian(f));
    Ok(t.scale_by(&conformal_weight(u)).scale(-1.0))
}

/// `B = Δ(A(df,df)) - ⟨Δf, ΔP⟩ + 2∇⟨Δf, ∇P⟩`, every term assembled from
/// spectral derivatives and the sphere closed forms:
///
/// ```text
/// A(df,df)   = Σᵢ A(f)(fᵢ, fᵢ)
/// (∂ᵢP) v    = dP(f)[fᵢ] v
/// (ΔP) v     = Σᵢ d²P(f)[fᵢ, fᵢ] v + dP(f)[Δf] v
/// ```
pub(crate) fn explicit_normal_term(grid: &Grid4, f: &MapField) -> MapField {
    let l = f.ambient_dim();
    let len = grid.len();
    let hats: Vec<_> = f.components.iter().map(|c| grid.forward(c)).collect();
    let df: Vec<Vec<Vec<f64>>> = (0..4)
        .map(|i| {
            hats.iter()
                .map(|h| grid.apply_symbol(h, |k| Complex64::new(0.0, k[i])))
                .collect()
        })
        .collect();
    let lap: Vec<Vec<f64>> = hats
        .iter()
        .map(|h| grid.apply_symbol(h, |k| Complex64::new(-ksq(k), 0.0)))
        .collect();
    drop(hats);

    let mut a_term = vec![vec![0.0; len]; l];
    let mut p_term = vec![vec![0.0; len]; l];
    let mut w_term = vec![vec![vec![0.0; len]; l]; 4];
    let mut y = vec![0.0; l];
    let mut v = vec![0.0; l];
    let mut fi = vec![vec![0.0; l]; 4];
    let mut tmp = vec![0.0; l];
    for idx in 0..len {
        for a in 0..l {
            y[a] = f.components[a][idx];
            v[a] = lap[a][idx];
            for i in 0..4 {
                fi[i][a] = df[i][a][idx];
            }
        }
        let mut acc_a = vec![0.0; l];
        let mut acc_p = vec![0.0; l];
        for (i, fii) in fi.iter().enumerate() {
            second_fundamental_form_unchecked(&y, fii, fii, &mut tmp);
            acc_a.iter_mut().zip(&tmp).for_each(|(o, x)| *o += x);
            d2_tangential(fii, fii, &v, &mut tmp);
            acc_p.iter_mut().zip(&tmp).for_each(|(o, x)| *o += x);
            d_tangential(&y, fii, &v, &mut tmp);
            for a in 0..l {
                w_term[i][a][idx] = tmp[a];
            }
        }
        d_tangential(&y, &v, &v, &mut tmp);
        for a in 0..l {
            a_term[a][idx] = acc_a[a];
            p_term[a][idx] = acc_p[a] + tmp[a];
        }
    }

    let components = (0..l)
        .map(|a| {
            let mut total = grid.forward(&a_term[a]);
            grid.multiply_symbol(&mut total, |k| Complex64::new(-ksq(k), 0.0));
            for (i, w) in w_term.iter().enumerate() {
                let mut wh = grid.forward(&w[a]);
                grid.multiply_symbol(&mut wh, |k| Complex64::new(0.0, 2.0 * k[i]));
                total.iter_mut().zip(&wh).for_each(|(o, x)| *o += x);
            }
            let mut b = grid.inverse_real(total);
            b.iter_mut().zip(&p_term[a]).for_each(|(o, p)| *o -= p);
            b
        })
        .collect();
    MapField { components }
}

/// Normal part `⟨Δ²f, y⟩ y` of `Δ²f` at `y = f/|f|`. Equal to `B` on the
/// sphere in the continuum; differs from the term-by-term assembly by
/// product aliasing on coarse grids.
pub(crate) fn projected_normal_term(grid: &Grid4, f: &MapField) -> MapField {
    let bl = grid.bilaplacian(f);
    let norms = f.norms();
    let l = f.ambient_dim();
    let mut out = MapField {
        components: vec![vec![0.0; grid.len()]; l],
    };
    for idx in 0..grid.len() {
        let r = norms.values[idx].max(MIN_PROJECTABLE_NORM);
        let c: f64 = (0..l).map(|a| bl.components[a][idx] * f.components[a][idx]).sum::<f64>() / (r * r);
        for a in 0..l {
            out.components[a][idx] = c * f.components[a][idx];
        }
    }
    out
}

#[inline]
fn ksq(k: [f64; 4]) -> f64 {
    k[0] * k[0] + k[1] * k[1] + k[2] * k[2] + k[3] * k[3]
}

/// `e^{-4u}(-Δ²f + B)` with `B` assembled term by term; an independent
/// route to [`rhs_projection`].
pub fn rhs_explicit_b(
    grid: &Grid4,
    target: &SphereTarget,
    f: &MapField,
    u: &ScalarField,
) -> Result<MapField> {
    target.check_field(f)?;
    let b = explicit_normal_term(grid, f);
    let bl = grid.bilaplacian(f);
    Ok(b.sub(&bl).scale_by(&conformal_weight(u)))
}

/// Central finite difference of the bienergy along `v` next to the
/// analytic first variation `∫ ⟨Δ²f, v⟩`.
pub fn gradient_check(grid: &Grid4, f: &MapField, v: &MapField, eps: f64) -> Result<(f64, f64)> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidParam(format!("eps {eps} outside [1e-7, 1e-3]")));
    }
    let plus = bienergy(grid, &f.axpy(eps, v));
    let minus = bienergy(grid, &f.axpy(-eps, v));
    let fd = (plus - minus) / (2.0 * eps);
    let analytic = grid.integrate(&grid.bilaplacian(f).dot(v));
    Ok((fd, analytic))
}
