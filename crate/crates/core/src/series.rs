//! Uniformly sampled time series: finite-difference time derivatives,
//! trapezoidal integration and Lagrange interpolation between samples.

use crate::error::{Error, Result};
use crate::fields::{ScalarField, SymTensorField, VectorField};
use crate::scalar::{count, lit, Real};

/// `n + 1` equispaced times `0, T/n, …, T`, optionally offset.
pub fn uniform_times<T: Real>(t0: T, t_final: T, steps: usize) -> Vec<T> {
    let dt = (t_final - t0) / count(steps.max(1));
    (0..=steps).map(|i| t0 + dt * count(i)).collect()
}

/// Five-point stencils for the first derivative, `12h·f′(tᵢ) ≈ Σ wⱼ f(t_{i+j-2})`.
fn stencil<T: Real>(i: usize, n: usize) -> (usize, [T; 5]) {
    let w = |a: [f64; 5]| a.map(lit::<T>);
    if i >= 2 && i + 2 < n {
        (i - 2, w([1.0, -8.0, 0.0, 8.0, -1.0]))
    } else if i == 0 {
        (0, w([-25.0, 48.0, -36.0, 16.0, -3.0]))
    } else if i == 1 {
        (0, w([-3.0, -10.0, 18.0, -6.0, 1.0]))
    } else if i + 1 == n {
        (n - 5, w([3.0, -16.0, 36.0, -48.0, 25.0]))
    } else {
        (n - 5, w([-1.0, 6.0, -18.0, 10.0, 3.0]))
    }
}

/// Fourth-order first derivative of equispaced samples, one-sided at the ends.
pub fn derivative_values<T: Real>(frames: &[&[T]], h: T) -> Result<Vec<Vec<T>>> {
    let n = frames.len();
    if n < 5 {
        return Err(Error::SeriesMismatch(format!(
            "fourth-order differencing needs at least 5 samples, got {n}"
        )));
    }
    let len = frames[0].len();
    if frames.iter().any(|f| f.len() != len) {
        return Err(Error::SeriesMismatch("frames differ in length".into()));
    }
    let scale = T::one() / (lit::<T>(12.0) * h);
    Ok((0..n)
        .map(|i| {
            let (start, w) = stencil::<T>(i, n);
            (0..len)
                .map(|p| {
                    let acc = (0..5).fold(T::zero(), |a, j| a + w[j] * frames[start + j][p]);
                    acc * scale
                })
                .collect()
        })
        .collect())
}

pub fn derivative_scalars<T: Real>(series: &[ScalarField<T>], h: T) -> Result<Vec<ScalarField<T>>> {
    let frames: Vec<&[T]> = series.iter().map(|f| f.values()).collect();
    Ok(derivative_values(&frames, h)?
        .into_iter()
        .zip(series)
        .map(|(v, f)| ScalarField::from_raw(f.grid(), v))
        .collect())
}

pub fn derivative_vectors<T: Real>(series: &[VectorField<T>], h: T) -> Result<Vec<VectorField<T>>> {
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    let d = first.dim();
    let mut comps: Vec<Vec<Vec<T>>> = vec![Vec::new(); series.len()];
    for a in 0..d {
        let frames: Vec<&[T]> = series.iter().map(|f| f.component(a)).collect();
        for (slot, v) in comps.iter_mut().zip(derivative_values(&frames, h)?) {
            slot.push(v);
        }
    }
    Ok(comps
        .into_iter()
        .map(|c| VectorField::from_raw(first.grid(), c))
        .collect())
}

pub fn derivative_tensors<T: Real>(series: &[SymTensorField<T>], h: T) -> Result<Vec<SymTensorField<T>>> {
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    let storage = first.components().len();
    let mut comps: Vec<Vec<Vec<T>>> = vec![Vec::new(); series.len()];
    for c in 0..storage {
        let frames: Vec<&[T]> = series.iter().map(|f| f.components()[c].as_slice()).collect();
        for (slot, v) in comps.iter_mut().zip(derivative_values(&frames, h)?) {
            slot.push(v);
        }
    }
    let traceless = series.iter().all(|t| t.is_traceless());
    Ok(comps
        .into_iter()
        .map(|c| SymTensorField::from_raw(first.grid(), c, traceless))
        .collect())
}

/// Trapezoidal rule over equispaced samples.
pub fn trapezoid<T: Real>(values: &[T], h: T) -> T {
    match values.len() {
        0 | 1 => T::zero(),
        n => {
            let inner = values[1..n - 1].iter().fold(T::zero(), |a, &v| a + v);
            h * (inner + lit::<T>(0.5) * (values[0] + values[n - 1]))
        }
    }
}

/// Cubic Lagrange interpolation of equispaced samples at fractional index
/// `s ∈ [0, n−1]`, using the four nearest nodes.
pub fn lagrange_cubic<T: Real, const D: usize>(samples: &[[T; D]], s: T) -> [T; D] {
    let n = samples.len();
    if n == 1 {
        return samples[0];
    }
    let order = n.min(4);
    let floor = s.floor().to_usize().unwrap_or(0);
    let start = floor.saturating_sub(1).min(n - order);
    let mut out = [T::zero(); D];
    for j in 0..order {
        let xj = count::<T>(start + j);
        let mut w = T::one();
        for m in 0..order {
            if m != j {
                let xm = count::<T>(start + m);
                w = w * (s - xm) / (xj - xm);
            }
        }
        for (o, v) in out.iter_mut().zip(samples[start + j].iter()) {
            *o = *o + w * *v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_derivative_is_exact() {
        let h = 0.1;
        let f = |t: f64| 1.0 + t - 2.0 * t * t + 0.5 * t.powi(3) + 0.25 * t.powi(4);
        let df = |t: f64| 1.0 - 4.0 * t + 1.5 * t * t + t.powi(3);
        let vals: Vec<Vec<f64>> = (0..9).map(|i| vec![f(i as f64 * h)]).collect();
        let frames: Vec<&[f64]> = vals.iter().map(|v| v.as_slice()).collect();
        let d = derivative_values(&frames, h).unwrap();
        for (i, v) in d.iter().enumerate() {
            assert!((v[0] - df(i as f64 * h)).abs() < 1e-12, "{i}");
        }
    }

    #[test]
    fn exponential_derivative_converges_fourth_order() {
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let vals: Vec<Vec<f64>> = (0..=n).map(|i| vec![(-(i as f64) * h).exp()]).collect();
            let frames: Vec<&[f64]> = vals.iter().map(|v| v.as_slice()).collect();
            derivative_values(&frames, h)
                .unwrap()
                .iter()
                .enumerate()
                .map(|(i, v)| (v[0] + (-(i as f64) * h).exp()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 12.0 && ratio < 20.0, "{ratio}");
    }

    #[test]
    fn too_few_samples() {
        let v = vec![vec![0.0]; 4];
        let frames: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
        assert!(derivative_values(&frames, 0.1).is_err());
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let vals: Vec<f64> = (0..=10).map(|i| 2.0 * i as f64 * 0.1 + 1.0).collect();
        assert!((trapezoid(&vals, 0.1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_interpolation_reproduces_cubics() {
        let f = |t: f64| 0.3 - t + t * t * t;
        let samples: Vec<[f64; 1]> = (0..7).map(|i| [f(i as f64)]).collect();
        for s in [0.5, 1.25, 3.5, 5.5, 6.0] {
            assert!((lagrange_cubic(&samples, s)[0] - f(s)).abs() < 1e-12, "{s}");
        }
    }
}
