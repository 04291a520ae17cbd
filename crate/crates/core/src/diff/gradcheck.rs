use std::fmt;

use crate::error::{Error, Result};

use super::{Gradients, ParameterStore, Tape, Var};

/// Magnitude below which gradient entries are compared in absolute rather
/// than relative terms.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-4;

/// Multiple of `ε·|L|/h`, the rounding error of a central difference of a
/// loss of magnitude `|L|`, that counts as agreement.
pub const ROUNDOFF_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub entries: usize,
    pub max_relative_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub step: f64,
    pub tolerance: f64,
    pub loss: f64,
    /// Denominator floor used for the relative errors.
    pub floor: f64,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_relative_error() < self.tolerance
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "loss {:.6e}, step {:.1e}, comparison floor {:.3e}",
            self.loss, self.step, self.floor
        )?;
        for p in &self.params {
            writeln!(
                f,
                "{:<28} entries={:<6} max_rel={:.3e} max_abs={:.3e}",
                p.name, p.entries, p.max_relative_error, p.max_abs_error
            )?;
        }
        write!(
            f,
            "worst relative error {:.3e} (tolerance {:.1e}): {}",
            self.max_relative_error(),
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    relative_error_with_floor(analytic, numeric, RELATIVE_ERROR_FLOOR)
}

pub fn relative_error_with_floor(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Gradient magnitude below which central differences of this loss cannot
/// resolve a relative error of `tolerance`: the larger of
/// [`RELATIVE_ERROR_FLOOR`] and `ROUNDOFF_FACTOR·ε·|L| / (h·tolerance)`.
pub fn comparison_floor(loss: f64, step: f64, tolerance: f64) -> f64 {
    RELATIVE_ERROR_FLOOR.max(ROUNDOFF_FACTOR * f64::EPSILON * loss.abs() / (step * tolerance))
}

/// Compares reverse-mode gradients of `loss_fn` against central differences
/// `(f(θ+h) - f(θ-h)) / 2h` for every parameter entry.
///
/// `loss_fn` must be a pure function of the parameters: any sampling noise has
/// to be frozen across calls. This is verified by evaluating it twice.
pub fn finite_diff_check<F>(
    params: &ParameterStore,
    step: f64,
    tolerance: f64,
    loss_fn: F,
) -> Result<GradCheckReport>
where
    F: Fn(&ParameterStore, &mut Tape) -> Result<Var>,
{
    finite_diff_check_with(params, step, tolerance, loss_fn, |_| {})
}

/// As [`finite_diff_check`], letting `adjust` modify the analytic gradients
/// before comparison.
pub fn finite_diff_check_with<F>(
    params: &ParameterStore,
    step: f64,
    tolerance: f64,
    loss_fn: F,
    adjust: impl FnOnce(&mut Gradients),
) -> Result<GradCheckReport>
where
    F: Fn(&ParameterStore, &mut Tape) -> Result<Var>,
{
    let eval = |p: &ParameterStore| -> Result<f64> {
        let mut tape = Tape::new();
        let out = loss_fn(p, &mut tape)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let out = loss_fn(params, &mut tape)?;
    let loss = tape.value(out).item();
    let mut analytic = tape.backward(out)?;
    drop(tape);
    adjust(&mut analytic);

    let again = eval(params)?;
    if again.to_bits() != loss.to_bits() {
        return Err(Error::NonDeterministic {
            first: loss,
            second: again,
        });
    }

    let floor = comparison_floor(loss, step, tolerance);
    let mut work = params.clone();
    let mut report = Vec::new();
    for (name, tensor) in params.iter() {
        let grad = analytic
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.clone()))?;
        let mut check = ParamCheck {
            name: name.clone(),
            entries: tensor.len(),
            max_relative_error: 0.0,
            max_abs_error: 0.0,
        };
        for k in 0..tensor.len() {
            let original = tensor.data()[k];
            work.get_mut(name)?.data_mut()[k] = original + step;
            let plus = eval(&work)?;
            work.get_mut(name)?.data_mut()[k] = original - step;
            let minus = eval(&work)?;
            work.get_mut(name)?.data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let a = grad.data()[k];
            check.max_abs_error = check.max_abs_error.max((a - numeric).abs());
            check.max_relative_error = check.max_relative_error.max(relative_error_with_floor(a, numeric, floor));
        }
        report.push(check);
    }
    Ok(GradCheckReport {
        params: report,
        step,
        tolerance,
        loss,
        floor,
    })
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;
    use crate::diff::Tensor;

    fn quadratic(p: &ParameterStore, t: &mut Tape) -> Result<Var> {
        let w = t.param("w", p.get("w")?.clone());
        let target = t.constant(Tensor::from_rows(&[vec![1.0, -2.0, 0.5]]));
        let sq = t.squared_frobenius(w, target)?;
        Ok(t.scale(sq, 3.0))
    }

    #[test]
    fn quadratic_is_exact() {
        let mut p = ParameterStore::new();
        p.insert("w", Tensor::from_rows(&[vec![0.3, 0.7, -1.1]]));
        let r = finite_diff_check(&p, 1e-5, 1e-8, quadratic).unwrap();
        assert!(r.max_relative_error() < 1e-8, "{r}");
        assert!(r.passed());
    }

    #[test]
    fn fresh_noise_is_detected() {
        let mut p = ParameterStore::new();
        p.insert("w", Tensor::scalar(1.0));
        let calls = Cell::new(0u32);
        let noisy = |p: &ParameterStore, t: &mut Tape| {
            calls.set(calls.get() + 1);
            let w = t.param("w", p.get("w")?.clone());
            Ok(t.add_scalar(w, calls.get() as f64))
        };
        assert!(matches!(
            finite_diff_check(&p, 1e-5, 1e-6, noisy),
            Err(Error::NonDeterministic { .. })
        ));
    }

    #[test]
    fn corrupted_gradient_fails() {
        let mut p = ParameterStore::new();
        p.insert("w", Tensor::from_rows(&[vec![0.3, 0.7, -1.1]]));
        let r = finite_diff_check_with(&p, 1e-5, 1e-4, quadratic, |g| {
            g.get_mut("w").unwrap().data_mut()[1] *= 1.01;
        })
        .unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert!((relative_error(1e-9, 0.0) - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn floor_tracks_loss_magnitude() {
        assert_eq!(comparison_floor(1.0, 1e-5, 1e-4), RELATIVE_ERROR_FLOOR);
        let big = comparison_floor(1e6, 1e-5, 1e-4);
        assert!((big - ROUNDOFF_FACTOR * f64::EPSILON * 1e15).abs() < 1e-12 * big);
    }
}
