//! Finite-difference verification of tape gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub eps: f64,
    /// Compare at most this many entries per input (chosen by `seed`).
    pub max_entries: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            max_entries: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InputReport {
    /// Flat indices that were compared.
    pub indices: Vec<usize>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

impl InputReport {
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)`, 0 when both vanish.
    pub fn relative_error(&self) -> f64 {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = self.analytic.iter().zip(&self.numeric).map(|(a, n)| a - n).collect();
        let scale = norm(&self.analytic).max(norm(&self.numeric));
        if scale == 0.0 {
            0.0
        } else {
            norm(&diff) / scale
        }
    }
}

/// Compares backward-pass gradients of the scalar built by `f` against
/// central differences, one report per input.
pub fn check_gradients<F>(inputs: &[Tensor<f64>], f: F, opts: &GradCheckOptions) -> Result<Vec<InputReport>>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        tape.value(out).item()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|t| tape.leaf(t.clone().with_requires_grad(true)))
        .collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut reports = Vec::with_capacity(inputs.len());
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (i, &v) in vars.iter().enumerate() {
        let n = inputs[i].numel();
        let mut indices: Vec<usize> = match opts.max_entries {
            Some(m) if m < n => rand::seq::index::sample(&mut rng, n, m).into_vec(),
            _ => (0..n).collect(),
        };
        indices.sort_unstable();
        let grad = tape.grad(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
        let mut numeric = Vec::with_capacity(indices.len());
        for &k in &indices {
            let orig = work[i].data()[k];
            work[i].data_mut()[k] = orig + opts.eps;
            let plus = eval(&work)?;
            work[i].data_mut()[k] = orig - opts.eps;
            let minus = eval(&work)?;
            work[i].data_mut()[k] = orig;
            numeric.push((plus - minus) / (2.0 * opts.eps));
        }
        reports.push(InputReport {
            analytic: indices.iter().map(|&k| grad[k]).collect(),
            numeric,
            indices,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_through_sum_of_products() {
        let x = Tensor::new(vec![1, 1, 1, 3], vec![0.5, -1.0, 2.0]).unwrap();
        let reports = check_gradients(
            &[x],
            |t, v| {
                let y = t.sigmoid(v[0]);
                t.weighted_sum(y, vec![1.0, 2.0, 3.0])
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(reports[0].relative_error() < 1e-8);
    }

    #[test]
    fn sampling_limits_entries() {
        let x = Tensor::<f64>::from_fn(&[1, 1, 4, 4], |i| i as f64 * 0.1);
        let opts = GradCheckOptions {
            max_entries: Some(5),
            ..GradCheckOptions::default()
        };
        let r = check_gradients(&[x], |t, v| Ok(t.sum(v[0])), &opts).unwrap();
        assert_eq!(r[0].indices.len(), 5);
        assert!(r[0].relative_error() < 1e-9);
    }
}
