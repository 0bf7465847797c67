use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{loglik, SolverResult};
use crate::error::{usage, Result};
use crate::mixture::{Dataset, GmmDensity, MixingMeasure};
use crate::rng;

const STEPS: usize = 200;

/// Random-walk jitter of a fitted measure that never lets the
/// log-likelihood fall more than `eps` below the fit.
///
/// Proposals alternate between log-normal weight jitter and Gaussian atom
/// jitter. The step scale is proportional to `√eps`, so the output tends to
/// the input as `eps → 0`. The returned `gap` is the input certificate plus
/// the realized deficit, an upper bound on the distance to the optimum.
pub fn near_optimal_perturb(result: &SolverResult, data: &Dataset, eps: f64, seed: u64) -> Result<SolverResult> {
    if !(eps > 0.0) {
        return Err(usage("eps must be positive"));
    }
    let target = result.loglik;
    let dim = result.measure.dim();
    let base_scale = eps.sqrt();
    let mut scale = base_scale;
    let mut rng = rng::stream(seed);
    let mut current = result.measure.clone();
    let mut current_ll = target;
    let mut trace = vec![current_ll];
    for step in 0..STEPS {
        let mut atoms = current.flat_atoms().to_vec();
        let mut weights = current.weights().to_vec();
        if step % 2 == 0 {
            for w in weights.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w *= (scale * z).exp();
            }
        } else {
            let k = rng.random_range(0..current.len());
            for a in &mut atoms[k * dim..(k + 1) * dim] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *a += scale * z;
            }
        }
        let Ok(candidate) = MixingMeasure::normalized(dim, atoms, weights) else { continue };
        let ll = loglik(&GmmDensity::new(candidate.clone()), data)?;
        if target - ll <= eps {
            current = candidate;
            current_ll = ll;
            scale = (scale * 1.3).min(4.0 * base_scale);
        } else {
            scale *= 0.7;
        }
        trace.push(current_ll);
    }
    Ok(SolverResult {
        measure: current,
        loglik: current_ll,
        gap: result.gap + (target - current_ll).max(0.0),
        iters: STEPS,
        trace,
    })
}
