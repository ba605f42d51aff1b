use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::param::Parameterized;

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is ~0 are judged on absolute error.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    pub worst_param: String,
    pub worst_index: usize,
}

/// Compares reverse-mode gradients against central finite differences.
///
/// `loss_and_grad` must zero-initialised-accumulate gradients into the model's
/// params and return the loss; `loss` evaluates the loss only. When
/// `max_coords` is set and the model has more coordinates, a seeded random
/// subset of that size is checked.
pub fn grad_check<M: Parameterized>(
    model: &mut M,
    mut loss: impl FnMut(&M) -> f64,
    mut loss_and_grad: impl FnMut(&mut M) -> f64,
    h: f64,
    max_coords: Option<usize>,
    seed: u64,
) -> GradCheckReport {
    model.zero_grad();
    loss_and_grad(model);
    let analytic: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|p| p.grad.iter().copied().collect())
        .collect();
    let names: Vec<String> = model.params().iter().map(|p| p.name.clone()).collect();

    let coords: Vec<(usize, usize)> = analytic
        .iter()
        .enumerate()
        .flat_map(|(pi, g)| (0..g.len()).map(move |i| (pi, i)))
        .collect();
    let chosen: Vec<(usize, usize)> = match max_coords {
        Some(k) if k < coords.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, coords.len(), k)
                .into_iter()
                .map(|i| coords[i])
                .collect()
        }
        _ => coords,
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coords_checked: chosen.len(),
        worst_param: String::new(),
        worst_index: 0,
    };
    for (pi, i) in chosen {
        let orig = flat_get(model, pi, i);
        flat_set(model, pi, i, orig + h);
        let up = loss(model);
        flat_set(model, pi, i, orig - h);
        let down = loss(model);
        flat_set(model, pi, i, orig);
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[pi][i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        if rel > report.max_rel_error || rel.is_nan() {
            report.max_rel_error = rel;
            report.worst_param = names[pi].clone();
            report.worst_index = i;
        }
    }
    model.zero_grad();
    report
}

fn flat_get<M: Parameterized>(model: &M, pi: usize, i: usize) -> f64 {
    let p = model.params()[pi];
    let cols = p.value.ncols();
    p.value[[i / cols, i % cols]]
}

fn flat_set<M: Parameterized>(model: &mut M, pi: usize, i: usize, v: f64) {
    let mut params = model.params_mut();
    let p = &mut params[pi];
    let cols = p.value.ncols();
    p.value[[i / cols, i % cols]] = v;
}
