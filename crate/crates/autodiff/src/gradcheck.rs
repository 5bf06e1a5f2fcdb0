use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub eps: f64,
    /// Check at most this many coordinates per parameter array (the largest
    /// analytic entry plus a seeded random sample). `None` checks all.
    pub max_coords_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_coords_per_param: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest per-parameter error `‖a - fd‖ / max(‖a‖, ‖fd‖, 1e-8)`, with
    /// norms taken over the checked coordinates of each parameter array.
    pub max_rel_error: f64,
    /// Name of the parameter with the largest error.
    pub worst: Option<String>,
    /// Largest single-coordinate `|a - fd| / max(|a|, |fd|, 1e-8)`. For
    /// gradients near 1e-8 this is dominated by rounding in the loss.
    pub max_coord_rel_error: f64,
    pub worst_coord: Option<(String, usize)>,
    pub coords_checked: usize,
    /// Number of checked coordinates with a non-zero analytic gradient.
    pub nonzero_coords: usize,
}

/// Compares reverse-mode gradients of the scalar built by `build` against
/// central finite differences. `build` must be deterministic: it is called
/// once for the analytic pass and twice per checked coordinate.
pub fn grad_check<F>(store: &mut ParamStore, opts: GradCheckOptions, build: F) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(Graph, Var)>,
{
    let (graph, loss) = build(store)?;
    let analytic = graph.backward(loss)?;
    drop(graph);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        max_coord_rel_error: 0.0,
        worst_coord: None,
        coords_checked: 0,
        nonzero_coords: 0,
    };
    let ids: Vec<ParamId> = store.trainable().collect();
    for id in ids {
        let n = store.get(id).len();
        let grad = analytic.get(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
        let coords: Vec<usize> = match opts.max_coords_per_param {
            Some(k) if k < n => {
                let top = (0..n)
                    .max_by(|&a, &b| grad[a].abs().total_cmp(&grad[b].abs()))
                    .unwrap_or(0);
                let mut c: Vec<usize> = sample(&mut rng, n, k.saturating_sub(1)).into_vec();
                if !c.contains(&top) {
                    c.push(top);
                }
                c.sort_unstable();
                c
            }
            _ => (0..n).collect(),
        };
        let (mut diff_sq, mut a_sq, mut fd_sq) = (0.0, 0.0, 0.0);
        for i in coords {
            let orig = store.get(id).values()[i];
            store.get_mut(id).values_mut()[i] = orig + opts.eps;
            let plus = eval(&build, store)?;
            store.get_mut(id).values_mut()[i] = orig - opts.eps;
            let minus = eval(&build, store)?;
            store.get_mut(id).values_mut()[i] = orig;

            let fd = (plus - minus) / (2.0 * opts.eps);
            let a = grad[i];
            diff_sq += (a - fd) * (a - fd);
            a_sq += a * a;
            fd_sq += fd * fd;
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
            report.coords_checked += 1;
            if a != 0.0 {
                report.nonzero_coords += 1;
            }
            if rel > report.max_coord_rel_error {
                report.max_coord_rel_error = rel;
                report.worst_coord = Some((store.param(id).name.clone(), i));
            }
        }
        let rel = diff_sq.sqrt() / a_sq.sqrt().max(fd_sq.sqrt()).max(1e-8);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = Some(store.param(id).name.clone());
        }
    }
    Ok(report)
}

fn eval<F>(build: &F, store: &ParamStore) -> Result<f64>
where
    F: Fn(&ParamStore) -> Result<(Graph, Var)>,
{
    let (g, loss) = build(store)?;
    Ok(g.scalar(loss))
}
