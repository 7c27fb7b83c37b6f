use super::params::ParamSet;
use super::tape::{Tape, Var};
use crate::error::Result;

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index where the maximum occurred.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Compare `backward` against central finite differences for every scalar of
/// every parameter. The relative error of a coordinate is
/// `|a - n| / max(1e-12, |a| + |n|)`.
pub fn grad_check<F>(f: F, params: &ParamSet, h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let loss = f(&mut tape, &vars)?;
    let mut grads = tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(params.tensors())
        .map(|(v, t)| grads.take(*v).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();

    let eval = |p: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new();
        let vars = p.bind_frozen(&mut tape);
        let loss = f(&mut tape, &vars)?;
        Ok(tape.value(loss).item())
    };

    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    for i in 0..work.len() {
        for j in 0..work.tensor(i).len() {
            let orig = work.tensor(i).data()[j];
            work.tensor_mut(i).data_mut()[j] = orig + h;
            let up = eval(&work)?;
            work.tensor_mut(i).data_mut()[j] = orig - h;
            let down = eval(&work)?;
            work.tensor_mut(i).data_mut()[j] = orig;

            let numeric = (up - down) / (2.0 * h);
            let a = analytic[i][j];
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
            report.coordinates += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((params.names()[i].clone(), j));
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
