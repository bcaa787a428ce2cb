use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::nn::gradcheck::{analytic_gradients, compare, nudge_away_from_kinks, DEFAULT_STEP, KINK_MARGIN};
use crate::nn::{CheckLoss, GradCheckReport, Head, Mlp};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckOptions {
    /// Random networks per head.
    pub nets: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Corrupt one analytic gradient per network, for testing the checker.
    pub inject_fault: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            nets: 100,
            seed: 0,
            tolerance: 1e-4,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HeadSuite {
    pub head: &'static str,
    pub nets: usize,
    pub failures: usize,
    pub max_rel_error: f64,
    /// Report of the network with the largest error.
    pub worst: GradCheckReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckSummary {
    pub tolerance: f64,
    pub suites: Vec<HeadSuite>,
    pub passed: bool,
}

fn random_dims<R: Rng>(rng: &mut R, out_lo: usize, out_hi: usize) -> Vec<usize> {
    let mut dims = vec![rng.gen_range(2..=8)];
    for _ in 0..rng.gen_range(1..=2) {
        dims.push(rng.gen_range(2..=10));
    }
    dims.push(rng.gen_range(out_lo..=out_hi));
    dims
}

fn check_one(net: &Mlp, loss: &CheckLoss, input: &[f64], opts: &GradcheckOptions) -> Result<GradCheckReport> {
    let net = nudge_away_from_kinks(net, input, KINK_MARGIN)?;
    let mut analytic = analytic_gradients(&net, loss, input)?;
    if opts.inject_fault {
        let last = analytic.layers.len() - 1;
        analytic.layers[last].biases[0] += 0.5;
    }
    compare(&net, loss, input, &analytic, DEFAULT_STEP, opts.tolerance)
}

fn suite<R: Rng>(
    name: &'static str,
    head: Head,
    rng: &mut R,
    opts: &GradcheckOptions,
    mut make_loss: impl FnMut(&mut R, usize) -> CheckLoss,
) -> Result<HeadSuite> {
    let mut worst: Option<GradCheckReport> = None;
    let mut failures = 0;
    for _ in 0..opts.nets.max(1) {
        let (lo, hi) = if head == Head::Softmax { (2, 6) } else { (1, 4) };
        let dims = random_dims(rng, lo, hi);
        let net = Mlp::new(&dims, head, rng)?;
        let input: Vec<f64> = (0..dims[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = make_loss(rng, dims[dims.len() - 1]);
        let report = check_one(&net, &loss, &input, opts)?;
        failures += usize::from(!report.passed);
        if worst.as_ref().is_none_or(|w| report.max_rel_error > w.max_rel_error) {
            worst = Some(report);
        }
    }
    let worst = worst.expect("at least one network");
    Ok(HeadSuite {
        head: name,
        nets: opts.nets.max(1),
        failures,
        max_rel_error: worst.max_rel_error,
        worst,
    })
}

/// Finite-difference checks of random small Q-style (linear head, Huber)
/// and S2C-style (softmax head, NLL) networks.
pub fn gradcheck_suite(opts: &GradcheckOptions) -> Result<GradcheckSummary> {
    let mut rng = stream(opts.seed, Stream::Init);
    let q = suite("huber", Head::Linear, &mut rng, opts, |rng, outputs| {
        CheckLoss::Huber {
            output: rng.gen_range(0..outputs),
            target: rng.gen_range(-3.0..3.0),
            delta: 1.0,
        }
    })?;
    let s2c = suite("nll", Head::Softmax, &mut rng, opts, |rng, outputs| CheckLoss::Nll {
        target: rng.gen_range(0..outputs),
    })?;
    let suites = vec![q, s2c];
    Ok(GradcheckSummary {
        tolerance: opts.tolerance,
        passed: suites.iter().all(|s| s.failures == 0),
        suites,
    })
}
