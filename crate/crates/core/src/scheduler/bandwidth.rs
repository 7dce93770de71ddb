//! Bandwidth allocation for a fixed set of selected devices.
//!
//! For a deadline `T` every device needs at least `alpha_min(T)` of the band
//! to finish training and uploading in time. Upload energy `P s / r(alpha)` is
//! convex and decreasing in `alpha`, so the leftover band is shared by
//! equalizing marginal energy savings (a root search on the KKT multiplier).
//! The best energy for a deadline is convex in `T`, and the outer search over
//! `T` is a golden-section search on `rho T + (1 - rho) sum E`.

use serde::{Deserialize, Serialize};

use super::Candidate;
use crate::error::{Error, Result};
use crate::radio::{rate_from_snr, rate_slope_from_snr, RadioParams};

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const MAX_BISECTIONS: usize = 200;
const ROOT_RTOL: f64 = 1e-13;
/// Relative slack accepted when a full band exactly meets a deadline.
const BOUNDARY_SLACK: f64 = 1e-12;
/// Smallest share handed out when the lower bound is zero.
const MIN_SHARE: f64 = 1e-12;

/// Result of allocating bandwidth to a selected set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthAllocation {
    /// Share of the band per selected device, in input order.
    pub alpha: Vec<f64>,
    /// Training plus upload time per device.
    pub completion: Vec<f64>,
    /// Upload energy per device.
    pub energy: Vec<f64>,
    pub round_time: f64,
    pub total_energy: f64,
    /// `rho * round_time + (1 - rho) * total_energy`.
    pub objective: f64,
}

/// Per-device quantities the allocator works with.
#[derive(Debug, Clone, Copy)]
struct Link {
    snr: f64,
    power: f64,
    train_time: f64,
    bandwidth_hz: f64,
    model_size_bits: f64,
    saving_at_full: f64,
}

impl Link {
    fn new(c: &Candidate, params: &RadioParams) -> Self {
        let mut link = Self {
            snr: c.state.full_band_snr(params),
            power: c.state.transmit_power,
            train_time: c.train_time,
            bandwidth_hz: params.bandwidth_hz,
            model_size_bits: params.model_size_bits,
            saving_at_full: 0.0,
        };
        link.saving_at_full = link.marginal_saving(1.0);
        link
    }

    fn rate(&self, alpha: f64) -> f64 {
        rate_from_snr(alpha, self.bandwidth_hz, self.snr)
    }

    fn upload_time(&self, alpha: f64) -> f64 {
        let r = self.rate(alpha);
        if r > 0.0 {
            self.model_size_bits / r
        } else {
            f64::INFINITY
        }
    }

    fn completion(&self, alpha: f64) -> f64 {
        self.train_time + self.upload_time(alpha)
    }

    fn energy(&self, alpha: f64) -> f64 {
        self.power * self.upload_time(alpha)
    }

    /// `-dE/dalpha`, the energy saved per unit of extra band. Decreasing.
    fn marginal_saving(&self, alpha: f64) -> f64 {
        let r = self.rate(alpha);
        self.power * self.model_size_bits * rate_slope_from_snr(alpha, self.bandwidth_hz, self.snr) / (r * r)
    }

    /// Smallest share meeting `deadline`, or `None` when even the full band
    /// misses it.
    fn min_share(&self, deadline: f64) -> Option<f64> {
        let budget = deadline - self.train_time;
        if !(budget > 0.0) || self.snr <= 0.0 {
            return None;
        }
        let need = self.model_size_bits / budget;
        let full = self.rate(1.0);
        if full < need * (1.0 - BOUNDARY_SLACK) {
            return None;
        }
        if full <= need {
            return Some(1.0);
        }
        Some(newton_increasing(
            |a| {
                let (r, slope, _) = self.rate_terms(a);
                (r - need, slope)
            },
            0.0,
            1.0,
            1.0,
        ))
    }

    /// Rate, its slope and its curvature at `alpha`, sharing one logarithm.
    fn rate_terms(&self, alpha: f64) -> (f64, f64, f64) {
        let x = self.snr / alpha;
        let l = x.ln_1p();
        let scale = self.bandwidth_hz / std::f64::consts::LN_2;
        let r = scale * alpha * l;
        let slope = scale * (l - x / (1.0 + x));
        let curvature = -scale * x * x / (alpha * (1.0 + x) * (1.0 + x));
        (r, slope, curvature)
    }

    /// Share at which the marginal saving drops to `mu`, within `[lo, 1]`.
    /// `saving_lo` is the marginal saving at `lo`; Newton starts at `start`.
    fn share_at_multiplier(&self, mu: f64, lo: f64, saving_lo: f64, start: f64) -> f64 {
        if saving_lo <= mu {
            return lo;
        }
        if self.saving_at_full >= mu {
            return 1.0;
        }
        // log-ratio keeps the function well scaled across magnitudes of mu
        let ln_mu = mu.ln();
        let ln_ps = (self.power * self.model_size_bits).ln();
        newton_increasing(
            |a| {
                let (r, slope, curvature) = self.rate_terms(a);
                let ln_saving = ln_ps + slope.ln() - 2.0 * r.ln();
                (ln_mu - ln_saving, 2.0 * slope / r - curvature / slope)
            },
            lo,
            1.0,
            start,
        )
    }
}

/// Root of an increasing function on `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
/// `f` returns the value and the derivative; Newton steps that leave the
/// bracket fall back to bisection.
fn newton_increasing(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64, start: f64) -> f64 {
    let mut x = start.clamp(lo, hi);
    for _ in 0..MAX_BISECTIONS {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= ROOT_RTOL * hi {
            return hi;
        }
        let newton = x - fx / dfx;
        let next = if dfx > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= ROOT_RTOL * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

fn validate_selection(candidates: &[Candidate], params: &RadioParams) -> Result<Vec<Link>> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("bandwidth allocation for an empty selection".into()));
    }
    candidates
        .iter()
        .map(|c| {
            let link = Link::new(c, params);
            if !(link.snr > 0.0) || !link.power.is_finite() {
                return Err(Error::Infeasible(format!("device {} cannot transmit (zero rate)", c.id)));
            }
            if !(link.train_time >= 0.0 && link.train_time.is_finite()) {
                return Err(Error::InvalidInput(format!("device {} has invalid training time", c.id)));
            }
            Ok(link)
        })
        .collect()
}

/// Smallest share of the band letting `candidate` finish within `deadline`.
/// `Ok(None)` when the deadline cannot be met even with the whole band.
pub fn min_bandwidth_for_deadline(candidate: &Candidate, params: &RadioParams, deadline: f64) -> Result<Option<f64>> {
    if !(deadline > 0.0) {
        return Err(Error::InvalidInput(format!("deadline must be positive, got {deadline}")));
    }
    Ok(Link::new(candidate, params).min_share(deadline))
}

/// Minimum-energy split of `budget` given per-device lower bounds. Every
/// energy is strictly decreasing so the whole budget is used.
fn split_budget(links: &[Link], lower: &[f64], budget: f64) -> Vec<f64> {
    if links.len() as f64 <= budget {
        return vec![1.0; links.len()];
    }
    let lower: Vec<f64> = lower.iter().map(|&lo| lo.max(MIN_SHARE)).collect();
    let saving_lo: Vec<f64> = links.iter().zip(&lower).map(|(l, &lo)| l.marginal_saving(lo)).collect();
    let mut alpha: Vec<f64> = lower.iter().map(|&lo| 0.5 * (lo + 1.0)).collect();
    // each pass warm-starts Newton from the previous shares
    let fill = |u: f64, alpha: &mut [f64]| -> f64 {
        let mu = u.exp();
        let mut sum = 0.0;
        for (k, l) in links.iter().enumerate() {
            alpha[k] = l.share_at_multiplier(mu, lower[k], saving_lo[k], alpha[k]);
            sum += alpha[k];
        }
        sum - budget
    };
    let lo_mu = links.iter().map(|l| l.saving_at_full).fold(f64::INFINITY, f64::min);
    let hi_mu = saving_lo.iter().copied().fold(0.0, f64::max);
    // excess(a) > 0 >= excess(b); Illinois false position on log(mu)
    let (mut a, mut b) = (lo_mu.ln(), hi_mu.ln());
    let mut fa = fill(a, &mut alpha);
    let mut fb = fill(b, &mut alpha);
    let mut last_moved_b = None;
    if fa <= 0.0 {
        b = a;
        fb = fa;
    }
    for _ in 0..MAX_BISECTIONS {
        if !(fb < 0.0 && fa > 0.0 && (b - a).abs() > 1e-11 * a.abs().max(1.0) && -fb > 1e-12 * budget) {
            break;
        }
        let c = b - fb * (b - a) / (fb - fa);
        let c = if c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let fc = fill(c, &mut alpha);
        if fc <= 0.0 {
            if last_moved_b == Some(true) {
                fa *= 0.5;
            }
            b = c;
            fb = fc;
            last_moved_b = Some(true);
        } else {
            if last_moved_b == Some(false) {
                fb *= 0.5;
            }
            a = c;
            fa = fc;
            last_moved_b = Some(false);
        }
    }
    fill(b, &mut alpha);
    // hand the root-search residue to the first device with headroom
    let slack = budget - alpha.iter().sum::<f64>();
    if slack > 0.0 {
        if let Some(a) = alpha.iter_mut().find(|a| **a + slack <= 1.0) {
            *a += slack;
        }
    }
    alpha
}

struct Evaluation {
    alpha: Vec<f64>,
    value: f64,
}

struct Problem<'a> {
    links: &'a [Link],
    rho: f64,
    budget: f64,
}

impl Problem<'_> {
    fn min_shares(&self, deadline: f64) -> Option<Vec<f64>> {
        let lower: Option<Vec<f64>> = self.links.iter().map(|l| l.min_share(deadline)).collect();
        lower.filter(|lo| lo.iter().sum::<f64>() <= self.budget)
    }

    fn allocation_value(&self, alpha: &[f64]) -> f64 {
        let mut t = 0.0_f64;
        let mut e = 0.0;
        for (l, &a) in self.links.iter().zip(alpha) {
            t = t.max(l.completion(a));
            e += l.energy(a);
        }
        self.rho * t + (1.0 - self.rho) * e
    }

    fn energy_of(&self, alpha: &[f64]) -> f64 {
        self.links.iter().zip(alpha).map(|(l, &a)| l.energy(a)).sum()
    }

    fn evaluate(&self, deadline: f64) -> Option<Evaluation> {
        let lower = self.min_shares(deadline)?;
        let alpha = split_budget(self.links, &lower, self.budget);
        let value = self.allocation_value(&alpha);
        Some(Evaluation { alpha, value })
    }

    fn deadline_of(&self, alpha: &[f64]) -> f64 {
        self.links.iter().zip(alpha).map(|(l, &a)| l.completion(a)).fold(0.0, f64::max)
    }
}

/// Scalarized bandwidth allocation `min rho T + (1 - rho) sum E` over the
/// selected devices, with `sum alpha <= 1`.
pub fn solve_sub2(candidates: &[Candidate], params: &RadioParams, rho: f64, tolerance: f64) -> Result<BandwidthAllocation> {
    solve_sub2_with_budget(candidates, params, rho, tolerance, 1.0)
}

/// As [`solve_sub2`] with the band budget relaxed to `sum alpha <= budget`.
pub fn solve_sub2_with_budget(
    candidates: &[Candidate],
    params: &RadioParams,
    rho: f64,
    tolerance: f64,
    budget: f64,
) -> Result<BandwidthAllocation> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!("rho must lie in [0, 1], got {rho}")));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tolerance}")));
    }
    if !(budget > 0.0) {
        return Err(Error::InvalidInput(format!("bandwidth budget must be positive, got {budget}")));
    }
    let links = validate_selection(candidates, params)?;
    let problem = Problem { links: &links, rho, budget };
    let m = links.len();

    // Equal split is always feasible, so it bounds the fastest deadline.
    let equal = vec![(budget / m as f64).min(1.0); m];
    let t_equal = problem.deadline_of(&equal);
    if !t_equal.is_finite() {
        return Err(Error::Infeasible("equal bandwidth split leaves a device without rate".into()));
    }
    // Energy-only optimum: beyond its deadline the objective only grows.
    let energy_only = split_budget(&links, &vec![0.0; m], budget);
    let t_energy = problem.deadline_of(&energy_only);
    let t_hi = t_equal.max(t_energy);

    // fastest feasible deadline
    let t_train = links.iter().map(|l| l.train_time).fold(0.0, f64::max);
    let mut lo = t_train;
    let mut hi = t_equal;
    if problem.min_shares(hi).is_none() {
        hi *= 1.0 + 1e-9;
        if problem.min_shares(hi).is_none() {
            return Err(Error::Infeasible("no deadline admits a feasible bandwidth split".into()));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= 1e-12 * hi {
            break;
        }
        if problem.min_shares(mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t_lo = hi;

    let mut best: Option<Evaluation> = None;
    let mut consider = |e: Option<Evaluation>| {
        if let Some(e) = e {
            if best.as_ref().is_none_or(|b| e.value < b.value) {
                best = Some(e);
            }
        }
    };
    consider(problem.evaluate(t_lo));
    consider(problem.evaluate(t_hi));
    consider(Some(Evaluation { value: problem.allocation_value(&energy_only), alpha: energy_only.clone() }));

    if t_hi > t_lo {
        let eps = tolerance * 1e-1 * t_hi;
        let (mut a, mut b) = (t_lo, t_hi);
        let mut x1 = b - GOLDEN * (b - a);
        let mut x2 = a + GOLDEN * (b - a);
        // scored at the deadline itself, which keeps the search convex past
        // the energy-only deadline where the split stops changing
        let value = |t: f64| {
            problem.evaluate(t).map_or(f64::INFINITY, |e| rho * t + (1.0 - rho) * problem.energy_of(&e.alpha))
        };
        let mut f1 = value(x1);
        let mut f2 = value(x2);
        while b - a > eps {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - GOLDEN * (b - a);
                f1 = value(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + GOLDEN * (b - a);
                f2 = value(x2);
            }
        }
        consider(problem.evaluate(0.5 * (a + b)));
    }

    let alpha = best
        .ok_or_else(|| Error::Infeasible("bandwidth search found no feasible split".into()))?
        .alpha;
    Ok(finish(&links, alpha, rho))
}

fn finish(links: &[Link], alpha: Vec<f64>, rho: f64) -> BandwidthAllocation {
    let completion: Vec<f64> = links.iter().zip(&alpha).map(|(l, &a)| l.completion(a)).collect();
    let energy: Vec<f64> = links.iter().zip(&alpha).map(|(l, &a)| l.energy(a)).collect();
    let round_time = completion.iter().copied().fold(0.0, f64::max);
    let total_energy = energy.iter().sum();
    BandwidthAllocation {
        objective: rho * round_time + (1.0 - rho) * total_energy,
        alpha,
        completion,
        energy,
        round_time,
        total_energy,
    }
}

/// Evaluates a given split without optimizing it.
pub fn evaluate_allocation(candidates: &[Candidate], params: &RadioParams, rho: f64, alpha: &[f64]) -> BandwidthAllocation {
    let links: Vec<Link> = candidates.iter().map(|c| Link::new(c, params)).collect();
    finish(&links, alpha.to_vec(), rho)
}
