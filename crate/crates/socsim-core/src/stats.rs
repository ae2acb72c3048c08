//! Distribution helpers used by the validation experiments: Poisson and
//! binomial mass functions evaluated in log space, a Kolmogorov–Smirnov
//! distance for integer-valued data, a chi-square tail probability, and a
//! log-binned power-law tail fit.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("histogram has no observations")]
    EmptyHistogram,
    #[error(
        "power-law fit found {found} occupied log bins at k >= {k_min}, needs {needed}; \
         grow the network or lower k_min"
    )]
    InsufficientSupport {
        k_min: u32,
        needed: usize,
        found: usize,
    },
}

/// Counts of agents per degree. The counts always sum to the number of
/// agents that were recorded.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DegreeHistogram {
    counts: BTreeMap<u32, u64>,
    n: u64,
}

impl DegreeHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_degrees<I: IntoIterator<Item = u32>>(degrees: I) -> Self {
        let mut h = Self::new();
        for k in degrees {
            h.record(k);
        }
        h
    }

    pub fn record(&mut self, degree: u32) {
        *self.counts.entry(degree).or_insert(0) += 1;
        self.n += 1;
    }

    pub fn merge(&mut self, other: &DegreeHistogram) {
        for (&k, &c) in &other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.n += other.n;
    }

    /// Observations recorded so far; equals the sum over all counts.
    pub fn n_agents(&self) -> u64 {
        self.n
    }

    pub fn count(&self, degree: u32) -> u64 {
        self.counts.get(&degree).copied().unwrap_or(0)
    }

    /// Ascending (degree, count) pairs.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&k, &c)| (k, c))
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.counts.keys().next_back().copied()
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let sum: f64 = self.counts.iter().map(|(&k, &c)| k as f64 * c as f64).sum();
        sum / self.n as f64
    }

    /// Empirical probability of one degree value.
    pub fn pmf(&self, degree: u32) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.count(degree) as f64 / self.n as f64
        }
    }
}

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.3234287776531,
        -176.6150291621406,
        12.507343278686905,
        -0.13857109526572012,
        9.984369578019572e-6,
        1.5056327351493116e-7,
    ];
    use std::f64::consts::PI;
    if x < 0.5 {
        // reflection keeps the approximation on its accurate half-line
        (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = 0.999_999_999_999_809_93;
        for (i, c) in COEFFS.iter().enumerate() {
            acc += c / (x + (i + 1) as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// P(X = k) for X ~ Poisson(lambda), evaluated in log space so large k and
/// lambda do not overflow the factorial.
pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let k = k as f64;
    (k * lambda.ln() - lambda - ln_gamma(k + 1.0)).exp()
}

/// P(X = k) for X ~ Binomial(n, p), evaluated in log space.
pub fn binomial_pmf(n: u64, p: f64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let (nf, kf) = (n as f64, k as f64);
    let ln_choose = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0);
    (ln_choose + kf * p.ln() + (nf - kf) * (1.0 - p).ln()).exp()
}

/// Kolmogorov–Smirnov distance between the histogram and a model mass
/// function on the nonnegative integers: the largest gap between the two
/// cumulative distributions, scanned over the observed support.
pub fn ks_distance(hist: &DegreeHistogram, model_pmf: impl Fn(u64) -> f64) -> f64 {
    let Some(max_k) = hist.max_degree() else {
        return 0.0;
    };
    let n = hist.n_agents() as f64;
    let mut empirical = 0.0;
    let mut model = 0.0;
    let mut sup = 0.0f64;
    for k in 0..=max_k as u64 {
        empirical += hist.count(k as u32) as f64 / n;
        model += model_pmf(k);
        sup = sup.max((empirical - model).abs());
    }
    sup
}

/// Pearson chi-square statistic for observed counts against expected counts.
/// Cells with expected mass below `1e-12` are skipped.
pub fn chi_square_statistic(observed: &[u64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    observed
        .iter()
        .zip(expected)
        .filter(|(_, &e)| e > 1e-12)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum()
}

/// Upper tail probability P(X >= x) for X ~ chi-square with `df` degrees of
/// freedom.
pub fn chi_square_survival(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_q(df as f64 / 2.0, x / 2.0)
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x) / Γ(a). Series for
/// x < a + 1, Lentz continued fraction otherwise.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "domain: a > 0, x >= 0");
    if x == 0.0 {
        return 1.0;
    }
    let prefix = (-x + a * x.ln() - ln_gamma(a)).exp();
    if x < a + 1.0 {
        // P(a, x) by series, then complement
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        1.0 - sum * prefix
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        prefix * h
    }
}

/// Result of a tail fit. `gamma` is the negated slope of ln P(k) against
/// ln k over geometric bins; `poor_fit` marks data whose tail is not close
/// to a straight line in log-log space (R-squared below [`POOR_FIT_R_SQUARED`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    pub gamma: f64,
    pub r_squared: f64,
    pub bins_used: usize,
    pub poor_fit: bool,
}

pub const POOR_FIT_R_SQUARED: f64 = 0.95;
const MIN_FIT_BINS: usize = 3;
const BIN_RATIO: f64 = std::f64::consts::SQRT_2;

/// Fits P(k) ~ k^-gamma on the histogram tail k >= k_min using log-binned
/// least squares. Mass is pooled into geometric bins to even out tail noise
/// before the straight-line fit.
pub fn fit_power_law(hist: &DegreeHistogram, k_min: u32) -> Result<PowerLawFit, StatsError> {
    if hist.n_agents() == 0 {
        return Err(StatsError::EmptyHistogram);
    }
    let total = hist.n_agents() as f64;
    let max_k = hist.max_degree().unwrap();

    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut lo = k_min as f64;
    while lo <= max_k as f64 {
        let hi = lo * BIN_RATIO;
        let mass: u64 = hist
            .iter()
            .filter(|&(k, _)| (k as f64) >= lo && (k as f64) < hi)
            .map(|(_, c)| c)
            .sum();
        if mass > 0 {
            let density = mass as f64 / total / (hi - lo);
            points.push(((lo * hi).sqrt().ln(), density.ln()));
        }
        lo = hi;
    }

    if points.len() < MIN_FIT_BINS {
        return Err(StatsError::InsufficientSupport {
            k_min,
            needed: MIN_FIT_BINS,
            found: points.len(),
        });
    }

    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;

    let mean_y = sy / n;
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let ss_tot: f64 = points
        .iter()
        .map(|&(_, y)| {
            let d = y - mean_y;
            d * d
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(PowerLawFit {
        gamma: -slope,
        r_squared,
        bins_used: points.len(),
        poor_fit: r_squared < POOR_FIT_R_SQUARED,
    })
}
