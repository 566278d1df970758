//! Small statistical helpers shared by the validation suites.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Mean and standard error of the mean.
pub fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    if n == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, f64::NAN);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Pearson goodness-of-fit against the uniform law: (statistic, p-value).
pub fn chi_square_uniform(counts: &[u64]) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    (stat, upper_tail(stat, counts.len() - 1))
}

/// Two-sample homogeneity test on paired category counts: (statistic, p-value).
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> (f64, f64) {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let mut stat = 0.0;
    let mut cells = 0;
    for (&x, &y) in a.iter().zip(b) {
        let pooled = (x + y) as f64 / (na + nb);
        if pooled == 0.0 {
            continue;
        }
        cells += 1;
        let (ea, eb) = (pooled * na, pooled * nb);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    (stat, upper_tail(stat, cells.max(2) - 1))
}

fn upper_tail(stat: f64, dof: usize) -> f64 {
    let dist = ChiSquared::new(dof.max(1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// Total variation distance between two empirical laws on the same categories.
pub fn total_variation(a: &[u64], b: &[u64]) -> f64 {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    0.5 * a.iter().zip(b).map(|(&x, &y)| (x as f64 / na - y as f64 / nb).abs()).sum::<f64>()
}

/// Ordinary least squares y = a + b x: (intercept, slope, slope standard error).
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (intercept, slope, se)
}
