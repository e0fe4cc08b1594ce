use core::fmt;

use super::MetricsError;

/// How the 95% half-width is derived from the sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CiMode {
    /// `1.96 * s / sqrt(n)`.
    #[default]
    Normal,
    /// Two-sided Student-t quantile with `n - 1` degrees of freedom.
    StudentT,
}

/// Mean and 95% confidence half-width over fold scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateScore {
    pub mean: f64,
    pub ci95: f64,
    pub n: usize,
}

impl fmt::Display for AggregateScore {
    /// Table cell, e.g. `0.757 (0.001)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ({:.3})", self.mean, self.ci95)
    }
}

const Z_975: f64 = 1.96;

// t_{0.975, df} for df = 1..=30.
const T_975: [f64; 30] = [
    12.706204736432095,
    4.302652729696142,
    3.182446305284263,
    2.7764451051977987,
    2.570581835636314,
    2.4469118511449692,
    2.3646242515927844,
    2.306004135204166,
    2.2621571628540993,
    2.2281388519649385,
    2.200985160082949,
    2.1788128296634177,
    2.1603686564610127,
    2.1447866879169273,
    2.131449545559323,
    2.1199052992210112,
    2.1098155778331806,
    2.10092204024096,
    2.093024054408263,
    2.0859634472658364,
    2.079613844727662,
    2.0738730679040147,
    2.0686576104190406,
    2.0638985616280205,
    2.059538552753294,
    2.055529438642871,
    2.0518305164802833,
    2.048407141795244,
    2.045229642132703,
    2.0422724563012373,
];

/// Two-sided 95% Student-t critical value. Beyond the table the
/// Cornish-Fisher expansion around the normal quantile is accurate to ~1e-5.
pub fn student_t_975(df: usize) -> f64 {
    if df == 0 {
        return f64::INFINITY;
    }
    if df <= T_975.len() {
        return T_975[df - 1];
    }
    let z = 1.959963984540054;
    let v = df as f64;
    let z3 = z * z * z;
    let z5 = z3 * z * z;
    let z7 = z5 * z * z;
    z + (z3 + z) / (4.0 * v)
        + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * v * v)
        + (3.0 * z7 + 19.0 * z5 + 17.0 * z3 - 15.0 * z) / (384.0 * v * v * v)
}

pub fn aggregate(values: &[f64], mode: CiMode) -> Result<AggregateScore, MetricsError> {
    let n = values.len();
    if n == 0 {
        return Err(MetricsError::NoValues);
    }
    // Shifted by the first value so identical inputs give an exact mean and zero spread.
    let pivot = values[0];
    let mean = pivot + values.iter().map(|v| v - pivot).sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(AggregateScore { mean, ci95: 0.0, n });
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let sem = libm::sqrt(var) / libm::sqrt(n as f64);
    let critical = match mode {
        CiMode::Normal => Z_975,
        CiMode::StudentT => student_t_975(n - 1),
    };
    Ok(AggregateScore {
        mean,
        ci95: critical * sem,
        n,
    })
}
