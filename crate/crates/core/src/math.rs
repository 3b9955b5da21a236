//! Float helpers that work without `std`.

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn cbrt(x: f64) -> f64 {
    libm::cbrt(x)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    ln(p / (1.0 - p))
}

/// `-p log2 p`, with the `0 log 0 = 0` convention.
#[inline]
pub fn entropy_term(p: f64) -> f64 {
    if p > 0.0 {
        -p * log2(p)
    } else {
        0.0
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, sqrt(var))
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(exp(-z))
    } else {
        libm::log1p(exp(z))
    }
}

/// Binary cross-entropy of a logit against a 0/1 target.
#[inline]
pub fn logistic_loss(margin: f64, y: f64) -> f64 {
    y * softplus(-margin) + (1.0 - y) * softplus(margin)
}
