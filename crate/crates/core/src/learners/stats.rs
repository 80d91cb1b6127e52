//! Binomial tail for the chance that learners align with one hypothesis across domains.

use num_traits::Num;

use super::LearnerError;

/// `k` as a scalar, by doubling and adding ones.
fn from_count<T: Num + Clone>(k: u64) -> T {
    let mut acc = T::zero();
    for bit in (0..64).rev() {
        acc = acc.clone() + acc;
        if k >> bit & 1 == 1 {
            acc = acc + T::one();
        }
    }
    acc
}

fn pow<T: Num + Clone>(x: &T, e: u32) -> T {
    (0..e).fold(T::one(), |acc, _| acc * x.clone())
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// P(X ≥ k_min) for X ~ Binomial(n_domains, p_align), summed exactly in `T`.
///
/// Works for floats and for exact rationals.
pub fn chance_alignment_probability<T>(n_domains: u32, k_min: u32, p_align: T) -> Result<T, LearnerError>
where
    T: Num + Clone + PartialOrd,
{
    if p_align < T::zero() || p_align > T::one() {
        return Err(LearnerError::Domain("probability must lie in [0, 1]".into()));
    }
    if n_domains > 60 {
        return Err(LearnerError::Domain("at most 60 domains".into()));
    }
    let q = T::one() - p_align.clone();
    let mut total = T::zero();
    for k in k_min..=n_domains {
        let c: T = from_count(binomial(n_domains as u64, k as u64));
        total = total + c * pow(&p_align, k) * pow(&q, n_domains - k);
    }
    Ok(total)
}

/// Median of a sample; the mean of the middle two for even sizes.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}
