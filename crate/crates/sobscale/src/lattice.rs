//! Truncated integer lattices and complex-valued functions on them.
//!
//! The index set is the box {k in Z^n : |k_j| <= N for every axis j},
//! enumerated lexicographically: k_1 is the most significant coordinate and
//! each coordinate runs from -N to N. All containers in this crate store
//! values in that order, and all reductions use the fixed pairwise tree from
//! [`crate::numeric`], so every norm and inner product is bit-for-bit
//! reproducible.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, pairwise_sum_complex};

/// The box {k in Z^n : |k_j| <= N} with its lexicographic enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeBox {
    n: usize,
    radius: i64,
}

impl LatticeBox {
    /// Creates the box of the given dimension and radius.
    ///
    /// Requires `n >= 1` and `radius >= 1`.
    pub fn new(n: usize, radius: i64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("lattice dimension must be at least 1".into()));
        }
        if radius < 1 {
            return Err(Error::Parameter(format!(
                "box radius must be a positive integer, got {radius}"
            )));
        }
        // Guard (2N+1)^n against overflow so later index arithmetic is safe.
        let side = 2 * (radius as u128) + 1;
        let mut count: u128 = 1;
        for _ in 0..n {
            count = count.checked_mul(side).ok_or_else(|| {
                Error::Parameter(format!("box (n={n}, N={radius}) has too many points"))
            })?;
            if count > u128::from(u32::MAX) {
                return Err(Error::Parameter(format!(
                    "box (n={n}, N={radius}) has too many points"
                )));
            }
        }
        Ok(Self { n, radius })
    }

    /// Lattice dimension n.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Box radius N.
    pub fn radius(&self) -> i64 {
        self.radius
    }

    /// Points per axis, 2N + 1.
    pub fn side(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    /// Total number of points, (2N + 1)^n.
    pub fn len(&self) -> usize {
        self.side().pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Whether k lies in the box. The length of k must equal n.
    pub fn contains(&self, k: &[i64]) -> bool {
        k.len() == self.n && k.iter().all(|&c| c.abs() <= self.radius)
    }

    /// Position of k in the lexicographic enumeration, if k is in the box.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        if !self.contains(k) {
            return None;
        }
        let side = self.side();
        let mut idx = 0usize;
        for &c in k {
            idx = idx * side + (c + self.radius) as usize;
        }
        Some(idx)
    }

    /// The lattice point at a given enumeration position.
    pub fn point(&self, mut idx: usize) -> Vec<i64> {
        assert!(idx < self.len(), "index {idx} out of range");
        let side = self.side();
        let mut k = vec![0i64; self.n];
        for j in (0..self.n).rev() {
            k[j] = (idx % side) as i64 - self.radius;
            idx /= side;
        }
        k
    }

    /// Iterates over all points in enumeration order.
    pub fn points(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }
}

/// Smoothed absolute value <k> = (1 + |k|^2)^(1/2).
///
/// Always at least 1, and equal to 1 exactly at the origin.
pub fn japanese_bracket(k: &[i64]) -> Result<f64> {
    if k.is_empty() {
        return Err(Error::Dimension("japanese_bracket requires a nonempty index".into()));
    }
    Ok(bracket(k))
}

pub(crate) fn bracket(k: &[i64]) -> f64 {
    let sq: f64 = k.iter().map(|&c| (c as f64) * (c as f64)).sum();
    (1.0 + sq).sqrt()
}

/// Euclidean length |k|.
pub(crate) fn abs_k(k: &[i64]) -> f64 {
    k.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt()
}

/// A complex-valued function on a [`LatticeBox`], stored in enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFunction {
    domain: LatticeBox,
    values: Vec<Complex64>,
}

impl LatticeFunction {
    /// The zero function on the given box.
    pub fn zeros(domain: LatticeBox) -> Self {
        let len = domain.len();
        Self { domain, values: vec![Complex64::new(0.0, 0.0); len] }
    }

    /// Wraps an explicit value vector; its length must match the box.
    pub fn from_values(domain: LatticeBox, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::Shape(format!(
                "value count {} does not match box size {}",
                values.len(),
                domain.len()
            )));
        }
        Ok(Self { domain, values })
    }

    /// Builds a function by evaluating f at every point of the box.
    pub fn from_fn(domain: LatticeBox, mut f: impl FnMut(&[i64]) -> Complex64) -> Self {
        let values = (0..domain.len()).map(|i| f(&domain.point(i))).collect();
        Self { domain, values }
    }

    /// The Kronecker delta at k0.
    pub fn delta(domain: LatticeBox, k0: &[i64]) -> Result<Self> {
        let idx = domain.index_of(k0).ok_or_else(|| {
            Error::Parameter(format!("delta location {k0:?} lies outside the box"))
        })?;
        let mut u = Self::zeros(domain);
        u.values[idx] = Complex64::new(1.0, 0.0);
        Ok(u)
    }

    pub fn domain(&self) -> &LatticeBox {
        &self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Value at k, where points outside the box read as zero.
    pub fn value_at(&self, k: &[i64]) -> Complex64 {
        match self.domain.index_of(k) {
            Some(i) => self.values[i],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Serializes to the interchange JSON form
    /// `{"n": .., "N": .., "values": [[re, im], ..]}` with values in
    /// enumeration order.
    pub fn to_json(&self) -> String {
        let repr = LatticeFunctionRepr {
            n: self.domain.n,
            radius: self.domain.radius,
            values: self.values.iter().map(|z| (z.re, z.im)).collect(),
        };
        serde_json::to_string(&repr).expect("serialization cannot fail")
    }

    /// Parses the interchange JSON form, rejecting value arrays whose length
    /// does not match the declared box.
    pub fn from_json(text: &str) -> Result<Self> {
        let repr: LatticeFunctionRepr = serde_json::from_str(text)?;
        let domain = LatticeBox::new(repr.n, repr.radius)?;
        let values = repr.values.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
        Self::from_values(domain, values)
    }

    /// CSV export with one row per point: the coordinates of k, then the
    /// real and imaginary parts. The header names the columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for j in 1..=self.domain.n {
            out.push_str(&format!("k{j},"));
        }
        out.push_str("re,im\n");
        for (i, z) in self.values.iter().enumerate() {
            for c in self.domain.point(i) {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!("{},{}\n", z.re, z.im));
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct LatticeFunctionRepr {
    n: usize,
    #[serde(rename = "N")]
    radius: i64,
    values: Vec<(f64, f64)>,
}

/// The norm (sum |u(k)|^p)^(1/p) for p in {1, 2}, or max |u(k)| for p = inf.
pub fn lp_norm(u: &LatticeFunction, p: f64) -> Result<f64> {
    if p == 1.0 {
        let terms: Vec<f64> = u.values.iter().map(|z| z.norm()).collect();
        Ok(pairwise_sum(&terms))
    } else if p == 2.0 {
        let terms: Vec<f64> = u.values.iter().map(|z| z.norm_sqr()).collect();
        Ok(pairwise_sum(&terms).sqrt())
    } else if p == f64::INFINITY {
        Ok(u.values.iter().map(|z| z.norm()).fold(0.0, f64::max))
    } else {
        Err(Error::Parameter(format!("unsupported exponent p = {p}, expected 1, 2, or inf")))
    }
}

/// The sesquilinear inner product sum u(k) * conj(v(k)), linear in the
/// first slot.
pub fn l2_inner(u: &LatticeFunction, v: &LatticeFunction) -> Result<Complex64> {
    if u.domain != v.domain {
        return Err(Error::Shape("inner product requires matching boxes".into()));
    }
    let terms: Vec<Complex64> =
        u.values.iter().zip(&v.values).map(|(a, b)| a * b.conj()).collect();
    Ok(pairwise_sum_complex(&terms))
}

/// Iterated forward difference with zero extension outside the box.
///
/// For each axis j the elementary step is (D_j u)(k) = u(k + e_j) - u(k),
/// where u reads as zero off the box; axis j is applied `alpha[j]` times and
/// the result lives on the same box.
pub fn forward_difference(u: &LatticeFunction, alpha: &[usize]) -> Result<LatticeFunction> {
    let domain = u.domain.clone();
    if alpha.len() != domain.n {
        return Err(Error::Dimension(format!(
            "difference order has {} components, box has dimension {}",
            alpha.len(),
            domain.n
        )));
    }
    let mut current = u.clone();
    for (axis, &order) in alpha.iter().enumerate() {
        for _ in 0..order {
            current = difference_once(&current, axis);
        }
    }
    Ok(current)
}

fn difference_once(u: &LatticeFunction, axis: usize) -> LatticeFunction {
    let domain = u.domain.clone();
    let mut shifted = vec![Complex64::new(0.0, 0.0); domain.len()];
    let mut k = vec![0i64; domain.n];
    for idx in 0..domain.len() {
        k.copy_from_slice(&domain.point(idx));
        k[axis] += 1;
        let up = u.value_at(&k);
        shifted[idx] = up - u.values[idx];
    }
    LatticeFunction { domain, values: shifted }
}

/// The seminorm sup over the box of |k^alpha * (D^beta u)(k)|, with the
/// forward difference D^beta taken with zero extension.
pub fn schwartz_seminorm(u: &LatticeFunction, alpha: &[usize], beta: &[usize]) -> Result<f64> {
    let n = u.domain.n;
    if alpha.len() != n || beta.len() != n {
        return Err(Error::Dimension(format!(
            "multi-indices must have length {n}, got {} and {}",
            alpha.len(),
            beta.len()
        )));
    }
    let diff = forward_difference(u, beta)?;
    let mut best = 0.0f64;
    for (idx, z) in diff.values.iter().enumerate() {
        let k = diff.domain.point(idx);
        let mut monomial = 1.0f64;
        for (j, &a) in alpha.iter().enumerate() {
            monomial *= (k[j] as f64).powi(a as i32);
        }
        best = best.max((monomial * z.norm()).abs());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn box_rejects_bad_parameters() {
        assert!(LatticeBox::new(0, 3).is_err());
        assert!(LatticeBox::new(1, 0).is_err());
        assert!(LatticeBox::new(1, -2).is_err());
    }

    #[test]
    fn enumeration_is_lexicographic_and_invertible() {
        let b = LatticeBox::new(2, 1).unwrap();
        let pts: Vec<Vec<i64>> = b.points().collect();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![-1, -1]);
        assert_eq!(pts[1], vec![-1, 0]);
        assert_eq!(pts[2], vec![-1, 1]);
        assert_eq!(pts[3], vec![0, -1]);
        assert_eq!(pts[8], vec![1, 1]);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(b.index_of(p), Some(i));
        }
        assert_eq!(b.index_of(&[2, 0]), None);
        assert_eq!(b.index_of(&[0]), None);
    }

    #[test]
    fn bracket_matches_closed_form() {
        assert!(japanese_bracket(&[]).is_err());
        assert_eq!(japanese_bracket(&[0, 0, 0]).unwrap(), 1.0);
        assert_abs_diff_eq!(japanese_bracket(&[3, 4]).unwrap(), 26.0f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(japanese_bracket(&[1]).unwrap(), 2.0f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn norms_on_a_known_function() {
        let b = LatticeBox::new(1, 1).unwrap();
        let u = LatticeFunction::from_values(b, vec![c(3.0, 4.0), c(0.0, 0.0), c(1.0, 0.0)])
            .unwrap();
        assert_abs_diff_eq!(lp_norm(&u, 1.0).unwrap(), 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lp_norm(&u, 2.0).unwrap(), 26.0f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(lp_norm(&u, f64::INFINITY).unwrap(), 5.0, epsilon = 1e-15);
        assert!(lp_norm(&u, 3.0).is_err());
    }

    #[test]
    fn inner_product_is_linear_first_slot_conjugate_second() {
        let b = LatticeBox::new(1, 1).unwrap();
        let u = LatticeFunction::from_values(b.clone(), vec![c(1.0, 2.0), c(0.0, 1.0), c(2.0, 0.0)])
            .unwrap();
        let v = LatticeFunction::from_values(b, vec![c(0.0, 1.0), c(1.0, 1.0), c(3.0, -1.0)])
            .unwrap();
        // Hand-expanded sum of u(k) * conj(v(k)).
        let expected = c(1.0, 2.0) * c(0.0, -1.0) + c(0.0, 1.0) * c(1.0, -1.0)
            + c(2.0, 0.0) * c(3.0, 1.0);
        let got = l2_inner(&u, &v).unwrap();
        assert_abs_diff_eq!(got.re, expected.re, epsilon = 1e-15);
        assert_abs_diff_eq!(got.im, expected.im, epsilon = 1e-15);
    }

    #[test]
    fn difference_of_delta_lands_on_the_left_neighbor() {
        // One dimensional: (D delta_0)(k) = delta_0(k+1) - delta_0(k)
        // equals +1 at k = -1 and -1 at k = 0.
        let b = LatticeBox::new(1, 4).unwrap();
        let u = LatticeFunction::delta(b, &[0]).unwrap();
        let d = forward_difference(&u, &[1]).unwrap();
        for (idx, z) in d.values().iter().enumerate() {
            let k = d.domain().point(idx)[0];
            let expected = match k {
                -1 => 1.0,
                0 => -1.0,
                _ => 0.0,
            };
            assert_abs_diff_eq!(z.re, expected, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn difference_of_coordinate_function_is_one_inside() {
        let b = LatticeBox::new(1, 5).unwrap();
        let u = LatticeFunction::from_fn(b, |k| c(k[0] as f64, 0.0));
        let d = forward_difference(&u, &[1]).unwrap();
        for (idx, z) in d.values().iter().enumerate() {
            let k = d.domain().point(idx)[0];
            // At the right edge u(N+1) reads as zero, so the step is -N.
            let expected = if k == 5 { -5.0 } else { 1.0 };
            assert_abs_diff_eq!(z.re, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn mixed_axis_differences_commute() {
        let b = LatticeBox::new(2, 3).unwrap();
        let u = LatticeFunction::from_fn(b, |k| {
            c((k[0] * k[0] + 2 * k[1]) as f64, (k[0] - k[1]) as f64)
        });
        let d12 = forward_difference(&forward_difference(&u, &[1, 0]).unwrap(), &[0, 1]).unwrap();
        let d21 = forward_difference(&forward_difference(&u, &[0, 1]).unwrap(), &[1, 0]).unwrap();
        let dboth = forward_difference(&u, &[1, 1]).unwrap();
        for i in 0..d12.values().len() {
            assert_abs_diff_eq!(d12.values()[i].re, d21.values()[i].re, epsilon = 1e-13);
            assert_abs_diff_eq!(d12.values()[i].im, d21.values()[i].im, epsilon = 1e-13);
            assert_abs_diff_eq!(d12.values()[i].re, dboth.values()[i].re, epsilon = 1e-13);
        }
    }

    #[test]
    fn seminorm_of_inverse_square_bracket_is_half() {
        // u(k) = <k>^-2 on the box N = 4, alpha = (1), beta = (0):
        // sup |k| / (1 + k^2) is attained at |k| = 1 with value 1/2.
        let b = LatticeBox::new(1, 4).unwrap();
        let u = LatticeFunction::from_fn(b, |k| {
            let t = bracket(k);
            c(1.0 / (t * t), 0.0)
        });
        let got = schwartz_seminorm(&u, &[1], &[0]).unwrap();

        // Independent brute-force scan.
        let mut brute = 0.0f64;
        for k in -4i64..=4 {
            let v = (k as f64).abs() / (1.0 + (k * k) as f64);
            brute = brute.max(v);
        }
        assert_abs_diff_eq!(got, brute, epsilon = 1e-15);
        assert_abs_diff_eq!(got, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn json_round_trip_preserves_everything() {
        let b = LatticeBox::new(2, 2).unwrap();
        let u = LatticeFunction::from_fn(b, |k| c(k[0] as f64 + 0.5, k[1] as f64 - 0.25));
        let text = u.to_json();
        let back = LatticeFunction::from_json(&text).unwrap();
        assert_eq!(u, back);
        // Field spot-checks on the serialized form.
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["n"], 2);
        assert_eq!(v["N"], 2);
        assert_eq!(v["values"].as_array().unwrap().len(), 25);
    }

    #[test]
    fn json_rejects_wrong_value_count() {
        let text = r#"{"n":1,"N":1,"values":[[1.0,0.0],[2.0,0.0]]}"#;
        assert!(LatticeFunction::from_json(text).is_err());
    }

    #[test]
    fn csv_export_lists_coordinates_then_parts() {
        let b = LatticeBox::new(1, 1).unwrap();
        let u = LatticeFunction::from_values(b, vec![c(1.0, -1.0), c(0.0, 0.0), c(2.5, 3.0)])
            .unwrap();
        let csv = u.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k1,re,im");
        assert_eq!(lines[1], "-1,1,-1");
        assert_eq!(lines[3], "1,2.5,3");
    }

    proptest! {
        #[test]
        fn prop_norm_scales_absolutely_homogeneously(
            scale in -3.0f64..3.0,
            seedvals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 27)
        ) {
            let b = LatticeBox::new(3, 1).unwrap();
            let u = LatticeFunction::from_values(
                b.clone(),
                seedvals.iter().map(|&(re, im)| c(re, im)).collect(),
            ).unwrap();
            let su = LatticeFunction::from_values(
                b,
                seedvals.iter().map(|&(re, im)| c(re * scale, im * scale)).collect(),
            ).unwrap();
            for p in [1.0, 2.0, f64::INFINITY] {
                let lhs = lp_norm(&su, p).unwrap();
                let rhs = scale.abs() * lp_norm(&u, p).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
            }
        }

        #[test]
        fn prop_cauchy_schwarz_for_l2(
            uvals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 9),
            vvals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 9)
        ) {
            let b = LatticeBox::new(2, 1).unwrap();
            let u = LatticeFunction::from_values(
                b.clone(), uvals.iter().map(|&(re, im)| c(re, im)).collect()).unwrap();
            let v = LatticeFunction::from_values(
                b, vvals.iter().map(|&(re, im)| c(re, im)).collect()).unwrap();
            let lhs = l2_inner(&u, &v).unwrap().norm();
            let rhs = lp_norm(&u, 2.0).unwrap() * lp_norm(&v, 2.0).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn prop_parallelogram_identity(
            uvals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 5),
            vvals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 5)
        ) {
            let b = LatticeBox::new(1, 2).unwrap();
            let u = LatticeFunction::from_values(
                b.clone(), uvals.iter().map(|&(re, im)| c(re, im)).collect()).unwrap();
            let v = LatticeFunction::from_values(
                b.clone(), vvals.iter().map(|&(re, im)| c(re, im)).collect()).unwrap();
            let sum = LatticeFunction::from_values(
                b.clone(),
                u.values().iter().zip(v.values()).map(|(a, b)| a + b).collect()).unwrap();
            let diff = LatticeFunction::from_values(
                b,
                u.values().iter().zip(v.values()).map(|(a, b)| a - b).collect()).unwrap();
            let lhs = lp_norm(&sum, 2.0).unwrap().powi(2) + lp_norm(&diff, 2.0).unwrap().powi(2);
            let rhs = 2.0 * (lp_norm(&u, 2.0).unwrap().powi(2) + lp_norm(&v, 2.0).unwrap().powi(2));
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs));
        }
    }
}
