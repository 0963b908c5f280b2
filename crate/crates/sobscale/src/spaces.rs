//! Weighted norms on lattice boxes, duality pairings, and embedding
//! constants.
//!
//! A weight family attaches to every lattice point k the positive value
//! phi(<k>), where phi is either the pure power t^s or a generator from
//! [`crate::ro`]. The weighted norm is
//!
//! ```text
//! ||u|| = ( sum_k phi(<k>)^2 |u(k)|^2 )^(1/2),
//! ```
//!
//! the discrete Sobolev norm of order s when phi = t^s. Weights are
//! precomputed at construction and immutable afterward, so every norm or
//! pairing is a single fused pass over cached values.

use num_complex::Complex64;
use serde_json::json;

use crate::error::{Error, Result};
use crate::lattice::{bracket, l2_inner, LatticeBox, LatticeFunction};
use crate::numeric::{pairwise_sum, pairwise_sum_complex};
use crate::ro::RoFunction;

/// Where a weight family came from.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    /// phi(t) = t^s; weights are <k>^s exactly.
    Exponent(f64),
    /// A closed-form weight generator.
    Generator(RoFunction),
    /// Weights assembled from other families (interpolation machinery);
    /// the label describes the construction for reports.
    Derived(String),
}

impl WeightSource {
    /// A short JSON value describing the source in summaries.
    pub fn describe(&self) -> serde_json::Value {
        match self {
            WeightSource::Exponent(s) => json!({ "s": s }),
            WeightSource::Generator(phi) => phi.to_json_value(),
            WeightSource::Derived(label) => json!({ "derived": label }),
        }
    }
}

/// Cached positive weights phi(<k>) over a box, in enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFamily {
    domain: LatticeBox,
    source: WeightSource,
    weights: Vec<f64>,
}

impl WeightFamily {
    /// Weights <k>^s for the Sobolev scale of order s.
    pub fn from_exponent(domain: LatticeBox, s: f64) -> Self {
        let weights = (0..domain.len())
            .map(|i| bracket(&domain.point(i)).powf(s))
            .collect();
        Self { domain, source: WeightSource::Exponent(s), weights }
    }

    /// Weights phi(<k>) for a closed-form generator.
    pub fn from_generator(domain: LatticeBox, phi: &RoFunction) -> Result<Self> {
        let mut weights = Vec::with_capacity(domain.len());
        for i in 0..domain.len() {
            weights.push(phi.eval(bracket(&domain.point(i)))?);
        }
        Ok(Self { domain, source: WeightSource::Generator(phi.clone()), weights })
    }

    /// Wraps explicitly computed weights (used by the interpolation
    /// machinery); every weight must be positive and finite.
    pub fn from_weights(domain: LatticeBox, weights: Vec<f64>, label: String) -> Result<Self> {
        if weights.len() != domain.len() {
            return Err(Error::Shape(format!(
                "weight count {} does not match box size {}",
                weights.len(),
                domain.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w <= 0.0) {
            return Err(Error::Domain(format!("weights must be positive and finite, found {w}")));
        }
        Ok(Self { domain, source: WeightSource::Derived(label), weights })
    }

    pub fn domain(&self) -> &LatticeBox {
        &self.domain
    }

    pub fn source(&self) -> &WeightSource {
        &self.source
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }
}

fn check_same_box(a: &LatticeBox, b: &LatticeBox, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what} requires matching boxes")));
    }
    Ok(())
}

/// The weighted norm sqrt(sum phi(<k>)^2 |u(k)|^2).
pub fn h_phi_norm(u: &LatticeFunction, w: &WeightFamily) -> Result<f64> {
    check_same_box(u.domain(), &w.domain, "weighted norm")?;
    let terms: Vec<f64> = u
        .values()
        .iter()
        .zip(&w.weights)
        .map(|(z, &wt)| {
            let a = wt * z.re;
            let b = wt * z.im;
            a * a + b * b
        })
        .collect();
    Ok(pairwise_sum(&terms).sqrt())
}

/// The weighted inner product sum phi(<k>)^2 u(k) conj(v(k)), linear in the
/// first slot.
pub fn h_phi_inner(
    u: &LatticeFunction,
    v: &LatticeFunction,
    w: &WeightFamily,
) -> Result<Complex64> {
    check_same_box(u.domain(), &w.domain, "weighted inner product")?;
    check_same_box(v.domain(), &w.domain, "weighted inner product")?;
    let terms: Vec<Complex64> = u
        .values()
        .iter()
        .zip(v.values())
        .zip(&w.weights)
        .map(|((a, b), &wt)| a * b.conj() * (wt * wt))
        .collect();
    Ok(pairwise_sum_complex(&terms))
}

/// The plain pairing (u, v) together with the bound
/// ||u||_{H^(s)} ||v||_{H^(-s)} that dominates it.
pub fn duality_pairing_bound(
    u: &LatticeFunction,
    v: &LatticeFunction,
    s: f64,
) -> Result<(Complex64, f64)> {
    check_same_box(u.domain(), v.domain(), "duality pairing")?;
    let pairing = l2_inner(u, v)?;
    let wp = WeightFamily::from_exponent(u.domain().clone(), s);
    let wm = WeightFamily::from_exponent(u.domain().clone(), -s);
    let bound = h_phi_norm(u, &wp)? * h_phi_norm(v, &wm)?;
    Ok((pairing, bound))
}

/// The same pairing bound for a generator weight: |(u, v)| is dominated by
/// the H^phi norm of u times the H^(1/phi) norm of v.
pub fn duality_pairing_bound_phi(
    u: &LatticeFunction,
    v: &LatticeFunction,
    phi: &RoFunction,
) -> Result<(Complex64, f64)> {
    check_same_box(u.domain(), v.domain(), "duality pairing")?;
    let pairing = l2_inner(u, v)?;
    let wp = WeightFamily::from_generator(u.domain().clone(), phi)?;
    let wm = WeightFamily::from_generator(u.domain().clone(), &phi.clone().reciprocal())?;
    let bound = h_phi_norm(u, &wp)? * h_phi_norm(v, &wm)?;
    Ok((pairing, bound))
}

/// The norming functional for the order-s norm: returns the supremum of
/// |(u, v)| over the unit ball of H^(-s) together with the maximizer that
/// attains it, v*(k) = <k>^(2s) u(k) / ||u||_{H^(s)}.
pub fn duality_sup(u: &LatticeFunction, s: f64) -> Result<(f64, LatticeFunction)> {
    let wp = WeightFamily::from_exponent(u.domain().clone(), s);
    let norm = h_phi_norm(u, &wp)?;
    if norm == 0.0 {
        return Err(Error::Degenerate(
            "the norming functional of the zero function is undefined".into(),
        ));
    }
    let domain = u.domain().clone();
    let values = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let b = bracket(&domain.point(i));
            z * (b.powf(2.0 * s) / norm)
        })
        .collect();
    let maximizer = LatticeFunction::from_values(domain, values)?;
    let sup_value = l2_inner(u, &maximizer)?.re;
    Ok((sup_value, maximizer))
}

/// The uniform-norm embedding constant of a truncation, with its trend over
/// nested sub-boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinfEmbedding {
    /// C = (sum over the box of phi(<k>)^-2)^(1/2); the bound
    /// ||u||_inf <= C ||u||_phi holds for functions supported in the box.
    pub constant: f64,
    /// (radius, constant over the sub-box of that radius), increasing radii
    /// ending at the full box, for judging convergence of the defining sum.
    pub trend: Vec<(i64, f64)>,
}

/// Computes the embedding constant C and its nested-radius trend.
pub fn linf_embedding_constant(w: &WeightFamily) -> LinfEmbedding {
    let radius = w.domain.radius();
    let mut radii: Vec<i64> = [radius / 8, radius / 4, radius / 2, radius]
        .iter()
        .map(|&r| r.max(1))
        .collect();
    radii.dedup();
    let trend: Vec<(i64, f64)> = radii
        .iter()
        .map(|&r| {
            let terms: Vec<f64> = (0..w.domain.len())
                .filter(|&i| w.domain.point(i).iter().all(|c| c.abs() <= r))
                .map(|i| {
                    let wt = w.weights[i];
                    1.0 / (wt * wt)
                })
                .collect();
            (r, pairwise_sum(&terms).sqrt())
        })
        .collect();
    let constant = trend.last().expect("trend is nonempty").1;
    LinfEmbedding { constant, trend }
}

/// The exact operator norm of the identity between two weighted norms on
/// the same box: sup over the box of w0(k) / w1(k).
pub fn embedding_ratio(w0: &WeightFamily, w1: &WeightFamily) -> Result<f64> {
    check_same_box(&w0.domain, &w1.domain, "embedding ratio")?;
    Ok(w0
        .weights
        .iter()
        .zip(&w1.weights)
        .map(|(a, b)| a / b)
        .fold(0.0f64, f64::max))
}

/// CSV breakdown of a weighted norm: one row per point with the coordinates
/// of k, the weight, |u(k)|, and that point's contribution
/// (weight * |u(k)|)^2 to the squared norm.
pub fn norm_breakdown_csv(u: &LatticeFunction, w: &WeightFamily) -> Result<String> {
    check_same_box(u.domain(), &w.domain, "norm breakdown")?;
    let mut out = String::new();
    for j in 1..=w.domain.n() {
        out.push_str(&format!("k{j},"));
    }
    out.push_str("weight,abs_u,contribution\n");
    for (i, z) in u.values().iter().enumerate() {
        for c in w.domain.point(i) {
            out.push_str(&format!("{c},"));
        }
        let wt = w.weights[i];
        let a = z.norm();
        out.push_str(&format!("{},{},{}\n", wt, a, (wt * a) * (wt * a)));
    }
    Ok(out)
}

/// JSON one-line summary of a weighted norm computation.
pub fn norm_summary_json(u: &LatticeFunction, w: &WeightFamily) -> Result<String> {
    let norm = h_phi_norm(u, w)?;
    let summary = json!({
        "norm": norm,
        "s_or_family": w.source.describe(),
        "box": { "n": w.domain.n(), "N": w.domain.radius() },
    });
    Ok(summary.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::lp_norm;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn delta(b: &LatticeBox, k: &[i64]) -> LatticeFunction {
        LatticeFunction::delta(b.clone(), k).unwrap()
    }

    #[test]
    fn weight_at_origin_is_phi_of_one() {
        let b = LatticeBox::new(2, 3).unwrap();
        let w = WeightFamily::from_generator(b.clone(), &RoFunction::power_log(2.0, 1.0)).unwrap();
        let origin = b.index_of(&[0, 0]).unwrap();
        let expected = RoFunction::power_log(2.0, 1.0).eval(1.0).unwrap();
        assert_abs_diff_eq!(w.weight(origin), expected, epsilon = 1e-15);
        assert!(w.weights().iter().all(|&x| x > 0.0 && x.is_finite()));
    }

    #[test]
    fn exponent_weights_are_bracket_powers() {
        let b = LatticeBox::new(1, 4).unwrap();
        let w = WeightFamily::from_exponent(b.clone(), 1.5);
        for i in 0..b.len() {
            let k = b.point(i)[0];
            let expected = (1.0 + (k * k) as f64).sqrt().powf(1.5);
            assert_eq!(w.weight(i), expected);
        }
    }

    #[test]
    fn norm_of_deltas_matches_closed_forms() {
        let b2 = LatticeBox::new(2, 2).unwrap();
        let w1 = WeightFamily::from_exponent(b2.clone(), 1.0);
        assert_abs_diff_eq!(h_phi_norm(&delta(&b2, &[0, 0]), &w1).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            h_phi_norm(&delta(&b2, &[1, 0]), &w1).unwrap(),
            2.0f64.sqrt(),
            epsilon = 1e-15
        );
        let sum = LatticeFunction::from_fn(b2.clone(), |k| {
            if k == [0, 0] || k == [1, 0] {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        assert_abs_diff_eq!(h_phi_norm(&sum, &w1).unwrap(), 3.0f64.sqrt(), epsilon = 1e-15);
        // Any generator gives phi(1) on the origin delta.
        let wlog = WeightFamily::from_generator(b2.clone(), &RoFunction::power_log(1.0, 1.0))
            .unwrap();
        let phi1 = RoFunction::power_log(1.0, 1.0).eval(1.0).unwrap();
        assert_abs_diff_eq!(h_phi_norm(&delta(&b2, &[0, 0]), &wlog).unwrap(), phi1, epsilon = 1e-15);
    }

    #[test]
    fn order_zero_norm_equals_l2_exactly() {
        let b = LatticeBox::new(1, 6).unwrap();
        let u = LatticeFunction::from_fn(b.clone(), |k| c(k[0] as f64 * 0.3, -k[0] as f64));
        let w0 = WeightFamily::from_exponent(b, 0.0);
        assert_eq!(h_phi_norm(&u, &w0).unwrap(), lp_norm(&u, 2.0).unwrap());
    }

    #[test]
    fn inner_product_recovers_norm_and_is_sesquilinear() {
        let b = LatticeBox::new(1, 3).unwrap();
        let w = WeightFamily::from_exponent(b.clone(), 2.0);
        let u = LatticeFunction::from_fn(b.clone(), |k| c(k[0] as f64, 1.0));
        let v = LatticeFunction::from_fn(b.clone(), |k| c(0.5, -k[0] as f64));
        let nu = h_phi_norm(&u, &w).unwrap();
        let ip = h_phi_inner(&u, &u, &w).unwrap();
        assert_abs_diff_eq!(ip.re, nu * nu, epsilon = 1e-12 * nu * nu);
        assert_abs_diff_eq!(ip.im, 0.0, epsilon = 1e-12 * nu * nu);
        // (i u, v) = i (u, v) and (u, i v) = -i (u, v).
        let iu = LatticeFunction::from_values(
            b.clone(),
            u.values().iter().map(|z| z * c(0.0, 1.0)).collect(),
        )
        .unwrap();
        let iv = LatticeFunction::from_values(
            b,
            v.values().iter().map(|z| z * c(0.0, 1.0)).collect(),
        )
        .unwrap();
        let base = h_phi_inner(&u, &v, &w).unwrap();
        let left = h_phi_inner(&iu, &v, &w).unwrap();
        let right = h_phi_inner(&u, &iv, &w).unwrap();
        assert!((left - base * c(0.0, 1.0)).norm() <= 1e-13);
        assert!((right + base * c(0.0, 1.0)).norm() <= 1e-13);
    }

    #[test]
    fn orthogonal_deltas_have_zero_weighted_product() {
        let b = LatticeBox::new(2, 1).unwrap();
        let w = WeightFamily::from_generator(b.clone(), &RoFunction::power(2.0)).unwrap();
        let ip = h_phi_inner(&delta(&b, &[0, 0]), &delta(&b, &[1, 0]), &w).unwrap();
        assert_eq!(ip, c(0.0, 0.0));
        let self_ip = h_phi_inner(&delta(&b, &[0, 0]), &delta(&b, &[0, 0]), &w).unwrap();
        assert_abs_diff_eq!(self_ip.re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn pairing_bound_examples() {
        let b = LatticeBox::new(1, 2).unwrap();
        let (p, bound) = duality_pairing_bound(&delta(&b, &[0]), &delta(&b, &[0]), 3.0).unwrap();
        assert_abs_diff_eq!(p.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bound, 1.0, epsilon = 1e-15);

        let (p2, bound2) = duality_pairing_bound(&delta(&b, &[0]), &delta(&b, &[1]), 1.0).unwrap();
        assert_eq!(p2, c(0.0, 0.0));
        assert_abs_diff_eq!(bound2, 1.0 / 2.0f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn norming_functional_example_is_exact() {
        // u = delta_0 + delta_1 in one dimension with s = 1: the supremum is
        // sqrt(3), attained at v* = (delta_0 + 2 delta_1)/sqrt(3), which has
        // unit dual norm: (1 * 1 + 4 * 1/2)/3 = 1.
        let b = LatticeBox::new(1, 2).unwrap();
        let u = LatticeFunction::from_fn(b.clone(), |k| {
            if k[0] == 0 || k[0] == 1 {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let (sup, vstar) = duality_sup(&u, 1.0).unwrap();
        let expected = 3.0f64.sqrt();
        assert_abs_diff_eq!(sup, expected, epsilon = 1e-13);
        assert_abs_diff_eq!(
            vstar.value_at(&[0]).re,
            1.0 / expected,
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            vstar.value_at(&[1]).re,
            2.0 / expected,
            epsilon = 1e-13
        );
        let wm = WeightFamily::from_exponent(b, -1.0);
        assert_abs_diff_eq!(h_phi_norm(&vstar, &wm).unwrap(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn norming_functional_is_homogeneous_and_rejects_zero() {
        let b = LatticeBox::new(1, 3).unwrap();
        let u = LatticeFunction::from_fn(b.clone(), |k| c(k[0] as f64, 0.5));
        let scale = c(2.0, 1.0);
        let su = LatticeFunction::from_values(
            b.clone(),
            u.values().iter().map(|z| z * scale).collect(),
        )
        .unwrap();
        let (a, _) = duality_sup(&u, 1.5).unwrap();
        let (sa, _) = duality_sup(&su, 1.5).unwrap();
        assert_abs_diff_eq!(sa, scale.norm() * a, epsilon = 1e-12 * sa);
        match duality_sup(&LatticeFunction::zeros(b), 1.5) {
            Err(Error::Degenerate(_)) => {}
            other => panic!("expected degenerate-input error, got {other:?}"),
        }
    }

    #[test]
    fn embedding_constant_examples() {
        // phi = 1 on N = 1 in one dimension: three unit terms.
        let b = LatticeBox::new(1, 1).unwrap();
        let w = WeightFamily::from_exponent(b, 0.0);
        let e = linf_embedding_constant(&w);
        assert_abs_diff_eq!(e.constant * e.constant, 3.0, epsilon = 1e-14);

        // phi = t in one dimension: the squared constants increase toward
        // pi * coth(pi) as the radius grows.
        let full = LatticeBox::new(1, 400).unwrap();
        let w1 = WeightFamily::from_exponent(full, 1.0);
        let e1 = linf_embedding_constant(&w1);
        let target = std::f64::consts::PI / (std::f64::consts::PI).tanh();
        let sq: Vec<f64> = e1.trend.iter().map(|&(_, cn)| cn * cn).collect();
        for win in sq.windows(2) {
            assert!(win[0] < win[1]);
        }
        assert!((sq[sq.len() - 1] - target).abs() < 5e-3);
        assert!(sq.iter().all(|&v| v < target));

        // Independent partial-sum oracle at the full radius.
        let mut oracle = 0.0f64;
        for k in -400i64..=400 {
            oracle += 1.0 / (1.0 + (k * k) as f64);
        }
        assert_abs_diff_eq!(sq[sq.len() - 1], oracle, epsilon = 1e-12);
    }

    #[test]
    fn embedding_constant_dominates_sup_norm() {
        let b = LatticeBox::new(1, 12).unwrap();
        let w = WeightFamily::from_generator(b.clone(), &RoFunction::power_log(1.0, 1.0))
            .unwrap();
        let e = linf_embedding_constant(&w);
        let u = LatticeFunction::from_fn(b, |k| c(1.0 / (1 + k[0] * k[0]) as f64, 0.2));
        let sup = lp_norm(&u, f64::INFINITY).unwrap();
        let weighted = h_phi_norm(&u, &w).unwrap();
        assert!(sup <= e.constant * weighted * (1.0 + 1e-12));
    }

    #[test]
    fn embedding_ratio_examples() {
        let b = LatticeBox::new(1, 4).unwrap();
        let w1 = WeightFamily::from_exponent(b.clone(), 1.0);
        let w2 = WeightFamily::from_exponent(b.clone(), 2.0);
        // Identity from the smoother space into the rougher one has norm 1.
        assert_abs_diff_eq!(embedding_ratio(&w1, &w2).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(embedding_ratio(&w1, &w1).unwrap(), 1.0, epsilon = 1e-15);
        // The reverse direction costs the edge bracket.
        assert_abs_diff_eq!(
            embedding_ratio(&w2, &w1).unwrap(),
            17.0f64.sqrt(),
            epsilon = 1e-14
        );
        let other = WeightFamily::from_exponent(LatticeBox::new(1, 5).unwrap(), 1.0);
        assert!(embedding_ratio(&w1, &other).is_err());
    }

    #[test]
    fn sobolev_norms_are_monotone_in_the_order() {
        let b = LatticeBox::new(2, 3).unwrap();
        let u = LatticeFunction::from_fn(b.clone(), |k| c((k[0] - k[1]) as f64, 0.7));
        let mut prev = 0.0;
        for s in [-1.0, 0.0, 0.5, 2.0] {
            let w = WeightFamily::from_exponent(b.clone(), s);
            let n = h_phi_norm(&u, &w).unwrap();
            assert!(n >= prev * (1.0 - 1e-13));
            prev = n;
        }
    }

    #[test]
    fn breakdown_and_summary_formats() {
        let b = LatticeBox::new(1, 1).unwrap();
        let u = LatticeFunction::from_values(
            b.clone(),
            vec![c(0.0, 0.0), c(3.0, 4.0), c(1.0, 0.0)],
        )
        .unwrap();
        let w = WeightFamily::from_exponent(b, 1.0);
        let csv = norm_breakdown_csv(&u, &w).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k1,weight,abs_u,contribution");
        // k = 0 row: weight 1, |u| = 5, contribution 25.
        assert_eq!(lines[2], "0,1,5,25");

        let summary = norm_summary_json(&u, &w).unwrap();
        let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
        assert_eq!(v["box"]["N"], 1);
        assert_eq!(v["s_or_family"]["s"], 1.0);
        assert!(v["norm"].as_f64().unwrap() > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_pairing_never_exceeds_bound(
            uvals in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 25),
            vvals in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 25),
            s in -2.0f64..2.0
        ) {
            let b = LatticeBox::new(2, 2).unwrap();
            let u = LatticeFunction::from_values(
                b.clone(), uvals.iter().map(|&(re, im)| c(re, im)).collect()).unwrap();
            let v = LatticeFunction::from_values(
                b, vvals.iter().map(|&(re, im)| c(re, im)).collect()).unwrap();
            let (pairing, bound) = duality_pairing_bound(&u, &v, s).unwrap();
            prop_assert!(pairing.norm() <= bound * (1.0 + 1e-12));
        }

        #[test]
        fn prop_phi_pairing_bound_for_generator_weights(
            uvals in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 9),
            vvals in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 9)
        ) {
            let b = LatticeBox::new(1, 4).unwrap();
            let phi = RoFunction::product(vec![
                RoFunction::power(1.0),
                RoFunction::power_log(0.0, 1.0),
            ]);
            let u = LatticeFunction::from_values(
                b.clone(), uvals.iter().map(|&(re, im)| c(re, im)).collect()).unwrap();
            let v = LatticeFunction::from_values(
                b, vvals.iter().map(|&(re, im)| c(re, im)).collect()).unwrap();
            let (pairing, bound) = duality_pairing_bound_phi(&u, &v, &phi).unwrap();
            prop_assert!(pairing.norm() <= bound * (1.0 + 1e-12));
        }

        #[test]
        fn prop_norming_functional_attains_the_norm(
            uvals in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 9),
            s in -1.5f64..1.5
        ) {
            let b = LatticeBox::new(1, 4).unwrap();
            let u = LatticeFunction::from_values(
                b.clone(), uvals.iter().map(|&(re, im)| c(re, im)).collect()).unwrap();
            let w = WeightFamily::from_exponent(b.clone(), s);
            let norm = h_phi_norm(&u, &w).unwrap();
            prop_assume!(norm > 1e-9);
            let (sup, vstar) = duality_sup(&u, s).unwrap();
            prop_assert!((sup - norm).abs() <= 1e-12 * norm);
            let wm = WeightFamily::from_exponent(b, -s);
            let dual_norm = h_phi_norm(&vstar, &wm).unwrap();
            prop_assert!((dual_norm - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn prop_polarization_identity(
            uvals in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 9),
            vvals in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 9)
        ) {
            let b = LatticeBox::new(1, 4).unwrap();
            let u = LatticeFunction::from_values(
                b.clone(), uvals.iter().map(|&(re, im)| c(re, im)).collect()).unwrap();
            let v = LatticeFunction::from_values(
                b.clone(), vvals.iter().map(|&(re, im)| c(re, im)).collect()).unwrap();
            let w = WeightFamily::from_generator(b.clone(), &RoFunction::power(0.5)).unwrap();
            let plus = LatticeFunction::from_values(
                b.clone(),
                u.values().iter().zip(v.values()).map(|(a, bb)| a + bb).collect()).unwrap();
            let minus = LatticeFunction::from_values(
                b,
                u.values().iter().zip(v.values()).map(|(a, bb)| a - bb).collect()).unwrap();
            let lhs = 4.0 * h_phi_inner(&u, &v, &w).unwrap().re;
            let rhs = h_phi_norm(&plus, &w).unwrap().powi(2)
                - h_phi_norm(&minus, &w).unwrap().powi(2);
            let scale = 1.0 + lhs.abs().max(rhs.abs());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
    }
}
