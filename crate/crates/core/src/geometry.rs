//! Compact convex feasible sets with exact Euclidean projection and linear
//! minimization.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::Vector;

/// A compact convex feasible region.
///
/// Deserializes from `{"kind": "box", "lower": [..], "upper": [..]}`,
/// `{"kind": "l1", "dim": d, "radius": r}` or `{"kind": "l2", "dim": d, "radius": r}`.
/// Call [`ConstraintSet::validate`] after deserializing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConstraintSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    L1 { dim: usize, radius: f64 },
    L2 { dim: usize, radius: f64 },
}

impl ConstraintSet {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let set = ConstraintSet::Box { lower, upper };
        set.validate()?;
        Ok(set)
    }

    /// The box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo; dim], vec![hi; dim])
    }

    pub fn l1_ball(dim: usize, radius: f64) -> Result<Self> {
        let set = ConstraintSet::L1 { dim, radius };
        set.validate()?;
        Ok(set)
    }

    pub fn l2_ball(dim: usize, radius: f64) -> Result<Self> {
        let set = ConstraintSet::L2 { dim, radius };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConstraintSet::Box { lower, upper } => {
                if lower.is_empty() {
                    return Err(Error::InvalidSet("box must have dimension >= 1".into()));
                }
                check_dim(lower.len(), upper.len())?;
                check_finite("box bounds", lower)?;
                check_finite("box bounds", upper)?;
                if let Some(j) = (0..lower.len()).find(|&j| lower[j] >= upper[j]) {
                    return Err(Error::InvalidSet(format!(
                        "box needs lower < upper, coordinate {j} has {} >= {}",
                        lower[j], upper[j]
                    )));
                }
                Ok(())
            }
            ConstraintSet::L1 { dim, radius } | ConstraintSet::L2 { dim, radius } => {
                if *dim == 0 {
                    return Err(Error::InvalidSet("ball must have dimension >= 1".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidSet(format!("radius must be positive, got {radius}")));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintSet::Box { lower, .. } => lower.len(),
            ConstraintSet::L1 { dim, .. } | ConstraintSet::L2 { dim, .. } => *dim,
        }
    }

    /// Box midpoint, or the origin for balls.
    pub fn center(&self) -> Vector {
        match self {
            ConstraintSet::Box { lower, upper } => {
                Vector::from_iterator(lower.len(), lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)))
            }
            _ => Vector::zeros(self.dim()),
        }
    }

    /// Exact Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            ConstraintSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (u - l) * (u - l))
                .sum::<f64>()
                .sqrt(),
            ConstraintSet::L1 { radius, .. } | ConstraintSet::L2 { radius, .. } => 2.0 * radius,
        }
    }

    /// Smallest axis-aligned box containing the set, as `(lower, upper)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ConstraintSet::Box { lower, upper } => (lower.clone(), upper.clone()),
            ConstraintSet::L1 { dim, radius } | ConstraintSet::L2 { dim, radius } => {
                (vec![-radius; *dim], vec![*radius; *dim])
            }
        }
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            ConstraintSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            ConstraintSet::L1 { radius, .. } => x.lp_norm(1) <= radius + tol,
            ConstraintSet::L2 { radius, .. } => x.norm() <= radius + tol,
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, point: &Vector) -> Result<Vector> {
        check_dim(self.dim(), point.len())?;
        check_finite("projection point", point.as_slice())?;
        Ok(match self {
            ConstraintSet::Box { lower, upper } => {
                Vector::from_iterator(point.len(), point.iter().zip(lower.iter().zip(upper)).map(|(v, (l, u))| v.clamp(*l, *u)))
            }
            ConstraintSet::L1 { radius, .. } => project_l1(point, *radius),
            ConstraintSet::L2 { radius, .. } => {
                let norm = point.norm();
                if norm <= *radius {
                    point.clone()
                } else {
                    point * (*radius / norm)
                }
            }
        })
    }

    /// A feasible minimizer of `<direction, x>` over the set.
    ///
    /// Box: the vertex picking `lower` where the direction is positive or
    /// zero and `upper` where it is negative. L1 ball: `-radius * sign * e_j`
    /// for the first coordinate of largest magnitude. L2 ball:
    /// `-radius * direction / |direction|`. A zero direction returns
    /// [`ConstraintSet::center`].
    pub fn linear_minimize(&self, direction: &Vector) -> Result<Vector> {
        check_dim(self.dim(), direction.len())?;
        check_finite("direction", direction.as_slice())?;
        if direction.iter().all(|&v| v == 0.0) {
            return Ok(self.center());
        }
        Ok(match self {
            ConstraintSet::Box { lower, upper } => Vector::from_iterator(
                direction.len(),
                direction
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(d, (l, u))| if *d < 0.0 { *u } else { *l }),
            ),
            ConstraintSet::L1 { radius, .. } => {
                let mut best = 0;
                for j in 1..direction.len() {
                    if direction[j].abs() > direction[best].abs() {
                        best = j;
                    }
                }
                let mut x = Vector::zeros(direction.len());
                x[best] = -radius * direction[best].signum();
                x
            }
            ConstraintSet::L2 { radius, .. } => direction * (-radius / direction.norm()),
        })
    }
}

/// Sort-then-threshold projection onto `{x : |x|_1 <= radius}`.
fn project_l1(v: &Vector, radius: f64) -> Vector {
    if v.lp_norm(1) <= radius {
        return v.clone();
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut threshold = 0.0;
    for (j, m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - radius) / (j + 1) as f64;
        if m - t > 0.0 {
            threshold = t;
        } else {
            break;
        }
    }
    v.map(|x| x.signum() * (x.abs() - threshold).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    /// Dense grid search for the nearest point of the l1 ball of radius `r` in 2-d.
    fn grid_nearest_l1(p: &Vector, r: f64, steps: usize) -> Vector {
        let mut best = (f64::INFINITY, v(&[0.0, 0.0]));
        let h = 2.0 * r / steps as f64;
        for a in 0..=steps {
            for b in 0..=steps {
                let x = v(&[-r + a as f64 * h, -r + b as f64 * h]);
                if x.lp_norm(1) <= r + 1e-12 {
                    let d = (&x - p).norm_squared();
                    if d < best.0 {
                        best = (d, x);
                    }
                }
            }
        }
        best.1
    }

    #[test]
    fn box_projection_clamps() {
        let set = ConstraintSet::cube(2, -3.0, 3.0).unwrap();
        assert_eq!(set.project(&v(&[5.0, -4.0])).unwrap(), v(&[3.0, -3.0]));
    }

    #[test]
    fn l1_projection_matches_grid() {
        let set = ConstraintSet::l1_ball(2, 3.0).unwrap();
        let p = set.project(&v(&[2.0, 2.0])).unwrap();
        assert_abs_diff_eq!(p, v(&[1.5, 1.5]), epsilon = 1e-12);
        let g = grid_nearest_l1(&v(&[2.0, 2.0]), 3.0, 600);
        assert!((&g - &p).norm() <= 2.0 * 6.0 / 600.0);
    }

    #[test]
    fn l1_projection_sparse_case() {
        // far along one axis, the other coordinate is thresholded away
        let set = ConstraintSet::l1_ball(2, 1.0).unwrap();
        let p = set.project(&v(&[5.0, 0.5])).unwrap();
        assert_abs_diff_eq!(p, v(&[1.0, 0.0]), epsilon = 1e-12);
    }

    #[test]
    fn projection_errors() {
        let set = ConstraintSet::l2_ball(2, 1.0).unwrap();
        assert!(matches!(
            set.project(&v(&[1.0, 2.0, 3.0])),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert!(matches!(set.project(&v(&[f64::NAN, 0.0])), Err(Error::NonFinite(_))));
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(ConstraintSet::boxed(vec![1.0], vec![1.0]).is_err());
        assert!(ConstraintSet::boxed(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(ConstraintSet::l1_ball(2, 0.0).is_err());
        assert!(ConstraintSet::l2_ball(0, 1.0).is_err());
    }

    #[test]
    fn linear_minimize_examples() {
        let l1 = ConstraintSet::l1_ball(2, 3.0).unwrap();
        assert_eq!(l1.linear_minimize(&v(&[1.0, -2.0])).unwrap(), v(&[0.0, 3.0]));
        // tie goes to the lowest index
        assert_eq!(l1.linear_minimize(&v(&[2.0, -2.0])).unwrap(), v(&[-3.0, 0.0]));
        let bx = ConstraintSet::cube(2, -3.0, 3.0).unwrap();
        assert_eq!(bx.linear_minimize(&v(&[1.0, -2.0])).unwrap(), v(&[-3.0, 3.0]));
        let l2 = ConstraintSet::l2_ball(2, 2.0).unwrap();
        assert_abs_diff_eq!(l2.linear_minimize(&v(&[3.0, 4.0])).unwrap(), v(&[-1.2, -1.6]), epsilon = 1e-12);
        for set in [&l1, &bx, &l2] {
            assert_eq!(set.linear_minimize(&v(&[0.0, 0.0])).unwrap(), set.center());
        }
        let off = ConstraintSet::boxed(vec![1.0, 2.0], vec![3.0, 6.0]).unwrap();
        assert_eq!(off.linear_minimize(&v(&[0.0, 0.0])).unwrap(), v(&[2.0, 4.0]));
    }

    #[test]
    fn diameters() {
        let bx = ConstraintSet::cube(2, -3.0, 3.0).unwrap();
        assert_abs_diff_eq!(bx.diameter(), 6.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(ConstraintSet::l2_ball(2, 3.0).unwrap().diameter(), 6.0);
        let l1 = ConstraintSet::l1_ball(2, 3.0).unwrap();
        // brute force over vertex pairs
        let verts = [v(&[3.0, 0.0]), v(&[-3.0, 0.0]), v(&[0.0, 3.0]), v(&[0.0, -3.0])];
        let brute = verts
            .iter()
            .flat_map(|a| verts.iter().map(move |b| (a - b).norm()))
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(l1.diameter(), brute, epsilon = 1e-12);
    }

    #[test]
    fn serde_shape() {
        let set: ConstraintSet = serde_json::from_str(r#"{"kind":"l1","dim":2,"radius":3.0}"#).unwrap();
        assert_eq!(set, ConstraintSet::l1_ball(2, 3.0).unwrap());
        let set: ConstraintSet =
            serde_json::from_str(r#"{"kind":"box","lower":[-3,-3],"upper":[3,3]}"#).unwrap();
        assert_eq!(set, ConstraintSet::cube(2, -3.0, 3.0).unwrap());
    }

    fn arb_set() -> impl Strategy<Value = ConstraintSet> {
        (1usize..5, 0.1f64..5.0, 0u8..3).prop_flat_map(|(d, r, kind)| {
            prop::collection::vec((-4.0f64..4.0, 0.1f64..3.0), d).prop_map(move |bounds| match kind {
                0 => ConstraintSet::L1 { dim: d, radius: r },
                1 => ConstraintSet::L2 { dim: d, radius: r },
                _ => ConstraintSet::Box {
                    lower: bounds.iter().map(|b| b.0).collect(),
                    upper: bounds.iter().map(|b| b.0 + b.1).collect(),
                },
            })
        })
    }

    fn arb_set_and_points() -> impl Strategy<Value = (ConstraintSet, Vec<f64>, Vec<f64>, Vec<f64>)> {
        arb_set().prop_flat_map(|s| {
            let d = s.dim();
            (
                Just(s),
                prop::collection::vec(-10.0f64..10.0, d),
                prop::collection::vec(-10.0f64..10.0, d),
                prop::collection::vec(-10.0f64..10.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn projection_properties((set, a, b, z) in arb_set_and_points()) {
            let (a, b) = (Vector::from_vec(a), Vector::from_vec(b));
            let pa = set.project(&a).unwrap();
            let pb = set.project(&b).unwrap();
            prop_assert!(set.contains(&pa, 1e-9));
            // idempotent
            let ppa = set.project(&pa).unwrap();
            prop_assert!((&ppa - &pa).norm() <= 1e-12);
            // non-expansive
            prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-12);
            // optimality certificate against a feasible z
            let z = set.project(&Vector::from_vec(z)).unwrap();
            prop_assert!((&a - &pa).dot(&(&z - &pa)) <= 1e-9);
        }

        #[test]
        fn linear_minimize_is_minimal((set, dir, z, _w) in arb_set_and_points()) {
            let dir = Vector::from_vec(dir);
            let x = set.linear_minimize(&dir).unwrap();
            prop_assert!(set.contains(&x, 1e-9));
            let z = set.project(&Vector::from_vec(z)).unwrap();
            prop_assert!(dir.dot(&x) <= dir.dot(&z) + 1e-9);
        }
    }
}
