//! Butcher tableaux of the DIRK integrators.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct ButcherTableau {
    /// Lower-triangular stage coefficients.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    /// Embedded lower-order weights sharing the same stages.
    pub b_embedded: Option<Vec<f64>>,
    pub c: Vec<f64>,
    pub order: usize,
    pub stiffly_accurate: bool,
}

/// Diagonal coefficient of the three-stage, third-order, stiffly accurate DIRK.
pub const DIRK3_LAMBDA: f64 = 0.4358665215;
/// Third weight of the embedded second-order method.
pub const DIRK2_B3: f64 = 0.6636634972904365;

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Three-stage stiffly accurate DIRK3 with an embedded second-order row.
    ///
    /// The embedded weights satisfy `sum(bt) = 1` and `bt . c = 1/2` with
    /// `bt_3` fixed, which pins `bt_1 = lambda/(1-lambda) + bt_3` and
    /// `bt_2 = (1-2 lambda)/(1-lambda) - 2 bt_3`.
    pub fn dirk3() -> Self {
        let l = DIRK3_LAMBDA;
        let b1 = -1.5 * l * l + 4.0 * l - 0.25;
        let b2 = 1.5 * l * l - 5.0 * l + 1.25;
        let bt3 = DIRK2_B3;
        let bt1 = l / (1.0 - l) + bt3;
        let bt2 = (1.0 - 2.0 * l) / (1.0 - l) - 2.0 * bt3;
        Self {
            a: vec![
                vec![l, 0.0, 0.0],
                vec![0.5 * (1.0 - l), l, 0.0],
                vec![b1, b2, l],
            ],
            b: vec![b1, b2, l],
            b_embedded: Some(vec![bt1, bt2, bt3]),
            c: vec![l, 0.5 * (1.0 + l), 1.0],
            order: 3,
            stiffly_accurate: true,
        }
    }

    /// Composite implicit Euler aligned with the abscissae of `base`: each
    /// stage is a backward Euler sub-step of length `(c_s - c_{s-1}) dt`.
    pub fn composite_ie(base: &Self) -> Self {
        let c = base.c.clone();
        let sigma = c.len();
        let mut increments = Vec::with_capacity(sigma);
        let mut prev = 0.0;
        for &cs in &c {
            increments.push(cs - prev);
            prev = cs;
        }
        let a = (0..sigma)
            .map(|s| {
                (0..sigma)
                    .map(|r| if r <= s { increments[r] } else { 0.0 })
                    .collect()
            })
            .collect();
        Self {
            a,
            b: increments,
            b_embedded: None,
            c,
            order: 1,
            stiffly_accurate: true,
        }
    }

    /// Sub-step fractions `c_s - c_{s-1}` (the composite-IE weights).
    pub fn increments(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.c.len());
        let mut prev = 0.0;
        for &cs in &self.c {
            out.push(cs - prev);
            prev = cs;
        }
        out
    }

    /// Linear stability function `R(z) = 1 + z b^T (I - z A)^{-1} 1`.
    pub fn stability_function(&self, z: f64) -> f64 {
        let s = self.stages();
        let mut m = DMatrix::identity(s, s);
        for i in 0..s {
            for j in 0..s {
                m[(i, j)] -= z * self.a[i][j];
            }
        }
        let ones = DVector::from_element(s, 1.0);
        let w = m.lu().solve(&ones).expect("stage matrix singular");
        let b = DVector::from_vec(self.b.clone());
        1.0 + z * b.dot(&w)
    }

    /// Stability function of the embedded method.
    pub fn embedded_stability_function(&self, z: f64) -> f64 {
        let bt = self.b_embedded.as_ref().expect("no embedded weights");
        let s = self.stages();
        let mut m = DMatrix::identity(s, s);
        for i in 0..s {
            for j in 0..s {
                m[(i, j)] -= z * self.a[i][j];
            }
        }
        let ones = DVector::from_element(s, 1.0);
        let w = m.lu().solve(&ones).expect("stage matrix singular");
        let b = DVector::from_vec(bt.clone());
        1.0 + z * b.dot(&w)
    }
}
