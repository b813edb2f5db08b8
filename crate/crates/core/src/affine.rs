//! Affine expressions over QP variables.

use nalgebra::DVector;

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(v: f64) -> Self {
        Affine { terms: Vec::new(), constant: v }
    }

    pub fn var(v: usize, coef: f64) -> Self {
        Affine { terms: vec![(v, coef)], constant: 0.0 }
    }

    /// `self += s·other`
    pub fn add(&mut self, other: &Affine, s: f64) {
        for &(v, c) in &other.terms {
            self.terms.push((v, c * s));
        }
        self.constant += s * other.constant;
    }

    pub fn scaled(&self, s: f64) -> Affine {
        let mut out = Affine::default();
        out.add(self, s);
        out
    }

    #[cfg(test)]
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }

    /// Dense coefficient vector of length `n`.
    pub fn dense(&self, n: usize) -> DVector<f64> {
        let mut r = DVector::zeros(n);
        for &(v, c) in &self.terms {
            r[v] += c;
        }
        r
    }
}
