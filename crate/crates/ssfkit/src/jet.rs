//! Truncated Taylor series (jets) for forward-mode differentiation of the
//! smooth test-function families.
//!
//! A `Jet` stores Taylor coefficients `c[k] = f^(k)(x0) / k!` at an expansion
//! point. Arithmetic on jets propagates all derivatives at once, which keeps
//! high orders well conditioned where finite differences would not be.

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    /// Taylor coefficients, length = order + 1.
    pub c: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = value;
        Jet { c }
    }

    /// The identity seed x at expansion point `x0`.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = x0;
        if order >= 1 {
            c[1] = 1.0;
        }
        Jet { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// k-th derivative: c[k] * k!.
    pub fn derivative(&self, k: usize) -> f64 {
        if k >= self.c.len() {
            return 0.0;
        }
        let mut fact = 1.0;
        for i in 1..=k {
            fact *= i as f64;
        }
        self.c[k] * fact
    }

    pub fn add(&self, rhs: &Jet) -> Jet {
        let n = self.c.len().min(rhs.c.len());
        Jet { c: (0..n).map(|k| self.c[k] + rhs.c[k]).collect() }
    }

    pub fn sub(&self, rhs: &Jet) -> Jet {
        let n = self.c.len().min(rhs.c.len());
        Jet { c: (0..n).map(|k| self.c[k] - rhs.c[k]).collect() }
    }

    pub fn scale(&self, a: f64) -> Jet {
        Jet { c: self.c.iter().map(|x| a * x).collect() }
    }

    pub fn mul(&self, rhs: &Jet) -> Jet {
        let n = self.c.len().min(rhs.c.len());
        let mut c = vec![0.0; n];
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.c[j] * rhs.c[k - j];
            }
            c[k] = s;
        }
        Jet { c }
    }

    /// Reciprocal 1/self; requires c[0] != 0.
    pub fn recip(&self) -> Jet {
        let n = self.c.len();
        let mut c = vec![0.0; n];
        let a0 = self.c[0];
        assert!(a0 != 0.0, "jet reciprocal at zero");
        c[0] = 1.0 / a0;
        for k in 1..n {
            let mut s = 0.0;
            for j in 1..=k {
                s += self.c[j] * c[k - j];
            }
            c[k] = -s / a0;
        }
        Jet { c }
    }

    pub fn div(&self, rhs: &Jet) -> Jet {
        self.mul(&rhs.recip())
    }

    /// exp(self) via the standard recurrence e' = u' e.
    pub fn exp(&self) -> Jet {
        let n = self.c.len();
        let mut c = vec![0.0; n];
        c[0] = self.c[0].exp();
        for k in 1..n {
            let mut s = 0.0;
            for j in 1..=k {
                s += (j as f64) * self.c[j] * c[k - j];
            }
            c[k] = s / k as f64;
        }
        Jet { c }
    }
}
