//! Bounded smooth test functions used for defect estimates, moment
//! comparisons and correlation diagnostics.

use std::sync::Arc;

use crate::sphere::SpherePoint;
use crate::weights::Weight;

/// A named bounded observable on the sphere.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    f: Arc<dyn Fn(&SpherePoint) -> f64 + Send + Sync>,
}

impl TestFunction {
    pub fn new(name: impl Into<String>, f: impl Fn(&SpherePoint) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, p: &SpherePoint) -> f64 {
        (self.f)(p)
    }
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TestFunction({})", self.name)
    }
}

/// The default dictionary: real and imaginary parts of
/// (z/(1+|z|^2))^m = (z0 conj z1)^m for m = 0..=8 (the identically-zero
/// imaginary part at m = 0 is skipped), plus the weight itself when given.
pub fn default_dictionary(weight: Option<&Weight>) -> Vec<TestFunction> {
    let mut out = Vec::new();
    for m in 0..=8u32 {
        out.push(TestFunction::new(format!("re_chart_pow_{m}"), move |p| {
            p.chart_pairing().powu(m).re
        }));
        if m > 0 {
            out.push(TestFunction::new(format!("im_chart_pow_{m}"), move |p| {
                p.chart_pairing().powu(m).im
            }));
        }
    }
    if let Some(w) = weight {
        let w = w.clone();
        out.push(TestFunction::new("weight", move |p| w.evaluate(p)));
    }
    out
}
