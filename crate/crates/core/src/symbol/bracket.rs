use std::sync::Arc;

use super::jet::Jet;
use super::{eval_jet, PhasePoint, SymbolFn};
use crate::error::{QmlError, Result};

/// A phase-space function that can be evaluated with jets: either a symbol
/// or an iterated Poisson bracket of symbols.
#[derive(Clone, Debug)]
pub enum PhaseFn {
    Symbol(SymbolFn),
    Bracket(Arc<PhaseFn>, Arc<PhaseFn>),
}

impl From<SymbolFn> for PhaseFn {
    fn from(f: SymbolFn) -> Self {
        PhaseFn::Symbol(f)
    }
}

impl PhaseFn {
    pub fn dim(&self) -> usize {
        match self {
            PhaseFn::Symbol(f) => f.n,
            PhaseFn::Bracket(f, _) => f.dim(),
        }
    }

    /// Highest jet order available for this function.
    pub fn max_order(&self) -> usize {
        match self {
            PhaseFn::Symbol(_) => 3,
            PhaseFn::Bracket(f, g) => f.max_order().min(g.max_order()).saturating_sub(1),
        }
    }

    fn depth(&self) -> usize {
        match self {
            PhaseFn::Symbol(_) => 0,
            PhaseFn::Bracket(f, g) => 1 + f.depth().max(g.depth()),
        }
    }

    pub fn jet(&self, pt: &PhasePoint, order: usize) -> Result<Jet> {
        match self {
            PhaseFn::Symbol(f) => eval_jet(f, pt, order),
            PhaseFn::Bracket(f, g) => {
                if order + self.depth() > 3 {
                    return Err(QmlError::Order(order + self.depth()));
                }
                let jf = f.jet(pt, order + 1)?;
                let jg = g.jet(pt, order + 1)?;
                bracket_jets(&jf, &jg, self.dim())
            }
        }
    }

    pub fn value(&self, pt: &PhasePoint) -> Result<f64> {
        Ok(self.jet(pt, 0)?.value)
    }
}

/// `{f, g} = ∂_ξ f · ∂_x g − ∂_x f · ∂_ξ g`, one order below the inputs.
pub fn bracket_jets(jf: &Jet, jg: &Jet, n: usize) -> Result<Jet> {
    let order = jf.order.min(jg.order);
    if order == 0 {
        return Err(QmlError::Order(0));
    }
    let mut acc = Jet::zeros(2 * n, order - 1);
    for k in 0..n {
        let a = jf.partial(n + k)?.mul(&jg.partial(k)?)?;
        let b = jf.partial(k)?.mul(&jg.partial(n + k)?)?;
        acc = acc.add(&a.sub(&b)?)?;
    }
    Ok(acc)
}

/// Composable Poisson bracket `{f, g}`.
pub fn poisson_bracket(f: impl Into<PhaseFn>, g: impl Into<PhaseFn>) -> Result<PhaseFn> {
    let (f, g) = (f.into(), g.into());
    if f.dim() != g.dim() {
        return Err(QmlError::Dimension(format!(
            "bracket of functions in dimensions {} and {}",
            f.dim(),
            g.dim()
        )));
    }
    Ok(PhaseFn::Bracket(Arc::new(f), Arc::new(g)))
}
