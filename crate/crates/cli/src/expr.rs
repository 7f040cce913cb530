//! Analytic expressions in `x, y, z, t` from config strings.

use std::str::FromStr;
use std::sync::Arc;

use conslaw_core::models::{ScalarFn, VectorFn};
use meval::{Context, ContextProvider, Expr};

use crate::error::CliError;

thread_local! {
    static BUILTINS: Context<'static> = Context::new();
}

struct Coords([f64; 4]);

impl ContextProvider for Coords {
    fn get_var(&self, name: &str) -> Option<f64> {
        match name {
            "x" => Some(self.0[0]),
            "y" => Some(self.0[1]),
            "z" => Some(self.0[2]),
            "t" => Some(self.0[3]),
            _ => None,
        }
    }
}

/// A parsed expression; cheap to clone and shareable across threads.
#[derive(Clone, Debug)]
pub struct Expression {
    source: String,
    expr: Arc<Expr>,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self, CliError> {
        let expr = Expr::from_str(source).map_err(|e| CliError::Expression(format!("`{source}`: {e}")))?;
        let parsed = Self { source: source.to_string(), expr: Arc::new(expr) };
        // reject unknown names up front
        parsed.try_eval([0.1, 0.2, 0.3, 0.0])?;
        Ok(parsed)
    }

    pub fn constant(value: f64) -> Self {
        Self::parse(&format!("{value:?}")).expect("a float literal parses")
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn try_eval(&self, p: [f64; 4]) -> Result<f64, CliError> {
        BUILTINS
            .with(|b| self.expr.eval_with_context((Coords(p), b)))
            .map_err(|e| CliError::Expression(format!("`{}`: {e}", self.source)))
    }

    /// Value at `(x, y, z, t)`. Names were checked at parse time; a
    /// domain error yields NaN.
    pub fn eval(&self, x: &[f64; 4], t: f64) -> f64 {
        self.try_eval([x[0], x[1], x[2], t]).unwrap_or(f64::NAN)
    }

    pub fn scalar_fn(&self) -> ScalarFn {
        let e = self.clone();
        Arc::new(move |x, t| e.eval(x, t))
    }
}

pub fn vector_fn(components: [Expression; 3]) -> VectorFn {
    Arc::new(move |x, t| [components[0].eval(x, t), components[1].eval(x, t), components[2].eval(x, t)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_coordinates_and_builtins() {
        let e = Expression::parse("sin(pi*x) * exp(-t) + y*z").unwrap();
        let v = e.eval(&[0.5, 2.0, 3.0, 0.0], 0.0);
        assert!((v - 7.0).abs() < 1e-15);
        assert!((Expression::constant(2.5).eval(&[0.0; 4], 1.0) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(Expression::parse("x + w").is_err());
        assert!(Expression::parse("sin(").is_err());
    }

    #[test]
    fn closures_are_send_and_sync() {
        fn check<T: Send + Sync>(_: &T) {}
        let f = Expression::parse("x").unwrap().scalar_fn();
        check(&f);
        let h = std::thread::spawn(move || f(&[3.0, 0.0, 0.0, 0.0], 0.0));
        assert_eq!(h.join().unwrap(), 3.0);
    }
}
