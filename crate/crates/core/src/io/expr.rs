//! Scalar momentum expressions in `u` and `v`.

use evalexpr::{
    build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables, DefaultNumericTypes,
    EvalexprError, Function, HashMapContext, Node, Value,
};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::ParamGrid;

/// A compiled expression such as `sin(u) * sin(v)`.
///
/// Besides evalexpr's own operators it knows `sin cos tan exp ln sqrt abs` and the
/// constant `pi`. Integer literals use integer arithmetic, so write `1.0 / 2` for one half.
pub struct MomentumExpr {
    source: String,
    tree: Node<DefaultNumericTypes>,
}

impl std::fmt::Debug for MomentumExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("MomentumExpr").field(&self.source).finish()
    }
}

fn unary(f: fn(f64) -> f64) -> Function<DefaultNumericTypes> {
    Function::new(move |arg: &Value<DefaultNumericTypes>| Ok(Value::Float(f(arg.as_number()?))))
}

fn context(u: f64, v: f64) -> std::result::Result<HashMapContext<DefaultNumericTypes>, EvalexprError<DefaultNumericTypes>> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    let fns: [(&str, fn(f64) -> f64); 7] = [
        ("sin", f64::sin),
        ("cos", f64::cos),
        ("tan", f64::tan),
        ("exp", f64::exp),
        ("ln", f64::ln),
        ("sqrt", f64::sqrt),
        ("abs", f64::abs),
    ];
    for (name, f) in fns {
        ctx.set_function(name.into(), unary(f))?;
    }
    ctx.set_value("pi".into(), Value::Float(std::f64::consts::PI))?;
    ctx.set_value("u".into(), Value::Float(u))?;
    ctx.set_value("v".into(), Value::Float(v))?;
    Ok(ctx)
}

fn expr_error(source: &str, e: EvalexprError<DefaultNumericTypes>) -> Error {
    Error::InvalidParameter(format!("expression '{source}': {e}"))
}

impl MomentumExpr {
    /// Parse and trial-evaluate at `(0.5, 0.5)` so that unknown names fail early.
    pub fn compile(source: &str) -> Result<Self> {
        let tree = build_operator_tree::<DefaultNumericTypes>(source).map_err(|e| expr_error(source, e))?;
        let expr = MomentumExpr {
            source: source.to_string(),
            tree,
        };
        expr.eval(0.5, 0.5)?;
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, u: f64, v: f64) -> Result<f64> {
        let ctx = context(u, v).map_err(|e| expr_error(&self.source, e))?;
        self.tree
            .eval_number_with_context(&ctx)
            .map_err(|e| expr_error(&self.source, e))
    }

    /// Sample on every node; Dirichlet boundary nodes are set to zero.
    pub fn sample(&self, grid: &ParamGrid) -> Result<ScalarField> {
        let mut out = Vec::with_capacity(grid.len());
        for n in 0..grid.len() {
            let (u, v) = grid.position(n);
            out.push(if grid.is_boundary_node(n) { 0.0 } else { self.eval(u, v)? });
        }
        Ok(ScalarField(out))
    }
}
