//! Checking for the affine calculus with drop, raise, try and move.

use thiserror::Error;

use crate::syntax::{is_central, Context, Expr, Type};
use crate::typecheck::{check_core, check_with, AffineRules, CheckConfig, Mode, TypeError, TypedExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AffineMode {
    NoMove,
    WithMove,
}

/// The exception type `E` and the value thrown by a failed allocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExceptionConfig {
    pub exc_type: Type,
    pub new_fail: Expr,
}

impl Default for ExceptionConfig {
    fn default() -> Self {
        ExceptionConfig {
            exc_type: Type::Unit,
            new_fail: Expr::UnitVal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("exception type {0} is not central")]
    NotCentral(Type),
    #[error("NewFail does not have the exception type: {0}")]
    BadNewFail(TypeError),
}

impl ExceptionConfig {
    pub fn new(exc_type: Type, new_fail: Expr) -> Result<Self, ConfigError> {
        let c = ExceptionConfig { exc_type, new_fail };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !is_central(&self.exc_type) {
            return Err(ConfigError::NotCentral(self.exc_type.clone()));
        }
        let d = check_core(&vec![], &self.new_fail, &self.exc_type, Mode::Ordered)
            .map_err(ConfigError::BadNewFail)?;
        if !d.is_value() {
            return Err(ConfigError::BadNewFail(TypeError {
                kind: crate::typecheck::ErrorKind::PolarityMismatch,
                rule: "new-fail",
                message: "NewFail must be a value".into(),
            }));
        }
        Ok(())
    }
}

pub fn affine_config(mode: AffineMode, cfg: &ExceptionConfig) -> CheckConfig {
    CheckConfig {
        mode: Mode::Ordered,
        runtime: false,
        affine: Some(AffineRules {
            allow_move: mode == AffineMode::WithMove,
            exc_type: cfg.exc_type.clone(),
        }),
    }
}

pub fn check_affine(
    ctx: &Context,
    e: &Expr,
    ty: &Type,
    mode: AffineMode,
    cfg: &ExceptionConfig,
) -> Result<TypedExpr, TypeError> {
    check_with(&affine_config(mode, cfg), ctx, e, Some(ty))
}
