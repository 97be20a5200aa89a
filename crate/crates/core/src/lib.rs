//! Ordered and linear call-by-push-value with allocation effects.

pub mod sugar;
pub mod surface;
pub mod syntax;
pub mod machine;
pub mod typecheck;
pub mod resources;
pub mod affine;
pub mod elaborate;
pub mod harness;
