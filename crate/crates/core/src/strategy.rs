//! The recursive inference-strategy tree.

use std::fmt;
use std::sync::Arc;

use crate::choice::Choices;
use crate::error::Result;
use crate::target::{Ctx, Target};
use crate::value::Value;

/// Which direction of absolute continuity a strategy guarantees.
///
/// `Wide` proposals cover the target (usable by importance sampling),
/// `Narrow` proposals are covered by it (usable by harmonic-mean
/// estimation), `TwoSided` proposals are mutually absolutely continuous.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SupportKind {
    Wide,
    Narrow,
    TwoSided,
}

impl SupportKind {
    /// The kind a meta-strategy must have for this node to be usable.
    pub fn meta_kind(self) -> SupportKind {
        match self {
            SupportKind::Wide => SupportKind::Narrow,
            SupportKind::Narrow => SupportKind::Wide,
            SupportKind::TwoSided => SupportKind::TwoSided,
        }
    }

    pub fn allows_importance(self) -> bool {
        self != SupportKind::Narrow
    }

    pub fn allows_hme(self) -> bool {
        self != SupportKind::Wide
    }
}

/// A proposal with a tractable normalized density.
pub trait Proposal: Send + Sync {
    fn sample(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<Value>;

    fn log_density(&self, cx: &Ctx, x: &Value) -> Result<f64>;

    /// Adds `scale · ∇θ log q(x)` into `grad`.
    fn grad_log_density(
        &self,
        _cx: &Ctx,
        _x: &Value,
        _scale: f64,
        _grad: &mut [f64],
    ) -> Result<()> {
        Ok(())
    }
}

/// A joint proposal over auxiliary `r` and output `x`, with a meta-strategy
/// targeting the conditional of `r` given `x`.
pub trait JointProposal: Send + Sync {
    fn sample_joint(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)>;

    fn log_joint_density(&self, cx: &Ctx, r: &Value, x: &Value) -> Result<f64>;

    /// Adds `scale · ∇θ log q(r, x)` into `grad`.
    fn grad_log_joint_density(
        &self,
        _cx: &Ctx,
        _r: &Value,
        _x: &Value,
        _scale: f64,
        _grad: &mut [f64],
    ) -> Result<()> {
        Ok(())
    }

    /// Strategy targeting `q(r | x)`.
    fn meta(&self, cx: &Ctx, x: &Value) -> Result<Strategy>;
}

#[derive(Clone)]
pub enum Node {
    Terminal(Arc<dyn Proposal>),
    Compound(Arc<dyn JointProposal>),
}

/// An inference strategy: a node plus its declared support kind.
#[derive(Clone)]
pub struct Strategy {
    pub node: Node,
    pub kind: SupportKind,
}

impl fmt::Debug for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let node = match self.node {
            Node::Terminal(_) => "Terminal",
            Node::Compound(_) => "Compound",
        };
        f.debug_struct("Strategy")
            .field("node", &node)
            .field("kind", &self.kind)
            .finish()
    }
}

impl Strategy {
    pub fn terminal<P: Proposal + 'static>(p: P) -> Self {
        Self {
            node: Node::Terminal(Arc::new(p)),
            kind: SupportKind::TwoSided,
        }
    }

    pub fn compound<J: JointProposal + 'static>(j: J) -> Self {
        Self {
            node: Node::Compound(Arc::new(j)),
            kind: SupportKind::TwoSided,
        }
    }

    pub fn from_terminal(p: Arc<dyn Proposal>) -> Self {
        Self {
            node: Node::Terminal(p),
            kind: SupportKind::TwoSided,
        }
    }

    pub fn from_compound(j: Arc<dyn JointProposal>) -> Self {
        Self {
            node: Node::Compound(j),
            kind: SupportKind::TwoSided,
        }
    }

    pub fn with_kind(mut self, kind: SupportKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.node, Node::Terminal(_))
    }

    /// Nesting depth along the branch selected by the output `x` and the
    /// auxiliary path `aux` (as produced by the traced estimators).
    pub fn depth_along(&self, cx: &Ctx, x: &Value, aux: &Value) -> Result<usize> {
        match &self.node {
            Node::Terminal(_) => Ok(1),
            Node::Compound(j) => {
                let r = aux.at(0);
                let meta = j.meta(cx, x)?;
                Ok(1 + meta.depth_along(cx, r, aux.at(1))?)
            }
        }
    }
}

/// The unnormalized conditional `r ↦ q(r, x)` of a joint proposal at fixed `x`.
pub struct JointSlice {
    pub joint: Arc<dyn JointProposal>,
    pub x: Value,
}

impl JointSlice {
    pub fn new(joint: Arc<dyn JointProposal>, x: Value) -> Self {
        Self { joint, x }
    }
}

impl Target for JointSlice {
    fn log_density(&self, cx: &Ctx, r: &Value) -> Result<f64> {
        self.joint.log_joint_density(cx, r, &self.x)
    }

    fn grad_log_density(&self, cx: &Ctx, r: &Value, scale: f64, grad: &mut [f64]) -> Result<()> {
        self.joint
            .grad_log_joint_density(cx, r, &self.x, scale, grad)
    }
}

type SampleFn = dyn Fn(&Ctx, &mut dyn Choices) -> Result<Value> + Send + Sync;
type DensityFn = dyn Fn(&Ctx, &Value) -> Result<f64> + Send + Sync;
type JointSampleFn = dyn Fn(&Ctx, &mut dyn Choices) -> Result<(Value, Value)> + Send + Sync;
type JointDensityFn = dyn Fn(&Ctx, &Value, &Value) -> Result<f64> + Send + Sync;
type MetaFn = dyn Fn(&Ctx, &Value) -> Result<Strategy> + Send + Sync;

/// Terminal proposal built from a sampler and a log-density closure.
#[derive(Clone)]
pub struct FnProposal {
    sample: Arc<SampleFn>,
    density: Arc<DensityFn>,
}

impl FnProposal {
    pub fn new<S, D>(sample: S, density: D) -> Self
    where
        S: Fn(&Ctx, &mut dyn Choices) -> Result<Value> + Send + Sync + 'static,
        D: Fn(&Ctx, &Value) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            sample: Arc::new(sample),
            density: Arc::new(density),
        }
    }
}

impl Proposal for FnProposal {
    fn sample(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<Value> {
        (self.sample)(cx, ch)
    }

    fn log_density(&self, cx: &Ctx, x: &Value) -> Result<f64> {
        (self.density)(cx, x)
    }
}

/// Joint proposal built from closures.
#[derive(Clone)]
pub struct FnJoint {
    sample: Arc<JointSampleFn>,
    density: Arc<JointDensityFn>,
    meta: Arc<MetaFn>,
}

impl FnJoint {
    pub fn new<S, D, M>(sample: S, density: D, meta: M) -> Self
    where
        S: Fn(&Ctx, &mut dyn Choices) -> Result<(Value, Value)> + Send + Sync + 'static,
        D: Fn(&Ctx, &Value, &Value) -> Result<f64> + Send + Sync + 'static,
        M: Fn(&Ctx, &Value) -> Result<Strategy> + Send + Sync + 'static,
    {
        Self {
            sample: Arc::new(sample),
            density: Arc::new(density),
            meta: Arc::new(meta),
        }
    }
}

impl JointProposal for FnJoint {
    fn sample_joint(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        (self.sample)(cx, ch)
    }

    fn log_joint_density(&self, cx: &Ctx, r: &Value, x: &Value) -> Result<f64> {
        (self.density)(cx, r, x)
    }

    fn meta(&self, cx: &Ctx, x: &Value) -> Result<Strategy> {
        (self.meta)(cx, x)
    }
}
