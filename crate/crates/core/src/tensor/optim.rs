use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Gradients, Network, ParamId, Tensor};
use crate::{Error, Result};

/// Velocity of one parameter together with its momentum coefficient and
/// learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumState {
    pub velocity: Tensor,
    pub momentum: f64,
    pub lr: f64,
}

impl MomentumState {
    pub fn new(shape: &[usize], momentum: f64, lr: f64) -> Result<Self> {
        validate_hyper(momentum, lr)?;
        Ok(Self {
            velocity: Tensor::zeros(shape),
            momentum,
            lr,
        })
    }
}

fn validate_hyper(momentum: f64, lr: f64) -> Result<()> {
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::Config(format!("momentum {momentum} outside [0, 1)")));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Config(format!(
            "learning rate {lr} must be positive"
        )));
    }
    Ok(())
}

/// One momentum step:
///
/// ```text
/// v  <- momentum * v + grad
/// w  <- w - lr * v
/// ```
///
/// The learning rate scales the velocity when it is applied; it is not folded
/// into the velocity. A non-finite gradient aborts the step and leaves both
/// the parameter and the state untouched.
pub fn sgd_momentum_step(
    param: &mut Tensor,
    grad: &Tensor,
    state: &mut MomentumState,
) -> Result<()> {
    param.expect_shape(grad.shape())?;
    param.expect_shape(state.velocity.shape())?;
    if let Some(pos) = grad.data().iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "gradient element {pos} ({})",
            grad.data()[pos]
        )));
    }
    let (alpha, lr) = (state.momentum, state.lr);
    for ((w, v), g) in param
        .data_mut()
        .iter_mut()
        .zip(state.velocity.data_mut())
        .zip(grad.data())
    {
        *v = alpha * *v + g;
        *w -= *v * lr;
    }
    Ok(())
}

/// Momentum SGD over all parameters of a [`Network`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    momentum: f64,
    lr: f64,
    states: BTreeMap<ParamId, MomentumState>,
}

impl Optimizer {
    pub fn new(net: &Network, momentum: f64, lr: f64) -> Result<Self> {
        validate_hyper(momentum, lr)?;
        let states = net
            .params()
            .into_iter()
            .map(|(id, p)| Ok((id, MomentumState::new(p.shape(), momentum, lr)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            momentum,
            lr,
            states,
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn set_lr(&mut self, lr: f64) -> Result<()> {
        validate_hyper(self.momentum, lr)?;
        self.lr = lr;
        for s in self.states.values_mut() {
            s.lr = lr;
        }
        Ok(())
    }

    pub fn states(&self) -> &BTreeMap<ParamId, MomentumState> {
        &self.states
    }

    pub(crate) fn from_states(
        momentum: f64,
        lr: f64,
        states: BTreeMap<ParamId, MomentumState>,
    ) -> Result<Self> {
        validate_hyper(momentum, lr)?;
        Ok(Self {
            momentum,
            lr,
            states,
        })
    }

    /// Applies [`sgd_momentum_step`] to every parameter. All gradients are
    /// checked for finiteness before any parameter is modified.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        for (id, g) in grads {
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient of {id}")));
            }
        }
        for (id, param) in net.params_mut() {
            let grad = grads
                .get(&id)
                .ok_or_else(|| Error::State(format!("missing gradient for {id}")))?;
            let state = self
                .states
                .get_mut(&id)
                .ok_or_else(|| Error::State(format!("no optimizer state for {id}")))?;
            sgd_momentum_step(param, grad, state)?;
        }
        Ok(())
    }
}
