use serde::{Deserialize, Serialize};

use super::beaver::pi_mul;
use super::drelu::pi_drelu;
use super::layout::channel_slice;
use super::Secret;
use crate::error::{Error, Result};
use crate::ring::encode_fixed;
use crate::transport::Session;

/// Slope of the negative branch of LeakyReLU.
pub const LEAKY_SLOPE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    Relu6,
    #[serde(rename = "leakyrelu")]
    LeakyRelu,
    None,
}

impl ActivationKind {
    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Relu6 => "relu6",
            ActivationKind::LeakyRelu => "leakyrelu",
            ActivationKind::None => "none",
        }
    }

    pub fn from_name(s: &str) -> Option<ActivationKind> {
        Some(match s {
            "relu" => ActivationKind::Relu,
            "relu6" => ActivationKind::Relu6,
            "leakyrelu" | "leaky_relu" => ActivationKind::LeakyRelu,
            "none" => ActivationKind::None,
            _ => return None,
        })
    }
}

/// Number of activated channels, `ceil(ratio * channels)`.
pub fn activated_channels(ratio: f64, channels: usize) -> usize {
    // The small offset keeps products such as 0.3 * 10 from rounding up.
    let k = (ratio * channels as f64 - 1e-9).ceil();
    k.clamp(0.0, channels as f64) as usize
}

/// Partial activation: the inner activation on the first `k` channels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialActivationSpec {
    pub ratio: f64,
    pub inner: ActivationKind,
}

impl PartialActivationSpec {
    pub fn new(ratio: f64, inner: ActivationKind) -> Result<Self> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(Error::Params(format!("partial activation ratio {ratio} is outside [0, 1]")));
        }
        Ok(PartialActivationSpec { ratio, inner })
    }

    pub fn activated(&self, channels: usize) -> usize {
        if self.inner == ActivationKind::None {
            0
        } else {
            activated_channels(self.ratio, channels)
        }
    }
}

/// `max(a, 0)`: four rounds, exact.
pub fn pi_relu(sess: &mut Session, a: &Secret) -> Result<Secret> {
    let bit = pi_drelu(sess, a)?;
    pi_mul(sess, a, &bit)
}

/// Shares of every intermediate of the ReLU6 protocol.
#[derive(Clone, Debug)]
pub struct Relu6Trace {
    /// `H(a - 6)`
    pub alpha: Secret,
    /// `alpha * (6 - a)`
    pub c: Secret,
    /// `H(a)`
    pub beta: Secret,
    /// `beta * (a + c)`
    pub d: Secret,
    pub output: Secret,
}

/// `min(max(a, 0), 6)` as `H(a) * (a + (6 - a) * H(a - 6))`; eight rounds,
/// exact.
pub fn pi_relu6(sess: &mut Session, a: &Secret) -> Result<Secret> {
    Ok(pi_relu6_traced(sess, a)?.output)
}

pub fn pi_relu6_traced(sess: &mut Session, a: &Secret) -> Result<Relu6Trace> {
    let params = *sess.params();
    let six = encode_fixed(6.0, &params)?;
    let minus_six = six.wrapping_neg() & params.mask();

    let alpha = pi_drelu(sess, &a.add_public(minus_six))?;
    let c = pi_mul(sess, &alpha, &a.neg().add_public(six))?;
    let beta = pi_drelu(sess, a)?;
    let d = pi_mul(sess, &beta, &a.add(&c)?)?;
    let output = d.add_zero_share(sess)?;
    Ok(Relu6Trace {
        alpha,
        c,
        beta,
        d,
        output,
    })
}

/// `max(0.1 a, a)` as `a * (0.1 + 0.9 H(a))`; four rounds, one truncation.
pub fn pi_leaky_relu(sess: &mut Session, a: &Secret) -> Result<Secret> {
    let params = *sess.params();
    let lo = encode_fixed(LEAKY_SLOPE, &params)?;
    let hi = encode_fixed(1.0 - LEAKY_SLOPE, &params)?;
    let alpha = pi_drelu(sess, a)?;
    let coeff = alpha.scale(hi).add_public(lo);
    let prod = pi_mul(sess, a, &coeff)?.truncate(&params);
    prod.add_zero_share(sess)
}

pub fn pi_activation(sess: &mut Session, kind: ActivationKind, a: &Secret) -> Result<Secret> {
    match kind {
        ActivationKind::Relu => pi_relu(sess, a),
        ActivationKind::Relu6 => pi_relu6(sess, a),
        ActivationKind::LeakyRelu => pi_leaky_relu(sess, a),
        ActivationKind::None => Ok(a.clone()),
    }
}

/// Apply the inner activation to the first `k` channels (last axis) and
/// pass the rest through unchanged.
pub fn pi_partial_activation(sess: &mut Session, x: &Secret, spec: &PartialActivationSpec) -> Result<Secret> {
    let channels = *x
        .shape()
        .last()
        .ok_or_else(|| Error::Shape("partial activation needs a channel axis".into()))?;
    if channels == 0 {
        return Err(Error::Shape("partial activation over zero channels".into()));
    }
    let k = spec.activated(channels);
    if k == 0 {
        return Ok(x.clone());
    }
    if k == channels {
        return pi_activation(sess, spec.inner, x);
    }
    let (head_idx, head_shape) = channel_slice(x.shape(), 0, k)?;
    let (tail_idx, tail_shape) = channel_slice(x.shape(), k, channels)?;
    let head = x.gather(&head_idx, head_shape)?;
    let tail = x.gather(&tail_idx, tail_shape)?;
    let head = pi_activation(sess, spec.inner, &head)?;
    Secret::concat_last(&[head, tail])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_counts() {
        assert_eq!(activated_channels(0.0, 16), 0);
        assert_eq!(activated_channels(0.5, 16), 8);
        assert_eq!(activated_channels(0.5, 15), 8);
        assert_eq!(activated_channels(0.25, 3), 1);
        assert_eq!(activated_channels(0.3, 10), 3);
        assert_eq!(activated_channels(1.0, 7), 7);
    }

    #[test]
    fn names_round_trip() {
        for k in [
            ActivationKind::Relu,
            ActivationKind::Relu6,
            ActivationKind::LeakyRelu,
            ActivationKind::None,
        ] {
            assert_eq!(ActivationKind::from_name(k.name()), Some(k));
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
    }

    #[test]
    fn ratio_bounds() {
        assert!(PartialActivationSpec::new(1.5, ActivationKind::Relu).is_err());
        assert!(PartialActivationSpec::new(-0.1, ActivationKind::Relu).is_err());
    }
}
