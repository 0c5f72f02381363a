//! Crypto-oriented graph rewrites.
//!
//! Pass syntax: `pa_replace(SEL,RATIO)`, `remove_activation(SEL)`,
//! `relu6_to_relu`, `maxpool_to_avgpool`. A selector is `first` or
//! `second` (activation slot within a block), `slot:N`, `blocks` (every
//! block activation), `all`, or `name:REGEX`.

use std::fmt;

use regex::Regex;

use super::spec::{parse_ref, LayerKind, NetworkGraph, PartialParams};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub enum Selector {
    Slot(u8),
    Blocks,
    All,
    Name(Regex),
}

impl PartialEq for Selector {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Slot(1) => write!(f, "first"),
            Selector::Slot(2) => write!(f, "second"),
            Selector::Slot(n) => write!(f, "slot:{n}"),
            Selector::Blocks => write!(f, "blocks"),
            Selector::All => write!(f, "all"),
            Selector::Name(r) => write!(f, "name:{}", r.as_str()),
        }
    }
}

impl Selector {
    pub fn parse(s: &str) -> Result<Selector> {
        let s = s.trim();
        Ok(match s {
            "first" => Selector::Slot(1),
            "second" => Selector::Slot(2),
            "blocks" => Selector::Blocks,
            "all" => Selector::All,
            _ => {
                if let Some(n) = s.strip_prefix("slot:") {
                    Selector::Slot(n.parse().map_err(|_| Error::Parse(format!("bad slot selector `{s}`")))?)
                } else if let Some(re) = s.strip_prefix("name:") {
                    Selector::Name(Regex::new(re).map_err(|e| Error::Parse(format!("bad name pattern `{re}`: {e}")))?)
                } else {
                    return Err(Error::Parse(format!("unknown selector `{s}`")));
                }
            }
        })
    }

    fn matches(&self, name: &str, slot: Option<u8>) -> bool {
        match self {
            Selector::Slot(n) => slot == Some(*n),
            Selector::Blocks => slot.is_some(),
            Selector::All => true,
            Selector::Name(re) => re.is_match(name),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Pass {
    PaReplace { selector: Selector, ratio: f64 },
    RemoveActivation { selector: Selector },
    Relu6ToRelu,
    MaxpoolToAvgpool,
}

impl fmt::Display for Pass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pass::PaReplace { selector, ratio } => write!(f, "pa_replace({selector},{ratio})"),
            Pass::RemoveActivation { selector } => write!(f, "remove_activation({selector})"),
            Pass::Relu6ToRelu => write!(f, "relu6_to_relu"),
            Pass::MaxpoolToAvgpool => write!(f, "maxpool_to_avgpool"),
        }
    }
}

impl Pass {
    pub fn parse(s: &str) -> Result<Pass> {
        let s = s.trim();
        let bad = || Error::Parse(format!("cannot parse pass `{s}`"));
        match s {
            "relu6_to_relu" => return Ok(Pass::Relu6ToRelu),
            "maxpool_to_avgpool" => return Ok(Pass::MaxpoolToAvgpool),
            _ => {}
        }
        let (head, rest) = s.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        match head.trim() {
            "pa_replace" => {
                let (sel, ratio) = args.rsplit_once(',').ok_or_else(bad)?;
                let ratio: f64 = ratio.trim().parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&ratio) {
                    return Err(Error::Params(format!("ratio {ratio} is outside [0, 1]")));
                }
                Ok(Pass::PaReplace {
                    selector: Selector::parse(sel)?,
                    ratio,
                })
            }
            "remove_activation" => Ok(Pass::RemoveActivation {
                selector: Selector::parse(args)?,
            }),
            _ => Err(bad()),
        }
    }
}

/// Apply one pass. A pass that changes nothing fails with
/// [`Error::SelectorMiss`].
pub fn rewrite(graph: &NetworkGraph, pass: &Pass) -> Result<NetworkGraph> {
    let mut g = graph.clone();
    let miss = || Error::SelectorMiss(pass.to_string());
    match pass {
        Pass::PaReplace { selector, ratio: r } if *r == 0.0 => {
            return rewrite(
                graph,
                &Pass::RemoveActivation {
                    selector: selector.clone(),
                },
            )
            .map_err(|e| match e {
                Error::SelectorMiss(_) => miss(),
                e => e,
            })
        }
        Pass::PaReplace { selector, ratio } => {
            let mut hit = false;
            for l in &mut g.layers {
                if let Some(inner) = l.kind.activation() {
                    if selector.matches(&l.name, l.slot) {
                        l.kind = LayerKind::PartialActivation(PartialParams { ratio: *ratio, inner });
                        hit = true;
                    }
                }
            }
            if !hit {
                return Err(miss());
            }
        }
        Pass::RemoveActivation { selector } => {
            let doomed: Vec<(String, String)> = g
                .layers
                .iter()
                .filter(|l| l.kind.is_activation() && selector.matches(&l.name, l.slot))
                .map(|l| (l.name.clone(), l.inputs[0].clone()))
                .collect();
            if doomed.is_empty() {
                return Err(miss());
            }
            g.layers.retain(|l| !doomed.iter().any(|(n, _)| *n == l.name));
            // Activations can be chained, so follow replacements to a fixpoint.
            let resolve = |mut r: String| {
                while let Some((_, src)) = doomed.iter().find(|(n, _)| n == parse_ref(&r).0) {
                    r = src.clone();
                }
                r
            };
            for l in &mut g.layers {
                for r in &mut l.inputs {
                    *r = resolve(r.clone());
                }
            }
        }
        Pass::Relu6ToRelu => {
            let mut hit = false;
            for l in &mut g.layers {
                match &mut l.kind {
                    LayerKind::Relu6 => {
                        l.kind = LayerKind::Relu;
                        hit = true;
                    }
                    LayerKind::PartialActivation(p) if p.inner == crate::protocols::ActivationKind::Relu6 => {
                        p.inner = crate::protocols::ActivationKind::Relu;
                        hit = true;
                    }
                    _ => {}
                }
            }
            if !hit {
                return Err(miss());
            }
        }
        Pass::MaxpoolToAvgpool => {
            let mut hit = false;
            for l in &mut g.layers {
                if let LayerKind::MaxPool(p) = &l.kind {
                    l.kind = LayerKind::AvgPool(p.clone());
                    hit = true;
                }
            }
            if !hit {
                return Err(miss());
            }
        }
    }
    g.validate()?;
    Ok(g)
}

/// Apply passes in order.
pub fn rewrite_all(graph: &NetworkGraph, passes: &[Pass]) -> Result<NetworkGraph> {
    passes.iter().try_fold(graph.clone(), |g, p| rewrite(&g, p))
}
