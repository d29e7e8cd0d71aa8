//! Affine network-calculus primitives on exact rationals.
//!
//! Only leaky-bucket arrival curves and rate-latency service curves are
//! modelled, so every operation has a closed form.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::platform::NodeId;

pub type Rational = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    BigRational::new(numer.into(), denom.into())
}

pub fn int(value: i64) -> Rational {
    BigRational::from_integer(value.into())
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"12"`, `"0.05"`, `"1e-3"` or `"3/60"` without rounding.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num = parse_decimal(num.trim())?;
        let den = parse_decimal(den.trim())?;
        if den.is_zero() {
            return None;
        }
        return Some(num / den);
    }
    parse_decimal(text)
}

fn parse_decimal(text: &str) -> Option<Rational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("0{whole}{frac}").parse().ok()?;
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(digits);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Raised when a server cannot keep up with the traffic it must carry.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct Unstable {
    pub node: Option<NodeId>,
    pub residual: Rational,
}

impl fmt::Display for Unstable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Some(node) => write!(f, "unstable system at node {node}: residual rate {}", self.residual),
            None => write!(f, "unstable system: residual rate {}", self.residual),
        }
    }
}

/// Leaky bucket `sigma + rho * t` for `t > 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArrivalCurve {
    pub sigma: Rational,
    pub rho: Rational,
}

impl ArrivalCurve {
    /// # Panics
    /// If either parameter is negative.
    pub fn new(sigma: Rational, rho: Rational) -> Self {
        assert!(!sigma.is_negative(), "negative burst {sigma}");
        assert!(!rho.is_negative(), "negative rate {rho}");
        Self { sigma, rho }
    }

    pub fn value_at(&self, t: &Rational) -> Rational {
        if t.is_positive() {
            &self.sigma + &self.rho * t
        } else {
            Rational::zero()
        }
    }
}

/// Rate-latency curve `rate * max(0, t - latency)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ServiceCurve {
    pub rate: Rational,
    pub latency: Rational,
}

impl ServiceCurve {
    /// # Panics
    /// If `rate <= 0` or `latency < 0`.
    pub fn new(rate: Rational, latency: Rational) -> Self {
        assert!(rate.is_positive(), "non-positive rate {rate}");
        assert!(!latency.is_negative(), "negative latency {latency}");
        Self { rate, latency }
    }

    pub fn value_at(&self, t: &Rational) -> Rational {
        let excess = t - &self.latency;
        if excess.is_positive() {
            &self.rate * excess
        } else {
            Rational::zero()
        }
    }

    /// Min-plus convolution of two rate-latency curves.
    pub fn concat(&self, next: &ServiceCurve) -> ServiceCurve {
        ServiceCurve {
            rate: self.rate.clone().min(next.rate.clone()),
            latency: &self.latency + &next.latency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DelayBound {
    pub cycles: Rational,
}

fn check_stable(alpha: &ArrivalCurve, beta: &ServiceCurve) -> Result<(), Unstable> {
    if alpha.rho > beta.rate {
        return Err(Unstable {
            node: None,
            residual: &beta.rate - &alpha.rho,
        });
    }
    Ok(())
}

pub fn horizontal_deviation(alpha: &ArrivalCurve, beta: &ServiceCurve) -> Result<DelayBound, Unstable> {
    check_stable(alpha, beta)?;
    Ok(DelayBound {
        cycles: &alpha.sigma / &beta.rate + &beta.latency,
    })
}

pub fn backlog_bound(alpha: &ArrivalCurve, beta: &ServiceCurve) -> Result<Rational, Unstable> {
    check_stable(alpha, beta)?;
    Ok(&alpha.sigma + &alpha.rho * &beta.latency)
}

pub fn output_curve(alpha: &ArrivalCurve, beta: &ServiceCurve) -> Result<ArrivalCurve, Unstable> {
    check_stable(alpha, beta)?;
    Ok(ArrivalCurve {
        sigma: &alpha.sigma + &alpha.rho * &beta.latency,
        rho: alpha.rho.clone(),
    })
}

/// One server along the path, seen from the flow being served.
#[derive(Debug, Clone)]
pub struct PmooNode {
    pub node: Option<NodeId>,
    pub rate: Rational,
    pub latency: Rational,
    /// Sum of rates of competing flows with same or higher priority.
    pub cross_rate: Rational,
    /// Non-preemptive blocking by lower priority traffic, in cycles.
    pub blocking: Rational,
}

/// A competing flow, charged once at the point where it joins the path.
#[derive(Debug, Clone)]
pub struct PmooInterferer {
    pub burst: Rational,
    pub rho: Rational,
    /// Sum over shared nodes of per-node latency plus packet serialization.
    pub shared_latency: Rational,
}

/// Left-over rate-latency curve offered over a node sequence.
///
/// # Panics
/// If `nodes` is empty.
pub fn pmoo_leftover(nodes: &[PmooNode], interferers: &[PmooInterferer]) -> Result<ServiceCurve, Unstable> {
    assert!(!nodes.is_empty(), "left-over service over an empty path");
    let mut rate: Option<Rational> = None;
    let mut latency = Rational::zero();
    for n in nodes {
        let residual = &n.rate - &n.cross_rate;
        if !residual.is_positive() {
            return Err(Unstable {
                node: n.node,
                residual,
            });
        }
        rate = Some(match rate {
            Some(r) if r <= residual => r,
            _ => residual,
        });
        latency += &n.latency + &n.blocking;
    }
    let rate = rate.expect("non-empty path");
    for i in interferers {
        latency += (&i.burst + &i.rho * &i.shared_latency) / &rate;
    }
    Ok(ServiceCurve { rate, latency })
}
