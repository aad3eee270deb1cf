//! Key rate versus distance.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoy::ChannelModel;
use crate::error::{Error, Result};
use crate::optimizer::{OptimizerOptions, SolveStatus};
use crate::protocols::{key_rate, ProtocolSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    OurMethod,
    Gllp,
    Both,
}

impl Method {
    /// Concrete analyses run for this selection, in output order.
    pub fn expand(self) -> &'static [Method] {
        match self {
            Method::OurMethod => &[Method::OurMethod],
            Method::Gllp => &[Method::Gllp],
            Method::Both => &[Method::OurMethod, Method::Gllp],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::OurMethod => "our-method",
            Method::Gllp => "gllp",
            Method::Both => "both",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "our-method" | "our" => Ok(Method::OurMethod),
            "gllp" => Ok(Method::Gllp),
            "both" => Ok(Method::Both),
            other => Err(Error::Parse {
                what: "method".into(),
                message: format!("unknown method `{other}` (expected our-method, gllp or both)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Ok,
    NoYield,
    Infeasible,
    MaxIter,
}

impl PointStatus {
    pub fn label(self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::NoYield => "no_yield",
            PointStatus::Infeasible => "infeasible",
            PointStatus::MaxIter => "max_iter",
        }
    }
}

impl fmt::Display for PointStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRatePoint {
    pub distance_km: f64,
    pub method: Method,
    pub rate: f64,
    pub q_mu: f64,
    pub e_mu: f64,
    pub y1_lower: f64,
    pub e1_upper: f64,
    pub h_ze: f64,
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateCurve {
    pub protocol: String,
    /// Ordered by distance, then by method.
    pub points: Vec<KeyRatePoint>,
}

impl KeyRateCurve {
    pub fn for_method(&self, method: Method) -> impl Iterator<Item = &KeyRatePoint> + '_ {
        self.points.iter().filter(move |p| p.method == method)
    }

    pub fn rates(&self, method: Method) -> Vec<(f64, f64)> {
        self.for_method(method).map(|p| (p.distance_km, p.rate)).collect()
    }

    pub fn last_positive_distance(&self, method: Method) -> Option<f64> {
        self.for_method(method)
            .filter(|p| p.rate > 0.0)
            .map(|p| p.distance_km)
            .last()
    }
}

/// Evaluates the key rate at each distance for the selected analyses.
///
/// Points are independent and evaluated in parallel on the current rayon pool.
pub fn scan_distance(
    spec: &ProtocolSpec,
    channel: &dyn ChannelModel,
    distances: &[f64],
    method: Method,
    options: &OptimizerOptions,
) -> Result<KeyRateCurve> {
    if distances.is_empty() {
        return Err(Error::Validation("distance grid is empty".into()));
    }
    if let Some(bad) = distances.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(Error::Validation(format!("invalid distance {bad} km")));
    }
    if method != Method::OurMethod && !spec.supports_gllp() {
        return Err(Error::Validation(format!(
            "method `{method}` is not available for {}",
            spec.name
        )));
    }
    let rows: Vec<Vec<KeyRatePoint>> = distances
        .par_iter()
        .map(|&l| evaluate_point(spec, channel, l, method, options))
        .collect::<Result<_>>()?;
    Ok(KeyRateCurve {
        protocol: spec.name.clone(),
        points: rows.into_iter().flatten().collect(),
    })
}

fn evaluate_point(
    spec: &ProtocolSpec,
    channel: &dyn ChannelModel,
    distance_km: f64,
    method: Method,
    options: &OptimizerOptions,
) -> Result<Vec<KeyRatePoint>> {
    let f_ec = channel.params().f_ec;
    let est = match channel.estimate(distance_km) {
        Ok(est) => est,
        Err(Error::NoYield { y1_lower }) => {
            let s = channel.signal(distance_km)?;
            return Ok(method
                .expand()
                .iter()
                .map(|&m| KeyRatePoint {
                    distance_km,
                    method: m,
                    rate: 0.0,
                    q_mu: s.gain,
                    e_mu: s.qber,
                    y1_lower,
                    e1_upper: 0.5,
                    h_ze: 0.0,
                    status: PointStatus::NoYield,
                })
                .collect());
        }
        Err(e) => return Err(e),
    };
    let mut out = Vec::with_capacity(2);
    for &m in method.expand() {
        let (h, status) = match m {
            Method::Gllp => (spec.gllp_key_entropy(&est)?, PointStatus::Ok),
            _ => match spec.key_entropy(est.e1_upper, options) {
                Ok(e) => (
                    e.h,
                    match e.status {
                        Some(SolveStatus::MaxIter) => PointStatus::MaxIter,
                        _ => PointStatus::Ok,
                    },
                ),
                Err(Error::Infeasible { .. }) => (0.0, PointStatus::Infeasible),
                Err(e) => return Err(e),
            },
        };
        let rate = if status == PointStatus::Infeasible {
            0.0
        } else {
            key_rate(spec.q_factor, f_ec, est.q_mu, est.e_mu, est.q1, h, spec.dim)?
        };
        out.push(KeyRatePoint {
            distance_km,
            method: m,
            rate,
            q_mu: est.q_mu,
            e_mu: est.e_mu,
            y1_lower: est.y1_lower,
            e1_upper: est.e1_upper,
            h_ze: h,
            status,
        });
    }
    Ok(out)
}
