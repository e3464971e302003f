//! Cauchy-data config files (TOML).
//!
//! Dimension 1 lists the two facets of the interval and the `u0`/`udot0`
//! specs; dimension 2 is separable and lists two `[[axis]]` tables instead.
//! Polynomial coefficients are listed lowest degree first and parsed as
//! decimal with full double precision.
//!
//! ```toml
//! dimension = 1
//!
//! [[facet]]
//! normal = [1.0]
//! offset = -1.0
//!
//! [[facet]]
//! normal = [-1.0]
//! offset = -1.0
//!
//! [u0]
//! kind = "guillemin"            # or "guillemin_plus_smooth" with smooth_coeffs
//!
//! [udot0]
//! kind = "polynomial"           # or "fubini_study_quadratic"
//! coeffs = [0.0, 0.0, -1.0]
//! ```

use serde::Deserialize;

use super::{AxisProblem, Facet, Polytope, ToricCauchyData};
use crate::numeric::Polynomial;
use crate::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    dimension: usize,
    #[serde(default)]
    separable: bool,
    #[serde(default)]
    facet: Vec<FacetSpec>,
    u0: Option<PotentialSpec>,
    udot0: Option<VelocitySpec>,
    #[serde(default)]
    axis: Vec<AxisSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FacetSpec {
    normal: Vec<f64>,
    offset: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialSpec {
    kind: String,
    smooth_coeffs: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VelocitySpec {
    kind: String,
    coeffs: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisSpec {
    interval: [f64; 2],
    u0: PotentialSpec,
    udot0: VelocitySpec,
}

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn smooth_poly(spec: &PotentialSpec, field: &str) -> Result<Polynomial> {
    match spec.kind.as_str() {
        "guillemin" => Ok(Polynomial::zero()),
        "guillemin_plus_smooth" => match &spec.smooth_coeffs {
            Some(c) => Ok(Polynomial::new(c.clone())),
            None => Err(config_err(
                &format!("{field}.smooth_coeffs"),
                "guillemin_plus_smooth requires smooth_coeffs",
            )),
        },
        other => Err(config_err(
            &format!("{field}.kind"),
            format!("unknown potential kind `{other}`"),
        )),
    }
}

fn velocity_poly(spec: &VelocitySpec, field: &str) -> Result<Polynomial> {
    match spec.kind.as_str() {
        "fubini_study_quadratic" => Ok(Polynomial::new(vec![0.0, 0.0, -1.0])),
        "polynomial" => match &spec.coeffs {
            Some(c) => Ok(Polynomial::new(c.clone())),
            None => Err(config_err(
                &format!("{field}.coeffs"),
                "polynomial velocity requires coeffs",
            )),
        },
        other => Err(config_err(
            &format!("{field}.kind"),
            format!("unknown velocity kind `{other}`"),
        )),
    }
}

pub fn parse(text: &str) -> Result<ToricCauchyData> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| {
        // toml errors already carry the offending key path
        config_err("<toml>", e.to_string())
    })?;

    match file.dimension {
        1 => {
            if file.facet.len() != 2 {
                return Err(config_err("facet", "dimension 1 needs exactly two facets"));
            }
            let facets: Vec<Facet> = file
                .facet
                .iter()
                .map(|f| Facet {
                    normal: f.normal.clone(),
                    offset: f.offset,
                })
                .collect();
            let polytope = Polytope::from_facets_1d(facets)
                .map_err(|e| config_err("facet", e.to_string()))?;
            let u0 = file
                .u0
                .as_ref()
                .ok_or_else(|| config_err("u0", "missing [u0] table"))?;
            let udot0 = file
                .udot0
                .as_ref()
                .ok_or_else(|| config_err("udot0", "missing [udot0] table"))?;
            let smooth = smooth_poly(u0, "u0")?;
            let velocity = velocity_poly(udot0, "udot0")?;
            let (lo, hi) = polytope.axis_interval(0);
            let scale_lo = file.facet[if file.facet[0].normal[0] > 0.0 { 0 } else { 1 }].normal[0];
            let scale_hi = -file.facet[if file.facet[0].normal[0] < 0.0 { 0 } else { 1 }].normal[0];
            let axis = AxisProblem::with_scales(lo, hi, scale_lo, scale_hi, smooth, velocity)
                .map_err(|e| config_err("facet", e.to_string()))?;
            Ok(ToricCauchyData::from_parts(polytope, vec![axis]))
        }
        2 => {
            if !file.separable {
                return Err(config_err(
                    "separable",
                    "dimension 2 is supported only with separable = true",
                ));
            }
            if file.axis.len() != 2 {
                return Err(config_err("axis", "dimension 2 needs exactly two axes"));
            }
            let mut axes = Vec::with_capacity(2);
            for (i, spec) in file.axis.iter().enumerate() {
                let field = format!("axis[{i}]");
                let [lo, hi] = spec.interval;
                if !(lo < hi) {
                    return Err(config_err(
                        &format!("{field}.interval"),
                        "interval must satisfy lo < hi",
                    ));
                }
                let smooth = smooth_poly(&spec.u0, &format!("{field}.u0"))?;
                let velocity = velocity_poly(&spec.udot0, &format!("{field}.udot0"))?;
                axes.push(
                    AxisProblem::new(lo, hi, smooth, velocity)
                        .map_err(|e| config_err(&field, e.to_string()))?,
                );
            }
            let polytope = Polytope::rectangle(
                (file.axis[0].interval[0], file.axis[0].interval[1]),
                (file.axis[1].interval[0], file.axis[1].interval[1]),
            );
            Ok(ToricCauchyData::from_parts(polytope, axes))
        }
        other => Err(config_err(
            "dimension",
            format!("unsupported dimension {other}; expected 1 or 2"),
        )),
    }
}
