use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    cooccurrence_features, quantize_truncate, residual_first_order, residual_minmax,
    residual_predict, residual_second_order, Direction, FilterSpec, MinMax, QuantizerParams,
    ResidualMap,
};
use crate::data::GrayImage;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResidualKind {
    FirstOrder,
    SecondOrder,
    Min,
    Max,
    Custom { filter: FilterSpec },
}

impl ResidualKind {
    /// Order of the central term.
    pub fn lambda(&self) -> Result<f64> {
        Ok(match self {
            ResidualKind::FirstOrder => 1.0,
            ResidualKind::SecondOrder => 4.0,
            ResidualKind::Min | ResidualKind::Max => 2.0,
            ResidualKind::Custom { filter } => filter.predictor()?.lambda(),
        })
    }

    pub fn compute(&self, img: &ResidualMap) -> Result<ResidualMap> {
        match self {
            ResidualKind::FirstOrder => residual_first_order(img),
            ResidualKind::SecondOrder => residual_second_order(img),
            ResidualKind::Min => residual_minmax(img, MinMax::Min),
            ResidualKind::Max => residual_minmax(img, MinMax::Max),
            ResidualKind::Custom { filter } => residual_predict(img, &filter.predictor()?),
        }
    }
}

/// One residual followed by quantization with step `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureComponent {
    pub residual: ResidualKind,
    pub c: f64,
}

/// Residuals → quantize/truncate → co-occurrence, concatenated per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSpec {
    pub components: Vec<FeatureComponent>,
    pub t_trunc: u32,
    pub order: usize,
    pub direction: Direction,
    /// Enforce the step-size rule tying `c` to each residual's order.
    pub strict: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            components: vec![
                FeatureComponent {
                    residual: ResidualKind::Min,
                    c: 2.0,
                },
                FeatureComponent {
                    residual: ResidualKind::Max,
                    c: 2.0,
                },
                FeatureComponent {
                    residual: ResidualKind::FirstOrder,
                    c: 1.0,
                },
            ],
            t_trunc: 2,
            order: 3,
            direction: Direction::Horizontal,
            strict: true,
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Config("feature spec lists no residuals".into()));
        }
        for comp in &self.components {
            let q = self.quantizer(comp);
            if self.strict {
                q.validate_strict(comp.residual.lambda()?)?;
            } else {
                q.validate()?;
            }
        }
        Ok(())
    }

    fn quantizer(&self, comp: &FeatureComponent) -> QuantizerParams {
        QuantizerParams {
            c: comp.c,
            t_trunc: self.t_trunc,
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len() * (2 * self.t_trunc as usize + 1).pow(self.order as u32)
    }
}

pub fn extract_features(img: &GrayImage, spec: &FeatureSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let z = ResidualMap::from_image(img);
    let mut out = Vec::with_capacity(spec.dim());
    for comp in &spec.components {
        let r = comp.residual.compute(&z)?;
        let rq = quantize_truncate(&r, &spec.quantizer(comp))?;
        out.extend(cooccurrence_features(
            &rq,
            spec.t_trunc,
            spec.order,
            spec.direction,
        )?);
    }
    Ok(out)
}

/// Header `label,f0,f1,…` then one row per image; label 0 is cover, 1 stego.
pub fn features_to_csv(rows: &[(u8, Vec<f64>)]) -> Result<String> {
    let dim = rows.first().map_or(0, |r| r.1.len());
    let mut out = String::from("label");
    for k in 0..dim {
        let _ = write!(out, ",f{k}");
    }
    out.push('\n');
    for (label, feats) in rows {
        if feats.len() != dim {
            return Err(Error::Shape(format!(
                "feature row of length {} among {dim}",
                feats.len()
            )));
        }
        let _ = write!(out, "{label}");
        for v in feats {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses the layout written by [`features_to_csv`].
pub fn features_from_csv(text: &str) -> Result<Vec<(u8, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("label") {
        return Err(Error::Data(
            "feature CSV must start with a `label` column".into(),
        ));
    }
    let dim = headers.len() - 1;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let label = match record.get(0) {
            Some("0") => 0,
            Some("1") => 1,
            other => {
                return Err(Error::Data(format!(
                    "line {line}: label {other:?} is not 0 or 1"
                )))
            }
        };
        let feats = record
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Data(format!("line {line}: {v:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if feats.len() != dim {
            return Err(Error::Data(format!(
                "line {line}: {} features, header has {dim}",
                feats.len()
            )));
        }
        rows.push((label, feats));
    }
    Ok(rows)
}
