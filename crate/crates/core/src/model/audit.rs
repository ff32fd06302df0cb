use std::fmt::Write as _;

use serde::Serialize;

use super::receptive::receptive_field;
use super::spec::{ArchitectureSpec, DiscriminatorSpec, GeneratorSpec, LayerKind, LayerSpec};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub name: String,
    pub kind: LayerKind,
    /// Height, width, channels produced by the layer itself.
    pub output_shape: [usize; 3],
    /// Channels after the skip concatenation, for decoder stages.
    pub concat_channels: Option<usize>,
    pub params: usize,
    /// Cumulative receptive field, for layers on the contracting path.
    pub receptive_field: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub model: String,
    pub input_shape: [usize; 3],
    pub rows: Vec<AuditRow>,
    pub output_shape: [usize; 3],
    pub total_params: usize,
}

impl AuditReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let [h, w, c] = self.input_shape;
        let _ = writeln!(s, "{} (input {h}×{w}×{c})", self.model);
        let _ = writeln!(
            s,
            "{:<12} {:<15} {:>14} {:>7} {:>12} {:>5}",
            "layer", "kind", "output", "concat", "params", "rf"
        );
        for r in &self.rows {
            let [h, w, c] = r.output_shape;
            let _ = writeln!(
                s,
                "{:<12} {:<15} {:>14} {:>7} {:>12} {:>5}",
                r.name,
                format!("{:?}", r.kind),
                format!("{h}×{w}×{c}"),
                r.concat_channels.map(|c| c.to_string()).unwrap_or_default(),
                r.params,
                r.receptive_field.map(|c| c.to_string()).unwrap_or_default(),
            );
        }
        let [h, w, c] = self.output_shape;
        let _ = writeln!(
            s,
            "output {h}×{w}×{c}, {} trainable parameters",
            self.total_params
        );
        s
    }
}

/// Weights + bias, plus scale and shift when batch-normalised.
pub fn layer_params(layer: &LayerSpec, in_channels: usize) -> usize {
    let k = layer.kernel[0] * layer.kernel[1];
    let conv = k * in_channels * layer.filters + layer.filters;
    conv + if layer.batch_norm {
        2 * layer.filters
    } else {
        0
    }
}

pub fn audit_discriminator(spec: &DiscriminatorSpec) -> Result<AuditReport> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut size = spec.input_size;
    let mut channels = spec.fused_channels();
    let mut schedule = Vec::new();
    let layers = spec.body.iter().chain(std::iter::once(&spec.head));
    for (i, layer) in layers.enumerate() {
        size = size.div_ceil(layer.stride());
        schedule.push((layer.kernel[0], layer.stride()));
        let name = if i < spec.body.len() {
            format!("conv{i}")
        } else {
            "head".to_string()
        };
        rows.push(AuditRow {
            name,
            kind: layer.kind,
            output_shape: [size, size, layer.filters],
            concat_channels: None,
            params: layer_params(layer, channels),
            receptive_field: Some(receptive_field(&schedule)?.0),
        });
        channels = layer.filters;
    }
    Ok(finish(
        "discriminator",
        [spec.input_size, spec.input_size, spec.fused_channels()],
        rows,
    ))
}

pub fn audit_generator(spec: &GeneratorSpec) -> Result<AuditReport> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut size = spec.input_size;
    let mut channels = spec.image_channels;
    let mut schedule = Vec::new();
    let contracting = spec
        .encoder
        .iter()
        .enumerate()
        .map(|(i, l)| (format!("enc{i}"), l))
        .chain(std::iter::once((
            "bottleneck".to_string(),
            &spec.bottleneck,
        )));
    for (name, layer) in contracting {
        size = size.div_ceil(layer.stride());
        schedule.push((layer.kernel[0], layer.stride()));
        rows.push(AuditRow {
            name,
            kind: layer.kind,
            output_shape: [size, size, layer.filters],
            concat_channels: None,
            params: layer_params(layer, channels),
            receptive_field: Some(receptive_field(&schedule)?.0),
        });
        channels = layer.filters;
    }
    for (j, layer) in spec.decoder.iter().enumerate() {
        size *= layer.stride();
        let concat = spec.concat_channels(j);
        rows.push(AuditRow {
            name: format!("dec{j}"),
            kind: layer.kind,
            output_shape: [size, size, layer.filters],
            concat_channels: Some(concat),
            params: layer_params(layer, channels),
            receptive_field: None,
        });
        channels = concat;
    }
    size *= spec.output.stride();
    rows.push(AuditRow {
        name: "output".into(),
        kind: spec.output.kind,
        output_shape: [size, size, spec.output.filters],
        concat_channels: None,
        params: layer_params(&spec.output, channels),
        receptive_field: None,
    });
    Ok(finish(
        "generator",
        [spec.input_size, spec.input_size, spec.image_channels],
        rows,
    ))
}

fn finish(model: &str, input_shape: [usize; 3], rows: Vec<AuditRow>) -> AuditReport {
    AuditReport {
        model: model.into(),
        input_shape,
        output_shape: rows.last().map(|r| r.output_shape).unwrap_or(input_shape),
        total_params: rows.iter().map(|r| r.params).sum(),
        rows,
    }
}

/// Audits both networks of an architecture.
pub fn audit_model(spec: &ArchitectureSpec) -> Result<Vec<AuditReport>> {
    spec.validate()?;
    Ok(vec![
        audit_generator(&spec.generator)?,
        audit_discriminator(&spec.discriminator)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discriminator_audit() {
        let r = audit_discriminator(&DiscriminatorSpec::standard()).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert_eq!(r.output_shape, [16, 16, 1]);
        // k·k·c_in·f + f = 4·4·6·64 + 64
        assert_eq!(r.rows[0].params, 6_208);
        assert_eq!(r.rows.last().unwrap().receptive_field, Some(142));
    }

    #[test]
    fn generator_audit() {
        let r = audit_generator(&GeneratorSpec::standard()).unwrap();
        assert_eq!(r.rows.len(), 16);
        assert_eq!(r.output_shape, [256, 256, 3]);
        assert_eq!(r.rows[12].name, "dec4");
        assert_eq!(r.rows[12].concat_channels, Some(512));
        let trace: Vec<_> = r.rows[..8].iter().map(|row| row.output_shape[0]).collect();
        assert_eq!(trace, [128, 64, 32, 16, 8, 4, 2, 1]);
    }

    #[test]
    fn empty_spec_is_rejected() {
        let mut g = GeneratorSpec::standard();
        g.encoder.clear();
        g.decoder.clear();
        assert!(audit_generator(&g).is_err());
        let mut d = DiscriminatorSpec::standard();
        d.body.clear();
        assert!(audit_discriminator(&d).is_err());
    }

    #[test]
    fn text_report_lists_every_row() {
        let r = audit_discriminator(&DiscriminatorSpec::standard()).unwrap();
        let text = r.to_text();
        assert!(text.contains("head"));
        assert!(text.contains("16×16×1"));
        assert_eq!(text.lines().count(), 2 + 6 + 1);
    }
}
