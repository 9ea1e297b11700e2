//! TOML documents for ground-truth Hawkes specifications.
//!
//! The document mirrors the kernel forms directly:
//!
//! ```toml
//! background = [0.1, 0.2]
//!
//! [[kernels]]            # row-major K x K entries, source-to-target
//! form = "power_law_product"
//! coeff = 0.2
//! shift = 0.5
//! exponent = -1.3
//! support = 8.0
//! ```

use serde::{Deserialize, Serialize};
use sghp_core::hawkes::{HawkesError, HawkesSpec, KernelSpec, POWER_LAW_SUPPORT};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("spec parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("spec serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("{0}")]
    Hawkes(#[from] HawkesError),
}

impl SpecIoError {
    pub fn code(&self) -> &'static str {
        match self {
            SpecIoError::Io(_) => "io_error",
            SpecIoError::Parse(_) | SpecIoError::Serialize(_) => "parse_error",
            SpecIoError::Hawkes(HawkesError::Unstable { .. }) => "unstable_spec",
            SpecIoError::Hawkes(_) => "invalid_spec",
        }
    }
}

fn default_support() -> f64 {
    POWER_LAW_SUPPORT
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
enum KernelDoc {
    PowerLaw {
        coeff: f64,
        shift: f64,
        exponent: f64,
    },
    PowerLawProduct {
        coeff: f64,
        shift: f64,
        exponent: f64,
        #[serde(default = "default_support")]
        support: f64,
    },
    Exponential {
        coeff: f64,
        rate: f64,
    },
    ExpMixture {
        terms: Vec<(f64, f64)>,
    },
    ClippedSine {
        scale: f64,
        horizon: f64,
    },
    Zero,
}

impl From<&KernelSpec> for KernelDoc {
    fn from(k: &KernelSpec) -> Self {
        match *k {
            KernelSpec::PowerLaw {
                coeff,
                shift,
                exponent,
            } => KernelDoc::PowerLaw {
                coeff,
                shift,
                exponent,
            },
            KernelSpec::PowerLawProduct {
                coeff,
                shift,
                exponent,
                support,
            } => KernelDoc::PowerLawProduct {
                coeff,
                shift,
                exponent,
                support,
            },
            KernelSpec::Exponential { coeff, rate } => KernelDoc::Exponential { coeff, rate },
            KernelSpec::ExpMixture { ref terms } => KernelDoc::ExpMixture {
                terms: terms.clone(),
            },
            KernelSpec::ClippedSine { scale, horizon } => {
                KernelDoc::ClippedSine { scale, horizon }
            }
            KernelSpec::Zero => KernelDoc::Zero,
        }
    }
}

impl From<KernelDoc> for KernelSpec {
    fn from(k: KernelDoc) -> Self {
        match k {
            KernelDoc::PowerLaw {
                coeff,
                shift,
                exponent,
            } => KernelSpec::PowerLaw {
                coeff,
                shift,
                exponent,
            },
            KernelDoc::PowerLawProduct {
                coeff,
                shift,
                exponent,
                support,
            } => KernelSpec::PowerLawProduct {
                coeff,
                shift,
                exponent,
                support,
            },
            KernelDoc::Exponential { coeff, rate } => KernelSpec::Exponential { coeff, rate },
            KernelDoc::ExpMixture { terms } => KernelSpec::ExpMixture { terms },
            KernelDoc::ClippedSine { scale, horizon } => {
                KernelSpec::ClippedSine { scale, horizon }
            }
            KernelDoc::Zero => KernelSpec::Zero,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SpecDoc {
    background: Vec<f64>,
    kernels: Vec<KernelDoc>,
}

/// Parses and stability-checks a specification document.
pub fn spec_from_str(text: &str) -> Result<HawkesSpec, SpecIoError> {
    let doc: SpecDoc = toml::from_str(text)?;
    Ok(HawkesSpec::new(
        doc.background,
        doc.kernels.into_iter().map(KernelSpec::from).collect(),
    )?)
}

pub fn spec_to_string(spec: &HawkesSpec) -> Result<String, SpecIoError> {
    let k = spec.num_types();
    let doc = SpecDoc {
        background: spec.background().to_vec(),
        kernels: (0..k * k)
            .map(|idx| KernelDoc::from(spec.kernel(idx / k, idx % k)))
            .collect(),
    };
    Ok(toml::to_string(&doc)?)
}

/// Resolves a spec source: the `appendix-a` alias or a TOML file path.
pub fn load_spec_source(source: &str) -> Result<HawkesSpec, SpecIoError> {
    if source == "appendix-a" {
        return Ok(sghp_core::hawkes::appendix_a_spec());
    }
    let text = std::fs::read_to_string(source)?;
    spec_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sghp_core::hawkes::appendix_a_spec;

    #[test]
    fn appendix_spec_round_trips() {
        let spec = appendix_a_spec();
        let text = spec_to_string(&spec).unwrap();
        let parsed = spec_from_str(&text).unwrap();
        assert_eq!(spec, parsed);
    }

    #[test]
    fn hand_written_document_parses() {
        let text = r#"
background = [0.5]

[[kernels]]
form = "exponential"
coeff = 0.4
rate = 1.0
"#;
        let spec = spec_from_str(text).unwrap();
        assert_eq!(spec.num_types(), 1);
        assert_eq!(spec.kernel(0, 0).value(0.0), 0.4);
    }

    #[test]
    fn power_law_support_defaults() {
        let text = r#"
background = [0.1]

[[kernels]]
form = "power_law_product"
coeff = 0.01
shift = 0.5
exponent = -1.3
"#;
        let spec = spec_from_str(text).unwrap();
        assert_eq!(spec.kernel(0, 0).value(POWER_LAW_SUPPORT + 0.1), 0.0);
    }

    #[test]
    fn unstable_document_rejected_with_code() {
        let text = r#"
background = [0.5]

[[kernels]]
form = "exponential"
coeff = 1.5
rate = 1.0
"#;
        let err = spec_from_str(text).unwrap_err();
        assert_eq!(err.code(), "unstable_spec");
    }

    #[test]
    fn alias_resolves() {
        let spec = load_spec_source("appendix-a").unwrap();
        assert_eq!(spec.num_types(), 2);
    }
}
