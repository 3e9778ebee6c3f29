//! Loading statistic definitions, correlation matrices and input vectors.

use std::path::Path;

use gfisher::dependence::{gen_structure, BlockLayout, StructureKind};
use gfisher::harness::NullModel;
use gfisher::{CorrMatrix, Error, GFisherDef, InputPanel, Result, Side};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn len(&self) -> Option<usize> {
        match self {
            OneOrMany::One(_) => None,
            OneOrMany::Many(v) => Some(v.len()),
        }
    }

    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x; n],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Statistic definition as written in JSON. Scalars broadcast to every
/// input; `n` is only needed when nothing else fixes the length.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefSpec {
    degrees: OneOrMany,
    #[serde(default)]
    weights: Option<OneOrMany>,
    #[serde(default)]
    side: Option<Side>,
    #[serde(default)]
    n: Option<usize>,
}

impl DefSpec {
    fn declared_len(&self) -> Result<Option<usize>> {
        let lens: Vec<usize> = [self.degrees.len(), self.weights.as_ref().and_then(|w| w.len()), self.n].into_iter().flatten().collect();
        if lens.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Dimension(format!("statistic definition has conflicting lengths {lens:?}")));
        }
        Ok(lens.first().copied())
    }

    fn resolve(&self, n: usize, side: Side) -> Result<GFisherDef> {
        let weights = self.weights.as_ref().map_or(vec![1.0; n], |w| w.expand(n));
        GFisherDef::new(self.degrees.expand(n), weights, side)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

pub fn load_def_specs(path: &Path, many: bool) -> Result<Vec<DefSpec>> {
    let text = read(path)?;
    let parsed = if many {
        serde_json::from_str::<Vec<DefSpec>>(&text)
    } else {
        serde_json::from_str::<DefSpec>(&text).map(|d| vec![d])
    };
    let specs = parsed.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if specs.is_empty() {
        return Err(Error::InvalidInput("no statistic definitions given".into()));
    }
    Ok(specs)
}

/// Settle the sidedness from the definition files and the flag. A flag that
/// disagrees with a definition is an error rather than a silent override.
pub fn resolve_side(specs: &[DefSpec], flag: Option<Side>) -> Result<Side> {
    let mut side = flag;
    for s in specs {
        match (side, s.side) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::InvalidInput(format!("sidedness conflict: {} versus {}", a.as_str(), b.as_str())));
            }
            (None, Some(b)) => side = Some(b),
            _ => {}
        }
    }
    Ok(side.unwrap_or(Side::TwoSided))
}

/// Number of inputs implied by the definitions, if any fixes it.
pub fn declared_n(specs: &[DefSpec]) -> Result<Option<usize>> {
    let mut n = None;
    for s in specs {
        match (n, s.declared_len()?) {
            (Some(a), Some(b)) if a != b => return Err(Error::Dimension(format!("definitions disagree on length: {a} versus {b}"))),
            (None, Some(b)) => n = Some(b),
            _ => {}
        }
    }
    Ok(n)
}

pub fn build_defs(specs: &[DefSpec], n: usize, side: Side) -> Result<Vec<GFisherDef>> {
    specs.iter().map(|s| s.resolve(n, side)).collect()
}

/// Numbers separated by commas, whitespace or newlines.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    read(path)?
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{}: {e} ({t:?})", path.display()))))
        .collect()
}

pub fn read_panel(z: Option<&Path>, p: Option<&Path>) -> Result<Option<InputPanel>> {
    match (z, p) {
        (Some(_), Some(_)) => Err(Error::InvalidInput("give either --z or --p, not both".into())),
        (Some(path), None) => Ok(Some(InputPanel::zscores(read_vector(path)?))),
        (None, Some(path)) => Ok(Some(InputPanel::pvalues(read_vector(path)?)?)),
        (None, None) => Ok(None),
    }
}

/// `kind:layout:param`, e.g. `equal:III:0.5`.
pub fn parse_structure(s: &str) -> Result<(StructureKind, BlockLayout, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("structure {s:?} is not kind:layout:param")));
    }
    let param = parts[2].parse::<f64>().map_err(|e| Error::Parse(format!("structure parameter {:?}: {e}", parts[2])))?;
    Ok((parts[0].parse()?, parts[1].parse()?, param))
}

pub fn load_sigma(sigma: Option<&Path>, structure: Option<&str>, n: Option<usize>) -> Result<Option<CorrMatrix>> {
    match (sigma, structure) {
        (Some(_), Some(_)) => Err(Error::InvalidInput("give either --sigma or --structure, not both".into())),
        (Some(path), None) => CorrMatrix::from_csv_str(&read(path)?).map(Some),
        (None, Some(spec)) => {
            let n = n.ok_or_else(|| Error::InvalidInput("--structure needs the number of inputs from the data or the definition".into()))?;
            let (kind, layout, param) = parse_structure(spec)?;
            Ok(Some(gen_structure(kind, layout, n, param)?.sigma))
        }
        (None, None) => Ok(None),
    }
}

/// `gmm`, or `t:<nu>` for the multivariate t.
pub fn parse_model(s: &str) -> Result<NullModel> {
    let lower = s.to_ascii_lowercase();
    if lower == "gmm" || lower == "normal" {
        return Ok(NullModel::Gmm);
    }
    if let Some(nu) = lower.strip_prefix("t:") {
        let nu = nu.parse::<f64>().map_err(|e| Error::Parse(format!("degrees of freedom {nu:?}: {e}")))?;
        return Ok(NullModel::MultivariateT { nu });
    }
    Err(Error::Parse(format!("unknown null model {s:?}; expected gmm or t:<nu>")))
}

pub fn parse_list(s: &str) -> Vec<String> {
    s.split(',').map(|t| t.trim().to_ascii_lowercase()).filter(|t| !t.is_empty()).collect()
}

pub fn parse_alphas(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("alpha {t:?}: {e}"))))
        .collect()
}
