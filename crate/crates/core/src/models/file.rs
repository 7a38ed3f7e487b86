//! Model specification files: TOML documents with a `family` tag, the
//! shared integer fields and family-specific parameter tables of rationals
//! written as `"p/q"` strings.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use toml::Value;

use crate::change::Change;
use crate::lattice::{parse_site, Site};
use crate::model::RateModel;
use crate::rat::{parse_rat, Rat};

use super::bdm::{binomial_bdm, diagonal_bdm, AlleeParams, BdmParams, ParamTable};
use super::conservative::{two_species_rates, GsConservativeModel, GsTable};
use super::exclusion::ExclusionParams;
use super::table::{PatternEntry, PatternRatesModel};
use super::ModelsError;

/// Which closed-form checker applies to a loaded model, carrying the
/// parameters that checker needs.
#[derive(Clone)]
pub enum ClosedForm {
    Bdm(BdmParams),
    Msdc(BdmParams),
    Allee(AlleeParams),
    TwoSpecies([Rat; 5]),
    GeneralExclusion(ExclusionParams),
    GsConservative(GsTable),
    None,
}

#[derive(Clone)]
pub struct LoadedModel {
    pub name: String,
    pub family: String,
    pub model: Arc<dyn RateModel>,
    pub closed_form: ClosedForm,
}

#[derive(Deserialize)]
struct RawModelFile {
    family: String,
    #[serde(rename = "N")]
    n: Option<u32>,
    #[serde(rename = "N_A")]
    n_a: Option<u32>,
    #[serde(rename = "M")]
    m: Option<u32>,
    d: Option<u32>,
    delta: Option<u32>,
    k_max: Option<u32>,
    l_max: Option<u32>,
    params: Option<Value>,
}

fn invalid(msg: impl Into<String>) -> ModelsError {
    ModelsError::Invalid(msg.into())
}

fn get<'v>(params: &'v Value, key: &str) -> Result<&'v Value, ModelsError> {
    params
        .get(key)
        .ok_or_else(|| invalid(format!("missing parameter {key:?}")))
}

fn rat_of(v: &Value) -> Result<Rat, ModelsError> {
    match v {
        Value::String(s) => parse_rat(s).map_err(invalid),
        Value::Integer(i) => Ok(crate::rat::rint(*i)),
        _ => Err(invalid(format!("expected a rational string, got {v}"))),
    }
}

fn rat_vec(v: &Value) -> Result<Vec<Rat>, ModelsError> {
    v.as_array()
        .ok_or_else(|| invalid("expected an array of rationals"))?
        .iter()
        .map(rat_of)
        .collect()
}

fn rat_matrix(v: &Value) -> Result<Vec<Vec<Rat>>, ModelsError> {
    v.as_array()
        .ok_or_else(|| invalid("expected an array of rows"))?
        .iter()
        .map(rat_vec)
        .collect()
}

fn u32_of(v: &Value) -> Result<u32, ModelsError> {
    v.as_integer()
        .and_then(|i| u32::try_from(i).ok())
        .ok_or_else(|| invalid(format!("expected a non-negative integer, got {v}")))
}

fn r_key(v: &Value) -> Result<Vec<u32>, ModelsError> {
    v.as_array()
        .ok_or_else(|| invalid("neighbour vector must be an array"))?
        .iter()
        .map(u32_of)
        .collect()
}

/// A scalar table: either a single rational or `[{ r = [...], value = "p/q" }]`.
fn scalar_table(v: &Value) -> Result<ParamTable<Rat>, ModelsError> {
    if let Ok(c) = rat_of(v) {
        return Ok(ParamTable::Constant(c));
    }
    let rows = v
        .as_array()
        .ok_or_else(|| invalid("expected a rational or a table array"))?;
    let mut map = BTreeMap::new();
    for row in rows {
        map.insert(r_key(get(row, "r")?)?, rat_of(get(row, "value")?)?);
    }
    Ok(ParamTable::Table(map))
}

/// A vector table: either an array of rationals or rows of `{ r, value = [...] }`.
fn vector_table(v: &Value) -> Result<ParamTable<Vec<Rat>>, ModelsError> {
    if let Ok(c) = rat_vec(v) {
        return Ok(ParamTable::Constant(c));
    }
    let rows = v
        .as_array()
        .ok_or_else(|| invalid("expected a vector or a table array"))?;
    let mut map = BTreeMap::new();
    for row in rows {
        map.insert(r_key(get(row, "r")?)?, rat_vec(get(row, "value")?)?);
    }
    Ok(ParamTable::Table(map))
}

fn matrix_table(v: &Value) -> Result<ParamTable<Vec<Vec<Rat>>>, ModelsError> {
    if let Ok(c) = rat_matrix(v) {
        return Ok(ParamTable::Constant(c));
    }
    let rows = v
        .as_array()
        .ok_or_else(|| invalid("expected a matrix or a table array"))?;
    let mut map = BTreeMap::new();
    for row in rows {
        map.insert(r_key(get(row, "r")?)?, rat_matrix(get(row, "value")?)?);
    }
    Ok(ParamTable::Table(map))
}

pub fn load_model_str(text: &str, name: &str) -> Result<LoadedModel, ModelsError> {
    let raw: RawModelFile =
        toml::from_str(text).map_err(|e| invalid(format!("model file parse error: {e}")))?;
    let params = raw.params.as_ref();
    let need =
        |field: Option<u32>, what: &str| field.ok_or_else(|| invalid(format!("missing {what}")));
    let p = |key: &str| -> Result<&Value, ModelsError> {
        get(
            params.ok_or_else(|| invalid("missing [params] section"))?,
            key,
        )
    };

    let (model, closed_form): (Arc<dyn RateModel>, ClosedForm) = match raw.family.as_str() {
        "bdm" => {
            let b = BdmParams {
                n: need(raw.n, "N")?,
                n_a: need(raw.n_a, "N_A")?,
                m: need(raw.m, "M")?,
                dim: raw.d.unwrap_or(1),
                phi: scalar_table(p("phi")?)?,
                phi_a: scalar_table(p("phi_a")?)?,
                mu: vector_table(p("mu")?)?,
                lambda: matrix_table(p("lambda")?)?,
            };
            b.validate()?;
            (Arc::new(b.clone()), ClosedForm::Bdm(b))
        }
        "bdm-binomial" => {
            let b = binomial_bdm(
                rat_of(p("lambda")?)?,
                rat_of(p("p")?)?,
                need(raw.n, "N")?,
                need(raw.n_a, "N_A")?,
                need(raw.m, "M")?,
                raw.d.unwrap_or(1),
                rat_of(p("phi")?)?,
                rat_of(p("phi_a")?)?,
            )?;
            (Arc::new(b.clone()), ClosedForm::Bdm(b))
        }
        "msdc" => {
            let b = diagonal_bdm(
                need(raw.n, "N")?,
                need(raw.n_a, "N_A")?,
                need(raw.m, "M")?,
                raw.d.unwrap_or(1),
                scalar_table(p("phi")?)?,
                scalar_table(p("phi_a")?)?,
                vector_table(p("mu")?)?,
                vector_table(p("lambda")?)?,
            )?;
            (Arc::new(b.clone()), ClosedForm::Msdc(b))
        }
        "allee" => {
            let a = AlleeParams {
                n: need(raw.n, "N")?,
                n_a: need(raw.n_a, "N_A")?,
                m: need(raw.m, "M")?,
                dim: raw.d.unwrap_or(1),
                phi: rat_of(p("phi")?)?,
                phi_a: rat_of(p("phi_a")?)?,
                lambda: rat_vec(p("lambda")?)?,
                lambda_a: rat_of(p("lambda_a")?)?,
                mu: rat_vec(p("mu")?)?,
                mu_a: rat_of(p("mu_a")?)?,
                threshold: u32_of(p("a_threshold")?)?,
            };
            let b = a.to_bdm()?;
            (Arc::new(b), ClosedForm::Allee(a))
        }
        "two-species-exclusion" => {
            let v = rat_vec(p("rates")?)?;
            let rates: [Rat; 5] = v
                .try_into()
                .map_err(|_| invalid("two-species model needs exactly five rates"))?;
            let m = two_species_rates(&rates)?;
            (Arc::new(m), ClosedForm::TwoSpecies(rates))
        }
        "general-exclusion" => {
            let count = u32_of(p("sites")?)? as i32;
            let sites: Vec<Site> = (0..count).map(Site::at).collect();
            let mut entries = Vec::new();
            for row in p("gamma")?
                .as_array()
                .ok_or_else(|| invalid("gamma must be an array"))?
            {
                let eta = r_key(get(row, "eta")?)?;
                let from = Site::at(u32_of(get(row, "from")?)? as i32);
                let to = Site::at(u32_of(get(row, "to")?)? as i32);
                entries.push(((eta, from, to), rat_of(get(row, "rate")?)?));
            }
            let m = ExclusionParams::new(sites, entries)?;
            (Arc::new(m.clone()), ClosedForm::GeneralExclusion(m))
        }
        "gs-conservative" => {
            let n = need(raw.n, "N")?;
            let mm = need(raw.m, "M")?;
            let mut entries = Vec::new();
            for row in p("gamma")?
                .as_array()
                .ok_or_else(|| invalid("gamma must be an array"))?
            {
                entries.push((
                    (
                        u32_of(get(row, "alpha")?)?,
                        u32_of(get(row, "beta")?)?,
                        u32_of(get(row, "k")?)?,
                    ),
                    rat_of(get(row, "rate")?)?,
                ));
            }
            let table = GsTable::new(n, mm, entries)?;
            let m = GsConservativeModel {
                table: table.clone(),
                dim: raw.d.unwrap_or(1),
            };
            (Arc::new(m), ClosedForm::GsConservative(table))
        }
        "custom-table" => {
            let mut entries = Vec::new();
            for row in p("entry")?
                .as_array()
                .ok_or_else(|| invalid("entry must be an array"))?
            {
                let shape = Change::parse_descriptor(
                    get(row, "change")?
                        .as_str()
                        .ok_or_else(|| invalid("change must be a descriptor string"))?,
                )
                .map_err(invalid)?;
                let mut window = Vec::new();
                if let Some(w) = row.get("window") {
                    let t = w
                        .as_table()
                        .ok_or_else(|| invalid("window must be a table of site = value"))?;
                    for (site, value) in t {
                        window.push((parse_site(site).map_err(invalid)?, u32_of(value)?));
                    }
                }
                entries.push(PatternEntry {
                    shape,
                    window,
                    rate: rat_of(get(row, "rate")?)?,
                });
            }
            let m = PatternRatesModel::new(
                need(raw.n, "N")?,
                raw.d.unwrap_or(1),
                raw.delta.unwrap_or(1),
                need(raw.k_max, "k_max")?,
                need(raw.l_max, "l_max")?,
                entries,
            )?;
            (Arc::new(m), ClosedForm::None)
        }
        other => return Err(invalid(format!("unknown model family {other:?}"))),
    };
    Ok(LoadedModel {
        name: name.to_string(),
        family: raw.family,
        model,
        closed_form,
    })
}

pub fn load_model_file(path: &Path) -> Result<LoadedModel, ModelsError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    load_model_str(&text, &name)
}
