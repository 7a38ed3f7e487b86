//! The model zoo: birth–death–migration metapopulations with catastrophes
//! and non-conservative flock migrations, exclusion processes, conservative
//! batch-migration tables, and table-driven custom models, together with
//! their closed-form comparability and attractiveness checkers.

mod bdm;
mod conservative;
mod exclusion;
mod file;
mod noncons;
mod table;

pub use bdm::{
    binomial_bdm, check_allee_attractive, check_bdm_attractive, check_bdm_comparability,
    check_msdc, check_msdc_attractive, diagonal_bdm, AlleeParams, BdmParams, ParamTable,
};
pub use conservative::{
    check_gs_conservative, check_two_species_chain, two_species_gs_table, two_species_rates,
    GsConservativeModel, GsTable, TwoSpeciesModel,
};
pub use exclusion::{check_exclusion_attractive, simple_exclusion, ExclusionParams};
pub use file::{load_model_file, load_model_str, ClosedForm, LoadedModel};
pub use noncons::{nonconservative_example_rates, NonconservativeRates};
pub use table::{random_local_model, PatternEntry, PatternRatesModel};

/// Verdict of a closed-form parameter check, with a reproducible
/// description of the first violated inequality when it fails.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckOutcome {
    pub holds: bool,
    pub certificate: Option<String>,
}

impl CheckOutcome {
    pub fn pass() -> CheckOutcome {
        CheckOutcome {
            holds: true,
            certificate: None,
        }
    }

    pub fn fail(certificate: String) -> CheckOutcome {
        CheckOutcome {
            holds: false,
            certificate: Some(certificate),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelsError {
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
    #[error("migration matrix is not diagonal: lambda[{k}][{l}] is non-zero")]
    NotDiagonal { k: usize, l: usize },
    #[error("invalid model parameters: {0}")]
    Invalid(String),
}
