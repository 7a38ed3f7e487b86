//! Configurations on finite windows and the site-wise partial order.

use std::sync::Arc;

use thiserror::Error;

use crate::lattice::{Site, Window};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoreError {
    #[error("windows differ: order and application are defined site-wise on a common window")]
    WindowMismatch,
    #[error("site {0} lies outside the window")]
    SiteOutsideWindow(Site),
    #[error("change not admissible: value at site {site} would leave [0, {max}]")]
    Domain { site: Site, max: u32 },
    #[error("value {value} at site {site} exceeds the maximum occupancy {max}")]
    ValueOutOfRange { site: Site, value: u32, max: u32 },
    #[error("window must list one value per site ({expected} sites, {got} values)")]
    LengthMismatch { expected: usize, got: usize },
    #[error("model error: {0}")]
    Model(String),
}

/// Values of a configuration on a finite site window, each in `[0, max_value]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LocalConfiguration {
    window: Arc<Window>,
    values: Vec<u32>,
    max_value: u32,
}

impl LocalConfiguration {
    pub fn new(
        window: Arc<Window>,
        values: Vec<u32>,
        max_value: u32,
    ) -> Result<LocalConfiguration, CoreError> {
        if values.len() != window.len() {
            return Err(CoreError::LengthMismatch {
                expected: window.len(),
                got: values.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            if *v > max_value {
                return Err(CoreError::ValueOutOfRange {
                    site: window.sites()[i].clone(),
                    value: *v,
                    max: max_value,
                });
            }
        }
        Ok(LocalConfiguration {
            window,
            values,
            max_value,
        })
    }

    /// 1d convenience constructor on the path window centred at 0.
    pub fn path(values: &[u32], max_value: u32) -> LocalConfiguration {
        assert!(values.len() % 2 == 1, "path window needs an odd length");
        let radius = (values.len() / 2) as u32;
        LocalConfiguration::new(
            crate::lattice::Window::path_1d(0, radius),
            values.to_vec(),
            max_value,
        )
        .expect("valid path configuration")
    }

    pub fn window(&self) -> &Arc<Window> {
        &self.window
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn max_value(&self) -> u32 {
        self.max_value
    }

    pub fn value(&self, site: &Site) -> Result<u32, CoreError> {
        self.window
            .position(site)
            .map(|i| self.values[i])
            .ok_or_else(|| CoreError::SiteOutsideWindow(site.clone()))
    }

    pub(crate) fn set(&mut self, site: &Site, value: u32) {
        let i = self.window.position(site).expect("site in window");
        self.values[i] = value;
    }

    /// Site-wise order `self <= other` over a common window.
    pub fn leq(&self, other: &LocalConfiguration) -> Result<bool, CoreError> {
        if self.window != other.window {
            return Err(CoreError::WindowMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .all(|(a, b)| a <= b))
    }
}

/// Site-wise order as a free function, mirroring the library surface.
pub fn leq(a: &LocalConfiguration, b: &LocalConfiguration) -> Result<bool, CoreError> {
    a.leq(b)
}
