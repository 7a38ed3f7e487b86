//! Sites, finite tori and site windows.
//!
//! Sites live on `Z^d`. Checks run on explicit finite windows (paths or
//! boxes of sites); simulations run on a torus where site arithmetic wraps
//! modulo the side length. Boundary sites outside a window are always an
//! error, never silently zero.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

/// A lattice site, given by its integer coordinates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(pub Vec<i32>);

impl Site {
    /// One-dimensional site.
    pub fn at(x: i32) -> Site {
        Site(vec![x])
    }

    pub fn dim(&self) -> u32 {
        self.0.len() as u32
    }

    pub fn l1_dist(&self, other: &Site) -> u32 {
        assert_eq!(self.0.len(), other.0.len(), "site dimension mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.abs_diff(*b))
            .sum()
    }

    pub fn offset(&self, delta: &[i32]) -> Site {
        Site(
            self.0
                .iter()
                .zip(delta)
                .map(|(a, d)| a + d)
                .collect(),
        )
    }

    /// Coordinate-wise difference `self - base`.
    pub fn relative_to(&self, base: &Site) -> Site {
        Site(
            self.0
                .iter()
                .zip(&base.0)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn translate(&self, base: &Site) -> Site {
        Site(
            self.0
                .iter()
                .zip(&base.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            write!(f, "{}", self.0[0])
        } else {
            write!(f, "(")?;
            for (i, c) in self.0.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, ")")
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            write!(f, "{}", self.0[0])
        } else {
            let coords: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
            write!(f, "{}", coords.join("_"))
        }
    }
}

/// Parses the `Display` form back: either a single integer or coordinates
/// joined by underscores.
pub fn parse_site(s: &str) -> Result<Site, String> {
    let coords: Result<Vec<i32>, _> = s.split('_').map(|c| c.trim().parse::<i32>()).collect();
    coords
        .map(Site)
        .map_err(|_| format!("bad site {s:?}"))
}

/// All non-zero offsets with L1 norm at most `delta` in dimension `dim`,
/// in lexicographic order.
pub fn l1_ball_offsets(dim: u32, delta: u32) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    let d = delta as i32;
    let mut cur = vec![-d; dim as usize];
    loop {
        let norm: u32 = cur.iter().map(|c| c.unsigned_abs()).sum();
        if norm <= delta && norm > 0 {
            out.push(cur.clone());
        }
        // odometer
        let mut i = dim as usize;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < d {
                cur[i] += 1;
                for c in cur.iter_mut().skip(i + 1) {
                    *c = -d;
                }
                break;
            }
        }
    }
}

/// A finite torus `(Z/LZ)^d` with an L1 neighbourhood radius `delta`.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub dim: u32,
    pub side: u32,
    pub delta: u32,
}

impl Lattice {
    /// `side` must leave room for two disjoint dependency windows,
    /// `side > 2 * (delta + dep_radius)`, so local rules never see their
    /// own image around the torus.
    pub fn new(dim: u32, side: u32, delta: u32, dep_radius: u32) -> Result<Lattice, String> {
        if dim == 0 || side == 0 || delta == 0 {
            return Err("lattice dimension, side and delta must be positive".into());
        }
        if side <= 2 * (delta + dep_radius) {
            return Err(format!(
                "torus side {side} too small for delta {delta} and dependency radius {dep_radius}"
            ));
        }
        Ok(Lattice { dim, side, delta })
    }

    pub fn wrap(&self, site: &Site) -> Site {
        let l = self.side as i32;
        Site(site.0.iter().map(|c| c.rem_euclid(l)).collect())
    }

    pub fn num_sites(&self) -> usize {
        (self.side as usize).pow(self.dim)
    }

    /// Flattened index of a (wrapped) site.
    pub fn index(&self, site: &Site) -> usize {
        let w = self.wrap(site);
        let mut idx = 0usize;
        for c in &w.0 {
            idx = idx * self.side as usize + *c as usize;
        }
        idx
    }

    pub fn site_from_index(&self, mut idx: usize) -> Site {
        let mut coords = vec![0i32; self.dim as usize];
        for c in coords.iter_mut().rev() {
            *c = (idx % self.side as usize) as i32;
            idx /= self.side as usize;
        }
        Site(coords)
    }

    pub fn neighbors(&self, site: &Site) -> Vec<Site> {
        l1_ball_offsets(self.dim, self.delta)
            .into_iter()
            .map(|off| self.wrap(&site.offset(&off)))
            .collect()
    }
}

/// Open geometry (no wrapping) or a torus; supplies neighbourhoods for
/// change enumeration.
#[derive(Clone, Debug)]
pub enum Geometry {
    /// Unbounded `Z^d`; membership in a concrete window is checked later.
    Open { dim: u32, delta: u32 },
    Torus(Lattice),
    /// An explicit finite site list where every pair of distinct sites is
    /// neighbouring (used by models with arbitrary-range jumps).
    Complete { sites: Vec<Site> },
}

impl Geometry {
    pub fn neighbors(&self, site: &Site) -> Vec<Site> {
        match self {
            Geometry::Open { dim, delta } => l1_ball_offsets(*dim, *delta)
                .into_iter()
                .map(|off| site.offset(&off))
                .collect(),
            Geometry::Torus(lat) => lat.neighbors(site),
            Geometry::Complete { sites } => {
                sites.iter().filter(|s| *s != site).cloned().collect()
            }
        }
    }
}

/// An ordered list of sites carrying a configuration fragment.
#[derive(Debug)]
pub struct Window {
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
}

impl PartialEq for Window {
    fn eq(&self, other: &Self) -> bool {
        self.sites == other.sites
    }
}
impl Eq for Window {}

impl std::hash::Hash for Window {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.sites.hash(state);
    }
}

impl Window {
    pub fn from_sites(sites: Vec<Site>) -> Result<Arc<Window>, String> {
        let mut index = HashMap::new();
        for (i, s) in sites.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(format!("duplicate site {s:?} in window"));
            }
        }
        Ok(Arc::new(Window { sites, index }))
    }

    /// One-dimensional path `center-radius ..= center+radius`.
    pub fn path_1d(center: i32, radius: u32) -> Arc<Window> {
        let r = radius as i32;
        Window::from_sites(((center - r)..=(center + r)).map(Site::at).collect()).unwrap()
    }

    /// d-dimensional box of the given L-infinity radius around a center.
    pub fn box_dd(center: &Site, radius: u32) -> Arc<Window> {
        let dim = center.dim();
        let r = radius as i32;
        let mut sites = Vec::new();
        let mut cur = vec![-r; dim as usize];
        'outer: loop {
            sites.push(center.offset(&cur));
            let mut i = dim as usize;
            loop {
                if i == 0 {
                    break 'outer;
                }
                i -= 1;
                if cur[i] < r {
                    cur[i] += 1;
                    for c in cur.iter_mut().skip(i + 1) {
                        *c = -r;
                    }
                    break;
                }
            }
        }
        Window::from_sites(sites).unwrap()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn position(&self, site: &Site) -> Option<usize> {
        self.index.get(site).copied()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.index.contains_key(site)
    }

    /// True when every site within L1 distance `radius` of `center` is in
    /// the window.
    pub fn covers_ball(&self, center: &Site, radius: u32) -> bool {
        if radius == 0 {
            return self.contains(center);
        }
        self.contains(center)
            && l1_ball_offsets(center.dim(), radius)
                .into_iter()
                .all(|off| self.contains(&center.offset(&off)))
    }
}
