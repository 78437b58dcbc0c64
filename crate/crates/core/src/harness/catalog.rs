//! Source containers: the nine the demonstrations use, four lookalikes and
//! three far outside the training range.

use serde::{Deserialize, Serialize};

use crate::container::ContainerSpec;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainerCatalog {
    pub training: Vec<ContainerSpec>,
    pub similar_test: Vec<ContainerSpec>,
    pub unaccustomed: Vec<ContainerSpec>,
}

fn spec(name: &str, h: f64, d: f64) -> ContainerSpec {
    ContainerSpec::new(name, h, d).expect("catalog dimensions are positive")
}

impl Default for ContainerCatalog {
    fn default() -> Self {
        Self {
            training: vec![
                spec("red_cup", 120.0, 75.0),
                spec("short_mug", 90.0, 80.0),
                spec("tall_glass", 140.0, 60.0),
                spec("slim_tumbler", 130.0, 50.0),
                spec("wide_cup", 100.0, 90.0),
                spec("stout_cup", 95.0, 65.0),
                spec("pint_glass", 140.0, 85.0),
                spec("small_tumbler", 90.0, 55.0),
                spec("jar", 110.0, 70.0),
            ],
            similar_test: vec![
                spec("water_bottle", 125.0, 62.0),
                spec("coffee_mug", 100.0, 78.0),
                spec("juice_glass", 115.0, 58.0),
                spec("fat_bottle", 132.0, 82.0),
            ],
            unaccustomed: vec![
                spec("wine_bottle", 280.0, 45.0),
                spec("blue_bottle", 230.0, 60.0),
                spec("measuring_cup", 80.0, 120.0),
            ],
        }
    }
}

impl ContainerCatalog {
    /// The container standing in for the accustomed red cup.
    pub fn reference(&self) -> &ContainerSpec {
        &self.training[0]
    }

    pub fn all(&self) -> impl Iterator<Item = &ContainerSpec> {
        self.training.iter().chain(&self.similar_test).chain(&self.unaccustomed)
    }

    pub fn find(&self, name: &str) -> Result<&ContainerSpec> {
        self.all()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Usage(format!("no container named `{name}` in the catalog")))
    }

    /// Axis-aligned (H, D) bounds of the training containers.
    pub fn training_hull(&self) -> ((f64, f64), (f64, f64)) {
        let hs = self.training.iter().map(|c| c.height_mm);
        let ds = self.training.iter().map(|c| c.diameter_mm);
        (
            (hs.clone().fold(f64::INFINITY, f64::min), hs.fold(f64::NEG_INFINITY, f64::max)),
            (ds.clone().fold(f64::INFINITY, f64::min), ds.fold(f64::NEG_INFINITY, f64::max)),
        )
    }
}

/// Whether (h, d) lies inside the convex hull of the training containers.
pub fn inside_training_hull(catalog: &ContainerCatalog, h: f64, d: f64) -> bool {
    let mut pts: Vec<(f64, f64)> = catalog.training.iter().map(|c| (c.height_mm, c.diameter_mm)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    // monotone chain
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    (0..hull.len()).all(|i| cross(hull[i], hull[(i + 1) % hull.len()], (h, d)) >= 0.0)
}
