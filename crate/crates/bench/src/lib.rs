// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the kernel benchmarks.

use elastica_core::{seed_curve, DiffScheme, DiscreteCurve, SeedKind};

pub fn ellipse(samples: usize, scheme: DiffScheme) -> DiscreteCurve {
    seed_curve(&SeedKind::Ellipse { a: 1.2, b: 0.8 }, samples, 2, scheme).expect("valid seed")
}

pub fn figure_eight(samples: usize, scheme: DiffScheme) -> DiscreteCurve {
    seed_curve(&SeedKind::FigureEight { scale: 1.0 }, samples, 3, scheme).expect("valid seed")
}
