#![allow(dead_code)]

use rzones::field::FieldRaster;
use rzones::fpca::{FpcaModel, FpcaSettings};
use rzones::response::{field_curves, NGrid};
use rzones::surrogate::CellwiseModel;
use rzones::zones::{cluster, ClusterSettings, ZoneModel};

pub type ToyModel = CellwiseModel<fn(&[f64]) -> f64>;

/// Yield plateau grows with channel 1; every other passive channel is inert.
pub fn toy_response(cell: &[f64]) -> f64 {
    40.0 + (10.0 + 4.0 * cell[1]) / (1.0 + (-0.06 * (cell[0] - 60.0)).exp())
}

pub struct Toy {
    pub field: FieldRaster,
    pub model: ToyModel,
    pub grid: NGrid,
    pub fpca: FpcaModel,
    pub zones: ZoneModel,
    pub names: Vec<String>,
}

/// Field whose channel 1 runs 0..10 across the columns, with `extra` inert
/// passive channels; curves, fPCA and 3 zones fitted on it.
pub fn toy(size: usize, extra: usize) -> Toy {
    let n = 2 + extra;
    let mut names = vec!["N".to_string(), "S".to_string()];
    names.extend((0..extra).map(|i| format!("X{i}")));
    let mut data = Vec::with_capacity(size * size * n);
    for r in 0..size {
        for c in 0..size {
            data.push(50.0);
            data.push(10.0 * c as f64 / (size - 1) as f64);
            for i in 0..extra {
                data.push(((r * 7 + c * 3 + i * 5) % 11) as f64);
            }
        }
    }
    let field = FieldRaster::new(size, size, names.clone(), data, vec![true; size * size], 10.0).unwrap();
    let model: ToyModel = CellwiseModel::new(n, toy_response as fn(&[f64]) -> f64);
    let grid = NGrid::new(0.0, 150.0, 31).unwrap();
    let curves = field_curves(&model, &field, &grid).unwrap();
    let fpca = FpcaModel::fit_curves(&curves.curves, &FpcaSettings::default()).unwrap();
    let scores: Vec<_> = curves.curves.iter().map(|c| fpca.transform_curve(c).unwrap()).collect();
    let zones = cluster(&scores, &ClusterSettings { zones: 3, ..ClusterSettings::default() }).unwrap();
    Toy { field, model, grid, fpca, zones, names }
}
