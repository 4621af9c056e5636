use faraday_core::manufactured::{lemma_equivalence_check, ManufacturedForm};
use faraday_core::tolerances::{LEMMA_GRIDS, LEMMA_ORDER, LEMMA_ORDER_TOL};
use faraday_core::MetricField;

#[test]
fn manufactured_residual_is_second_order() {
    for beta in ["unit", "wave"] {
        for k in [1, 2] {
            let form = ManufacturedForm::plane_waves(3, k, 1.0, 11 + k as u64).unwrap();
            let metric = MetricField::from_ids(beta, "linear").unwrap();
            let table = lemma_equivalence_check(&form, &metric, &LEMMA_GRIDS, 0.3).unwrap();
            assert!((table.order() - LEMMA_ORDER).abs() < LEMMA_ORDER_TOL, "{table:?}");
        }
    }
}
