mod common;

#[test]
fn random_instances_match_grid_minimax() {
    common::sd_oracle_agreement(2024, 50).unwrap();
}
