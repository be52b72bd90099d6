//! The acceptance suite: one test per battery criterion, each printing its
//! pass/fail line with the measured values.

use syntomic::battery::{run_criterion, ALL_IDS};

fn check(id: usize) {
    let result = run_criterion(id, 20260808);
    println!("{} ({} ms)", result.line(), result.millis);
    assert!(result.passed, "{}", result.line());
}

#[test]
fn criterion_01_teichmuller() {
    check(1);
}

#[test]
fn criterion_02_syntomic_exactness() {
    check(2);
}

#[test]
fn criterion_03_nygaard_equivalence() {
    check(3);
}

#[test]
fn criterion_04_ordinary_abelian_varieties() {
    check(4);
}

#[test]
fn criterion_05_supersingular_product() {
    check(5);
}

#[test]
fn criterion_06_slope_module_cokernels() {
    check(6);
}

#[test]
fn criterion_07_newton_polygons() {
    check(7);
}

#[test]
fn criterion_08_infinitesimal_comparison() {
    check(8);
}

#[test]
fn criterion_09_etale_sequence() {
    check(9);
}

#[test]
fn criterion_10_cech_descent() {
    check(10);
}

#[test]
fn criterion_11_isogeny_action() {
    check(11);
}

#[test]
fn criterion_12_determinism_and_fault_detection() {
    check(12);
}

#[test]
fn battery_covers_every_criterion() {
    assert_eq!(ALL_IDS, [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12]);
}
